"""Local formula for the inverse Kasteleyn matrix, by exact residue summation.

An entry is a contour integral of

    R(lambda) * log(lambda),   R = f_x(lambda) f_y(-lambda) Exp_{x,y}(lambda)

over a counterclockwise contour enclosing all poles of R and avoiding a
pole-free ray from the origin, plus a constant in {0, +-1/4}.  R is assembled
in fully factored form; by minimality of the underlying diamond path its pole
directions occupy an arc that leaves a gap of at least pi, whose midpoint
serves as the avoided ray.  Repeated directions (parallel separating tracks)
produce genuine higher-order poles, handled by local series expansion; the
handful of pairs whose gap is ambiguous or narrower (same-decoration w/z
pairs sharing a rhombus side, and v-v pairs) use hard-coded rays matching the
explicitly evaluated log-branch values.

Residue summation for far pairs is exponentially ill-conditioned in float64
(individual residues grow like c^m while their sum decays), so the engine
re-runs its own summation in extended precision when an internal condition
estimate or the imaginary-part residual exceeds budget.  The keyhole
quadrature oracle is an independent check of the same contour integral.
"""

from __future__ import annotations

import cmath
import math
from collections import namedtuple
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import (
    BoundaryTooCloseError,
    EmptySectorError,
    NonConvergenceError,
    PoleCollisionError,
    PoleHitError,
)
from .fisher import AngleField, FisherGraph, FVert, KasteleynMatrix, KasteleynOrientation
from .geometry import DiamondGraph, angle_mod

TWO_PI = 2 * math.pi

PoleTerm = namedtuple("PoleTerm", "pole numerator sign")


@dataclass
class PoleFunction:
    owner: FVert
    terms: tuple[PoleTerm, ...]
    kind: str


@dataclass
class GammaPath:
    steps: tuple[complex, ...]
    x_hat: complex
    y_hat: complex
    case: str
    cancelled: tuple[complex, ...]
    appended: tuple[complex, ...]


@dataclass
class SectorSpec:
    start: float
    end: float
    ray: float
    branch_base: float


@dataclass
class InverseEntry:
    value: float
    integral: float
    constant: float
    case: str
    n_poles: int
    extended_precision: bool


class LocalInverseEngine:
    """Caches everything needed to evaluate inverse entries on one patch."""

    def __init__(self, fisher: FisherGraph, orientation: KasteleynOrientation,
                 angles: AngleField, diamond: DiamondGraph, margin: int = 2):
        self.fisher = fisher
        self.orientation = orientation
        self.angles = angles
        self.diamond = diamond
        self.margin = margin
        self.K = KasteleynMatrix(fisher, orientation)
        self._track_cache: dict = {}
        self._entry_cache: dict = {}

    # -- pole data -----------------------------------------------------------

    def pole_function(self, idx: int) -> PoleFunction:
        v = self.fisher.verts[idx]
        ang = self.angles
        f = self.fisher
        fan = f.fans[v.gvid][v.k]
        iw = f.vid("w", v.gvid, v.k)
        iz = f.vid("z", v.gvid, v.k)
        tw = PoleTerm(ang.unit(iw), ang.half_unit(iw), +1)
        tz = PoleTerm(ang.unit(iz), ang.half_unit(iz), -1)
        if v.kind == "w":
            terms = (tw,)
        elif v.kind == "z":
            terms = (tz,)
        else:
            terms = (tw, tz)
        return PoleFunction(owner=v, terms=terms, kind=v.kind)

    def f_value(self, idx: int, lam: complex) -> complex:
        out = 0j
        for t in self.pole_function(idx).terms:
            d = t.pole - lam
            if abs(d) < 1e-12:
                raise PoleHitError(f"lambda on pole of f at {t.pole}")
            out += t.sign * t.numerator / d
        return out

    # -- track bookkeeping ------------------------------------------------------

    def _side_track(self, gvid: int, k: int, kind: str):
        key = (gvid, k, kind)
        if key in self._track_cache:
            return self._track_cache[key]
        f = self.fisher
        d = self.diamond
        fan = f.fans[gvid][k]
        r = d.rhombus_of_gedge(fan.geid)
        px = ("p", gvid)
        ang = fan.gw if kind == "w" else fan.gz
        best, berr = None, 1e9
        for dual in (("d", r.t[0]), ("d", r.u[0])):
            err = abs(d.node_pos[dual] - d.node_pos[px]
                      - cmath.exp(1j * ang))
            if err < berr:
                best, berr = dual, err
        if berr > 1e-6:
            raise PoleCollisionError("rhombus side lookup failed")
        tr = d.track_of_diamond_edge(px, best)
        self._track_cache[key] = tr
        return tr

    def _check_margin(self, *gvids):
        for g in gvids:
            if self.diamond.interior_depth(g) < self.margin:
                raise BoundaryTooCloseError(
                    f"G-vertex {g} at depth {self.diamond.interior_depth(g)} "
                    f"< margin {self.margin}")

    # -- gamma path ---------------------------------------------------------------

    def build_gamma(self, xi: int, yi: int) -> GammaPath:
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        self._check_margin(x.gvid, y.gvid)
        d = self.diamond
        gx, gy = x.gvid, y.gvid
        path = d.minimal_path(gx, gy) if gx != gy else None
        steps = list(path.steps) if path else []
        fx = self.pole_function(xi)
        fy = self.pole_function(yi)
        tx = {t: self._side_track_of_term(x, t) for t in fx.terms}
        ty = {t: self._side_track_of_term(y, t) for t in fy.terms}
        tx_ids = {tr.tid for tr in tx.values()}
        cancelled, appended_x, appended_y = [], [], []
        # f_x poles at u: cancelled iff their track separates
        for t in fx.terms:
            tr = tx[t]
            if gx != gy and d.separates(tr, gx, gy):
                cancelled.append(t.pole)
            else:
                appended_x.append(t.pole)
        # f_y(-lambda) poles at -u': cancelled iff track separates and is not
        # shared with f_x (a shared track only cancels one of the two)
        for t in fy.terms:
            tr = ty[t]
            if gx != gy and d.separates(tr, gx, gy) and tr.tid not in tx_ids:
                cancelled.append(-t.pole)
            else:
                appended_y.append(-t.pole)
        full = appended_y + steps + appended_x
        x_hat = d.node_pos[("p", gx)] + sum(appended_x)
        y_hat = d.node_pos[("p", gy)] - sum(appended_y)
        case = self._case_tag(xi, yi, tx_ids, {tr.tid for tr in ty.values()})
        return GammaPath(steps=tuple(full), x_hat=x_hat, y_hat=y_hat, case=case,
                         cancelled=tuple(cancelled),
                         appended=tuple(appended_x) + tuple(appended_y))

    def _side_track_of_term(self, v: FVert, t: PoleTerm):
        # which side of v's rhombus carries this pole
        f = self.fisher
        iw = f.vid("w", v.gvid, v.k)
        if abs(self.angles.unit(iw) - t.pole) < 1e-9:
            return self._side_track(v.gvid, v.k, "w")
        return self._side_track(v.gvid, v.k, "z")

    def _case_tag(self, xi, yi, tx_ids, ty_ids) -> str:
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        shared = len(tx_ids & ty_ids)
        if shared == 2:
            return "case3-vv-same" if xi == yi else "case3-vv-neighbor"
        if shared == 1:
            exc = self._exceptional_kind(xi, yi)
            if exc:
                return f"case2-exceptional-{exc}"
            return "case2"
        return "case1"

    def _exceptional_kind(self, xi, yi) -> str | None:
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        if x.gvid != y.gvid:
            return None
        d = len(f.fans[x.gvid])
        if xi == yi and x.kind == "w":
            return "ww"
        if xi == yi and x.kind == "z":
            return "zz"
        if x.kind == "w" and y.kind == "z" and y.k == (x.k + 1) % d:
            return "wz_next"
        if x.kind == "z" and y.kind == "w" and x.k == (y.k + 1) % d:
            return "zw_prev"
        return None

    # -- rational part -----------------------------------------------------------

    def rational(self, xi: int, yi: int):
        """Factored R(lambda): (const, numerator roots, denominator roots)."""
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        const = 1.0 + 0j
        nums: list[complex] = []
        dens: list[complex] = []
        fx = self.pole_function(xi)
        if fx.kind == "w":
            (t,) = fx.terms
            const *= -t.numerator
            dens.append(t.pole)
        elif fx.kind == "z":
            (t,) = fx.terms
            const *= t.numerator
            dens.append(t.pole)
        else:
            tw, tz = fx.terms
            const *= tz.numerator - tw.numerator
            nums.append(-tw.numerator * tz.numerator)
            dens.extend([tw.pole, tz.pole])
        fy = self.pole_function(yi)
        if fy.kind == "w":
            (t,) = fy.terms
            const *= t.numerator
            dens.append(-t.pole)
        elif fy.kind == "z":
            (t,) = fy.terms
            const *= -t.numerator
            dens.append(-t.pole)
        else:
            tw, tz = fy.terms
            const *= tw.numerator - tz.numerator
            nums.append(tw.numerator * tz.numerator)
            dens.extend([-tw.pole, -tz.pole])
        if x.gvid != y.gvid:
            for s in self.diamond.minimal_path(x.gvid, y.gvid).steps:
                const *= -1
                nums.append(-s)
                dens.append(s)
        nums, dens = _cancel(nums, dens)
        return const, nums, dens

    def rational_value(self, xi: int, yi: int, lam):
        const, nums, dens = self.rational(xi, yi)
        lam = np.asarray(lam, dtype=complex)
        out = np.full(lam.shape, const, dtype=complex)
        for n in nums:
            out *= lam - n
        for dd in dens:
            out /= lam - dd
        return out

    # -- sector / branch ray -------------------------------------------------------

    def sector(self, xi: int, yi: int) -> SectorSpec:
        const, nums, dens = self.rational(xi, yi)
        case = self.build_gamma(xi, yi).case
        return self._sector_from_poles(xi, yi, dens, case)

    def _sector_from_poles(self, xi, yi, dens, case) -> SectorSpec:
        # in every tabulated case the sector is the self-sector of y
        # (prop. "casered": s_{v_k,v_l} = s_{v_l,v_l}, s_{w_k,z_{k+1}} =
        # s_{z_{k+1},z_{k+1}}, ...), so conventions key off y's decoration
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        iw = f.vid("w", y.gvid, y.k)
        iz = f.vid("z", y.gvid, y.k)
        if case.startswith("case3"):
            aw = self.angles.alpha(iw)
            az = self.angles.alpha(iz)
            ray = angle_mod((aw + az) / 2 + math.pi)
            start, end = angle_mod(az + math.pi), angle_mod(aw + math.pi)
        elif case.startswith("case2-exceptional"):
            kind = case.rsplit("-", 1)[1]
            if kind in ("ww", "zw_prev"):     # y is the w vertex of the pair
                a = cmath.phase(self.angles.unit(iw))
                ray = angle_mod(a - math.pi / 2)
            else:                             # y is the z vertex
                a = cmath.phase(self.angles.unit(iz))
                ray = angle_mod(a + math.pi / 2)
            start, end = angle_mod(ray - math.pi / 2), angle_mod(ray + math.pi / 2)
        else:
            start, end, ray = _largest_gap_ray(dens)
        # the avoided sector must be pole-free
        for p in dens:
            rel = angle_mod(cmath.phase(p) - start)
            width = angle_mod(end - start)
            if 1e-9 < rel < width - 1e-9:
                raise EmptySectorError(
                    f"pole {p} inside avoided sector ({case})")
        return SectorSpec(start=start, end=end, ray=ray, branch_base=ray)

    # -- constant part ---------------------------------------------------------------

    def constant_term(self, xi: int, yi: int) -> float:
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        if x.gvid != y.gvid or "v" in (x.kind, y.kind):
            return 0.0
        if xi == yi:
            return 0.25 if x.kind == "w" else -0.25
        return (-1) ** self._n_clockwise(xi, yi) / 4.0

    def _n_clockwise(self, xi: int, yi: int) -> int:
        """Edges oriented clockwise on the clockwise inner-cycle arc x -> y."""
        f = self.fisher
        x = f.verts[xi]
        d = len(f.fans[x.gvid])
        cyc = []
        for k in range(d):
            cyc.append(f.vid("z", x.gvid, k))
            cyc.append(f.vid("w", x.gvid, k))
        i = cyc.index(xi)
        n = 0
        while cyc[i] != yi:
            j = (i - 1) % (2 * d)
            if self.orientation.eps(cyc[i], cyc[j]) == 1:
                n += 1
            i = j
        return n

    # -- residue evaluation -------------------------------------------------------------

    def inverse_entry(self, xi: int, yi: int) -> InverseEntry:
        key = (xi, yi)
        if key in self._entry_cache:
            return self._entry_cache[key]
        const, nums, dens = self.rational(xi, yi)
        case = self.build_gamma(xi, yi).case
        spec = self._sector_from_poles(xi, yi, dens, case)
        groups = _group_poles(dens)
        val, cond = _residue_integral(const, nums, groups, spec.branch_base)
        extended = False
        scale = max(1.0, abs(val))
        if cond * 1e-16 > 1e-13 * scale or abs(val.imag) > 1e-12 * scale:
            val = _residue_integral_mp(const, nums, groups, spec.branch_base, cond)
            extended = True
        if abs(val.imag) > 1e-11 * max(1.0, abs(val)):
            raise NonConvergenceError(
                f"imaginary residue {val.imag:.3e} for pair ({xi},{yi})")
        C = self.constant_term(xi, yi)
        entry = InverseEntry(value=float(val.real) + C, integral=float(val.real),
                             constant=C, case=case, n_poles=len(dens),
                             extended_precision=extended)
        self._entry_cache[key] = entry
        return entry

    def inverse_value(self, xi: int, yi: int) -> float:
        return self.inverse_entry(xi, yi).value

    # -- quadrature oracle ------------------------------------------------------------------

    def inverse_entry_quadrature(self, xi: int, yi: int, n: int = 4096,
                                 r_in: float = 1e-3, r_out: float = 1e3) -> float:
        """Keyhole contour around the avoided ray, n trapezoid points/segment."""
        const, nums, dens = self.rational(xi, yi)
        case = self.build_gamma(xi, yi).case
        spec = self._sector_from_poles(xi, yi, dens, case)
        delta = spec.branch_base

        def R(lam):
            out = np.full(np.shape(lam), const, dtype=complex)
            for nn in nums:
                out = out * (lam - nn)
            for dd in dens:
                out = out / (lam - dd)
            return out

        total = 0j
        for rad, orient in ((r_out, +1), (r_in, -1)):
            phi = delta + np.linspace(0.0, TWO_PI, n + 1)
            lam = rad * np.exp(1j * phi)
            fv = R(lam) * (math.log(rad) + 1j * phi) * 1j * lam
            total += orient * np.trapezoid(fv, phi)
        s = np.linspace(math.log(r_in), math.log(r_out), n + 1)
        rho = np.exp(s)
        lam = rho * cmath.exp(1j * delta)
        fv = R(lam) * lam          # d(lambda) = lambda ds along the ray
        total += -TWO_PI * 1j * np.trapezoid(fv, s)
        val = total / (TWO_PI ** 2)
        if abs(val.imag) > 1e-6:
            raise NonConvergenceError(f"keyhole imaginary part {val.imag:.3e}")
        return float(val.real) + self.constant_term(xi, yi)

    # -- kernel identity ------------------------------------------------------------------------

    def kernel_residual(self, xi: int, gy: int, lam: complex) -> complex:
        """sum_i K_{x,x_i} f_{x_i}(lambda) Exp_{base(x_i), y}(lambda); must vanish."""
        out = 0j
        for xj, kval, _e in self.K.row(xi):
            base_j = self.fisher.verts[xj].gvid
            exp_val = self.diamond.discrete_exp(base_j, gy, lam)
            out += kval * self.f_value(xj, lam) * exp_val
        return out

    # -- KI / KC tables ----------------------------------------------------------------------------

    def KI_entry(self, xi: int, yi: int) -> float:
        out = 0.0
        for xj, kval, _e in self.K.row(xi):
            out += kval * self.inverse_entry(xj, yi).integral
        return out

    def KC_entry(self, xi: int, yi: int) -> float:
        out = 0.0
        for xj, kval, _e in self.K.row(xi):
            out += kval * self.constant_term(xj, yi)
        return out

    def KKinv_entry(self, xi: int, yi: int) -> float:
        out = 0.0
        for xj, kval, _e in self.K.row(xi):
            out += kval * self.inverse_entry(xj, yi).value
        return out

    # -- asymptotics ----------------------------------------------------------------------------------

    def asymptotic_entry(self, xi: int, yi: int) -> float:
        f = self.fisher
        x, y = f.verts[xi], f.verts[yi]
        nx, ex = self._asym_factor(xi)
        ny, ey = self._asym_factor(yi)
        xb = self.diamond.node_pos[("p", x.gvid)]
        yb = self.diamond.node_pos[("p", y.gvid)]
        return ex * ey / TWO_PI * (nx * ny / (xb - yb)).imag

    def _asym_factor(self, idx: int):
        v = self.fisher.verts[idx]
        iw = self.fisher.vid("w", v.gvid, v.k)
        iz = self.fisher.vid("z", v.gvid, v.k)
        if v.kind == "w":
            return self.angles.half_unit(iw), 1.0
        if v.kind == "z":
            return self.angles.half_unit(iz), -1.0
        return self.angles.half_unit(iw) - self.angles.half_unit(iz), 1.0


# ---------------------------------------------------------------------------
# residue machinery


def _cancel(nums, dens, tol=1e-9):
    nums = list(nums)
    dens = list(dens)
    out_nums = []
    for nval in nums:
        hit = None
        for i, dval in enumerate(dens):
            if abs(nval - dval) < tol:
                hit = i
                break
        if hit is None:
            out_nums.append(nval)
        else:
            dens.pop(hit)
    return out_nums, dens


def _group_poles(dens, tol=1e-9):
    groups: list[list[complex]] = []
    for dv in dens:
        for grp in groups:
            if abs(grp[0] - dv) < tol:
                grp.append(dv)
                break
        else:
            groups.append([dv])
    return [(sum(g) / len(g), len(g)) for g in groups]


def _largest_gap_ray(dens):
    """Midpoint ray of the largest gap between pole directions (must be >= pi)."""
    angs = sorted({angle_mod(cmath.phase(p)) for p in _snap_dirs(dens)})
    if not angs:
        raise EmptySectorError("no poles")
    if len(angs) == 1:
        a = angs[0]
        return angle_mod(a + 1e-9), angle_mod(a - 1e-9), angle_mod(a + math.pi)
    gaps = []
    for i, a in enumerate(angs):
        b = angs[(i + 1) % len(angs)] + (TWO_PI if i + 1 == len(angs) else 0.0)
        gaps.append((b - a, a))
    best_w, best_s = max(gaps)
    if best_w < math.pi - 1e-7:
        raise PoleCollisionError(
            f"largest pole-free gap {best_w:.6f} < pi outside tabulated cases")
    if sum(1 for w, _ in gaps if abs(w - best_w) < 1e-9) > 1:
        raise PoleCollisionError("ambiguous pi-gaps outside tabulated cases")
    start = angle_mod(best_s)
    end = angle_mod(best_s + best_w)
    return start, end, angle_mod(best_s + best_w / 2)


def _snap_dirs(dens, tol=1e-9):
    out = []
    for d in dens:
        for o in out:
            if abs(o - d) < tol:
                break
        else:
            out.append(d)
    return out


def _branch_rep(p_angle: float, base: float) -> float:
    rel = angle_mod(p_angle - base)
    if rel < 1e-12 or rel > TWO_PI - 1e-12:
        raise EmptySectorError("pole on the avoided ray")
    return base + rel


def _residue_integral(const, nums, groups, base):
    """(i/2pi) * sum of residues of R(lambda) log(lambda); float backend.

    Returns (value, condition_estimate).
    """
    total = 0j
    cond = 0.0
    for p, m in groups:
        others_n = list(nums)
        others_d = [q for q, mq in groups for _ in range(mq) if abs(q - p) > 1e-12]
        logp = math.log(abs(p)) + 1j * _branch_rep(cmath.phase(p), base)
        # Taylor of g = (lam-p)^m R around p via cumulants
        e = [complex(const)]
        for nv in others_n:
            e[0] *= p - nv
        for dv in others_d:
            e[0] /= p - dv
        if m > 1:
            lcoef = []
            for k in range(1, m):
                s_k = 0j
                for nv in others_n:
                    s_k += (-1) ** (k - 1) / (k * (p - nv) ** k)
                for dv in others_d:
                    s_k -= (-1) ** (k - 1) / (k * (p - dv) ** k)
                lcoef.append(s_k)  # k-th Taylor coefficient of log g at p
            for j in range(1, m):
                acc = 0j
                for k in range(1, j + 1):
                    acc += k * lcoef[k - 1] * e[j - k]
                e.append(acc / j)
        # log series: log(p+t) = log p + sum (-1)^{k-1} t^k/(k p^k)
        res = 0j
        for j in range(m):
            k = m - 1 - j
            if k == 0:
                term = e[j] * logp
            else:
                term = e[j] * ((-1) ** (k - 1) / (k * p ** k))
            res += term
            cond += abs(term)
        total += res
    return 1j / TWO_PI * total, cond


def _residue_integral_mp(const, nums, groups, base, cond):
    dps = max(40, 20 + int(math.log10(max(cond, 1.0))) + 10)
    with mp.workdps(dps):
        total = mp.mpc(0)
        two_pi = 2 * mp.pi
        delta = mp.mpf(base)
        for p, m in groups:
            pm = mp.mpc(p)
            others_n = [mp.mpc(v) for v in nums]
            others_d = [mp.mpc(q) for q, mq in groups for _ in range(mq)
                        if abs(q - p) > 1e-12]
            # the huge per-pole residues cancel structurally, so the branch
            # angles must carry full working precision, not float64
            rel = mp.arg(pm) - delta
            while rel <= 0:
                rel += two_pi
            while rel > two_pi:
                rel -= two_pi
            logp = mp.log(abs(pm)) + 1j * (delta + rel)
            e = [mp.mpc(const)]
            for nv in others_n:
                e[0] *= pm - nv
            for dv in others_d:
                e[0] /= pm - dv
            if m > 1:
                lcoef = []
                for k in range(1, m):
                    s_k = mp.mpc(0)
                    for nv in others_n:
                        s_k += (-1) ** (k - 1) / (k * (pm - nv) ** k)
                    for dv in others_d:
                        s_k -= (-1) ** (k - 1) / (k * (pm - dv) ** k)
                    lcoef.append(s_k)
                for j in range(1, m):
                    acc = mp.mpc(0)
                    for k in range(1, j + 1):
                        acc += k * lcoef[k - 1] * e[j - k]
                    e.append(acc / j)
            res = mp.mpc(0)
            for j in range(m):
                k = m - 1 - j
                if k == 0:
                    res += e[j] * logp
                else:
                    res += e[j] * ((-1) ** (k - 1) / (k * pm ** k))
            total += res
        out = 1j / (2 * mp.pi) * total
        return complex(out)
