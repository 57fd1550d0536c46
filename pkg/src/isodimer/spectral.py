"""Periodic machinery: Fourier matrices, characteristic polynomials, free energy.

``PeriodicCell`` wraps a toroidal isoradial quotient with its Fisher graph and
a periodic Kasteleyn orientation.  The Fourier transform convention is

    Khat(z, w)[u, v] = sum over lattice shifts (h, v') of
                       K_{u at shift (0,0), v at shift (h, v')} z^h w^v'

so the decaying inverse of the infinite operator has entries

    K^-1_{u(0,0), v(m,n)} = (1/2pi)^2 II [Khat(e^{i a}, e^{i b})^-1]_{u,v}
                            e^{-i(m a + n b)} da db.

The orientation's non-contractible parity class is normalized at construction
so that det Khat equals the critical-Laplacian characteristic polynomial
times the explicit constant 2^{|V1|} prod(cot^2(theta/2) - 1); the other
classes differ by (z, w) -> (+-z, +-w) and break that identity.

Torus integrals split the integrand with a C-infinity radial window around
the singular point (1,1): the windowed part is handled by the shifted-grid
midpoint rule (spectrally accurate), the complementary disk in polar
coordinates with the log r part integrated exactly.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.special import zeta as _zeta

from .errors import NonConvergenceError, OutOfRangeError, RatioNotConstantError
from .fisher import FisherGraph, KasteleynOrientation, decorate, kasteleyn_orient, orientation_audit
from .geometry import IsoradialGraph, critical_coupling

TWO_PI = 2 * math.pi


class PeriodicCell:
    def __init__(self, graph: IsoradialGraph, fisher: FisherGraph | None = None,
                 orientation: KasteleynOrientation | None = None,
                 normalize_class: bool = True):
        if graph.periodic is None:
            raise ValueError("PeriodicCell needs a toroidal quotient graph")
        self.graph = graph
        self.fisher = fisher if fisher is not None else decorate(graph)
        self.orientation = (orientation if orientation is not None
                            else kasteleyn_orient(self.fisher))
        self.n_fisher = len(self.fisher.verts)
        self.nV1 = len(graph.vertices)
        self.nE1 = len(graph.edges)
        self.thetas = [graph.edge_half_angle(e.eid) for e in graph.edges]
        self._gvid_index = {v: i for i, v in enumerate(sorted(graph.vertices))}
        if normalize_class:
            self._normalize_class()
        self._build_triplets()

    # -- assembly -------------------------------------------------------------

    def _build_triplets(self):
        I, J, C, H, V = [], [], [], [], []
        for e in self.fisher.edges:
            amp = float(self.orientation.signs[e.eid]) * e.weight
            I.append(e.i)
            J.append(e.j)
            C.append(amp)
            H.append(e.winding[0])
            V.append(e.winding[1])
            I.append(e.j)
            J.append(e.i)
            C.append(-amp)
            H.append(-e.winding[0])
            V.append(-e.winding[1])
        self._kt = (np.array(I), np.array(J), np.array(C, dtype=complex),
                    np.array(H), np.array(V))
        # positive-semidefinite sign convention (diagonal +sum tan, off-diag
        # -tan): the z2 cell then gives det = 4 - z - 1/z - w - 1/w, and the
        # characteristic-polynomial ratio constant comes out with the right
        # sign for odd |V1| as well
        I, J, C, H, V = [], [], [], [], []
        gi = self._gvid_index
        for e, th in zip(self.graph.edges, self.thetas):
            a, b = gi[e.a[0]], gi[e.b[0]]
            t = math.tan(th)
            s = e.shift
            I.extend([a, b])
            J.extend([b, a])
            C.extend([-t, -t])
            H.extend([s[0], -s[0]])
            V.extend([s[1], -s[1]])
            I.extend([a, b])
            J.extend([a, b])
            C.extend([t, t])
            H.extend([0, 0])
            V.extend([0, 0])
        self._lt = (np.array(I), np.array(J), np.array(C, dtype=complex),
                    np.array(H), np.array(V))

    def khat_batch(self, zs, ws) -> np.ndarray:
        return _assemble(self._kt, self.n_fisher, zs, ws)

    def khat(self, z, w) -> np.ndarray:
        return self.khat_batch(np.array([z]), np.array([w]))[0]

    def laplacian_hat_batch(self, zs, ws) -> np.ndarray:
        return _assemble(self._lt, self.nV1, zs, ws)

    def laplacian_hat(self, z, w) -> np.ndarray:
        return self.laplacian_hat_batch(np.array([z]), np.array([w]))[0]

    # -- orientation class normalization ------------------------------------------

    def _normalize_class(self):
        rng = np.random.default_rng(7)
        ph = np.exp(2j * math.pi * rng.random((2, 6)))
        zs, ws = ph[0], ph[1]
        best = None
        for sz in (1, -1):
            for sw in (1, -1):
                self._apply_class(sz, sw)
                self._build_triplets()
                P = np.linalg.det(self.khat_batch(zs, ws))
                PL = np.linalg.det(self.laplacian_hat_batch(zs, ws))
                r = P / PL
                spread = np.max(np.abs(r - r.mean())) / max(np.max(np.abs(r)), 1e-300)
                if best is None or spread < best[0]:
                    best = (spread, sz, sw)
                self._apply_class(sz, sw)  # undo
        _, sz, sw = best
        self._apply_class(sz, sw)
        audit = orientation_audit(self.fisher, self.orientation)
        if audit["violations"]:
            raise RatioNotConstantError("class normalization broke face parity")

    def _apply_class(self, sz: int, sw: int):
        if sz == 1 and sw == 1:
            return
        for e in self.fisher.edges:
            s = (sz ** (e.winding[0] % 2)) * (sw ** (e.winding[1] % 2))
            if s == -1:
                self.orientation.signs[e.eid] = -self.orientation.signs[e.eid]

    # -- characteristic polynomials -------------------------------------------------

    def char_poly_dimer(self, z, w) -> complex:
        return complex(np.linalg.det(self.khat(z, w)))

    def critical_laplacian_charpoly(self, z, w) -> complex:
        return complex(np.linalg.det(self.laplacian_hat(z, w)))

    def charpoly_ratio_constant(self, samples: int = 0, tol: float = 1e-8):
        """2^{|V1|} prod_e (cot^2(theta/2) - 1), checked against sampled ratios."""
        const = 2.0 ** self.nV1
        for th in self.thetas:
            const *= 1.0 / math.tan(th / 2) ** 2 - 1.0
        if samples:
            rng = np.random.default_rng(11)
            zs = np.exp(2j * math.pi * rng.random(samples))
            ws = np.exp(2j * math.pi * rng.random(samples))
            P = np.linalg.det(self.khat_batch(zs, ws))
            PL = np.linalg.det(self.laplacian_hat_batch(zs, ws))
            r = P / PL
            spread = float(np.max(np.abs(r - r.mean())) / np.max(np.abs(r)))
            dev = float(np.max(np.abs(r - const)) / abs(const))
            if spread > tol or dev > tol:
                raise RatioNotConstantError(
                    f"ratio spread {spread:.2e}, deviation {dev:.2e}")
        return const


def _assemble(triplets, n, zs, ws):
    I, J, C, H, V = triplets
    zs = np.asarray(zs, dtype=complex)
    ws = np.asarray(ws, dtype=complex)
    phase = (zs[:, None] ** H[None, :]) * (ws[:, None] ** V[None, :])
    out = np.zeros((len(zs), n, n), dtype=complex)
    np.add.at(out, (slice(None), I, J), C[None, :] * phase)
    return out


# ---------------------------------------------------------------------------
# Lobachevsky function


def lobachevsky(x: float) -> float:
    """L(x) = -int_0^x log|2 sin t| dt, by the zeta-accelerated series."""
    if isinstance(x, (list, tuple, np.ndarray)):
        return np.array([lobachevsky(float(v)) for v in np.asarray(x).ravel()])
    # odd, pi-periodic; reduce to [0, pi/2]
    y = math.fmod(x, math.pi)
    if y < 0:
        y += math.pi
    sign = 1.0
    if y > math.pi / 2:
        y = math.pi - y
        sign = -1.0
    if y == 0.0:
        return 0.0
    n = np.arange(1, 42)
    series = float(np.sum(_zeta(2 * n) / (n * (2 * n + 1)) * (y / math.pi) ** (2 * n)))
    return sign * (y - y * math.log(2 * y) + y * series)


def lobachevsky_quadrature(x: float) -> float:
    """Adaptive-quadrature cross-check of lobachevsky().

    Splits off the exact integral of log(2t); the remainder log(sin t / t)
    is smooth at 0.
    """
    from scipy.integrate import quad

    if x == 0.0:
        return 0.0
    val, _err = quad(lambda t: math.log(math.sin(t) / t) if t > 0 else 0.0,
                     0.0, x, limit=200, epsabs=1e-14, epsrel=1e-13)
    return -(x * math.log(2.0 * x) - x + val)


# ---------------------------------------------------------------------------
# free energies and entropy (closed forms)


def _per_edge_dimer_term(th: float) -> float:
    L = lobachevsky
    return ((math.pi - 2 * th) / TWO_PI * math.log(math.tan(th))
            - 0.5 * math.log(1.0 / math.tan(th / 2))
            - (L(th) + L(math.pi / 2 - th)) / math.pi)


def free_energy_dimer(cell: PeriodicCell) -> float:
    out = -(cell.nE1 + cell.nV1) * math.log(2.0) / 2.0
    for th in cell.thetas:
        out += _per_edge_dimer_term(th)
    return out


def free_energy_ising(cell: PeriodicCell) -> float:
    L = lobachevsky
    out = -cell.nV1 * math.log(2.0) / 2.0
    for th in cell.thetas:
        out -= (th / math.pi * math.log(math.tan(th))
                + (L(th) + L(math.pi / 2 - th)) / math.pi)
    return out


def free_energy_ising_via_dimer(cell: PeriodicCell) -> float:
    """f_I = f_D - sum_e log sinh J(theta_e); exact same-input identity."""
    out = free_energy_dimer(cell)
    for th in cell.thetas:
        out -= math.log(math.sinh(critical_coupling(th)))
    return out


def entropy_per_edge(th: float) -> float:
    L = lobachevsky
    return ((math.pi - 2 * th) / TWO_PI
            * (math.log(1 / math.tan(th)) - math.log(1 / math.tan(th / 2)) / math.cos(th))
            + (L(th) + L(math.pi / 2 - th)) / math.pi)


def entropy_dimer(cell: PeriodicCell) -> float:
    out = (cell.nE1 + cell.nV1) * math.log(2.0) / 2.0
    for th in cell.thetas:
        out += entropy_per_edge(th)
    return out


def entropy_dimer_via_definition(cell: PeriodicCell) -> float:
    """-f_D - sum_e P(e) log nu_e over the fundamental domain (G-edges only)."""
    from .gibbs import edge_probability_closed_form

    out = -free_energy_dimer(cell)
    for th in cell.thetas:
        out -= (edge_probability_closed_form("vv", th)
                * math.log(1.0 / math.tan(th / 2)))
    return out


# ---------------------------------------------------------------------------
# torus integrals with a smooth window around (1,1)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        qa = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        qb = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return qa / (qa + qb)


def _window(r, a, b):
    """C-infinity, 0 for r <= a, 1 for r >= b."""
    return _smoothstep((np.asarray(r) - a) / (b - a))


def free_energy_integral(cell: PeriodicCell, n: int = 512,
                         n_omega: int = 256, n_radial: int = 64) -> float:
    """f_D = -(1/2) II log|det Khat| over the unit torus, n x n midpoint grid.

    The integrable log singularity at (1,1) is excluded by a smooth radial
    window and integrated in polar coordinates, the log r part exactly.
    """
    if n < 64:
        raise NonConvergenceError("grid too coarse (n >= 64 required)")
    h = TWO_PI / n
    a, b = 10 * h, min(40 * h, 2.8)
    if b - a < 4 * h:
        a = 0.3 * b

    phis = (np.arange(n) + 0.5) * h
    total = 0.0
    for i in range(n):
        z = np.full(n, np.exp(1j * phis[i]))
        w = np.exp(1j * phis)
        dets = np.linalg.det(cell.khat_batch(z, w))
        F = np.log(np.abs(dets))
        pw = _wrap(phis[i])
        r = np.hypot(pw, _wrap(phis))
        total += float(np.sum(F * _window(r, a, b)))
    grid_part = total * h * h / (TWO_PI ** 2)

    # polar part over the disk r <= b around (0,0) ~ (z,w) = (1,1)
    xg, wg = np.polynomial.legendre.leggauss(n_radial)
    omegas = (np.arange(n_omega) + 0.5) * TWO_PI / n_omega
    polar = 0.0
    for om in omegas:
        co, si = math.cos(om), math.sin(om)
        # [0, a]: F = 2 log r + G with G smooth; log part exact
        r1 = 0.5 * a * (xg + 1.0)
        w1 = 0.5 * a * wg
        d1 = np.linalg.det(cell.khat_batch(np.exp(1j * r1 * co), np.exp(1j * r1 * si)))
        G = np.log(np.abs(d1) / r1 ** 2)
        seg1 = a * a * (math.log(a) - 0.5) + float(np.sum(w1 * r1 * G))
        # [a, b]: smooth integrand
        r2 = a + 0.5 * (b - a) * (xg + 1.0)
        w2 = 0.5 * (b - a) * wg
        d2 = np.linalg.det(cell.khat_batch(np.exp(1j * r2 * co), np.exp(1j * r2 * si)))
        F2 = np.log(np.abs(d2))
        seg2 = float(np.sum(w2 * r2 * (1.0 - _window(r2, a, b)) * F2))
        polar += seg1 + seg2
    polar *= TWO_PI / n_omega / (TWO_PI ** 2)
    return -0.5 * (grid_part + polar)


def _wrap(phi):
    return (np.asarray(phi) + math.pi) % TWO_PI - math.pi


def fourier_inverse_entry(cell: PeriodicCell, x: int, y: int,
                          shift: tuple[int, int], n: int = 1024,
                          n_omega: int = 256, n_radial: int = 96) -> float:
    """K^-1_{x(0,0), y(m,n)} of the infinite periodic operator, via Khat^-1."""
    return fourier_inverse_entries(cell, [(x, y, shift)], n, n_omega, n_radial)[0]


def fourier_inverse_entries(cell: PeriodicCell, requests, n: int = 1024,
                            n_omega: int = 256, n_radial: int = 96):
    """Batch version: one grid pass for many (x, y, (m, n)) requests."""
    h = TWO_PI / n
    a, b = 10 * h, min(40 * h, 2.8)
    if b - a < 4 * h:
        a = 0.3 * b
    cols = sorted({y for _x, y, _s in requests})
    col_of = {c: i for i, c in enumerate(cols)}
    N = cell.n_fisher
    E = np.zeros((N, len(cols)), dtype=complex)
    for c, i in col_of.items():
        E[c, i] = 1.0

    phis = (np.arange(n) + 0.5) * h
    acc = np.zeros(len(requests), dtype=complex)
    for i in range(n):
        z = np.full(n, np.exp(1j * phis[i]))
        w = np.exp(1j * phis)
        Ks = cell.khat_batch(z, w)
        X = np.linalg.solve(Ks, np.broadcast_to(E, (n, N, len(cols))))
        pw = _wrap(phis[i])
        r = np.hypot(pw, _wrap(phis))
        win = _window(r, a, b)
        for q, (xq, yq, (ms, ns)) in enumerate(requests):
            vals = X[:, xq, col_of[yq]]
            phase = np.exp(-1j * (ms * phis[i] + ns * phis))
            acc[q] += np.sum(vals * phase * win)
    acc *= h * h / (TWO_PI ** 2)

    xg, wg = np.polynomial.legendre.leggauss(n_radial)
    omegas = (np.arange(n_omega) + 0.5) * TWO_PI / n_omega
    polar = np.zeros(len(requests), dtype=complex)
    for om in omegas:
        co, si = math.cos(om), math.sin(om)
        r = 0.5 * b * (xg + 1.0)
        wq = 0.5 * b * wg
        pa = r * co
        pb = r * si
        Ks = cell.khat_batch(np.exp(1j * pa), np.exp(1j * pb))
        X = np.linalg.solve(Ks, np.broadcast_to(E, (n_radial, N, len(cols))))
        win = 1.0 - _window(r, a, b)
        for q, (xq, yq, (ms, ns)) in enumerate(requests):
            vals = X[:, xq, col_of[yq]]
            phase = np.exp(-1j * (ms * pa + ns * pb))
            polar[q] += np.sum(wq * r * win * vals * phase)
    polar *= TWO_PI / n_omega / (TWO_PI ** 2)
    out = acc + polar
    if np.max(np.abs(out.imag)) > 1e-6:
        raise NonConvergenceError(
            f"imaginary part {np.max(np.abs(out.imag)):.2e} in Fourier inverse")
    return [float(v) for v in out.real]


def builtin_cell(name: str, theta: float = math.pi / 4) -> PeriodicCell:
    from .builders import BUILTIN_CELLS

    if name not in BUILTIN_CELLS:
        raise OutOfRangeError(f"unknown builtin cell {name!r}")
    if name == "z2":
        return PeriodicCell(BUILTIN_CELLS[name](theta))
    return PeriodicCell(BUILTIN_CELLS[name]())
