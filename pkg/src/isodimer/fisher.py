"""Fisher decoration, Kasteleyn orientation and the angle field in R/4piZ.

Every G-vertex of degree d becomes d triangles (v_k, w_k, z_k), labeled
counterclockwise starting from the incident edge of smallest direction angle;
w_k, z_k follow v_k counterclockwise around the triangle.  Ring edges join
w_k to z_{k+1}; each G-edge becomes one v-v edge of weight cot(theta/2), all
decoration edges weigh 1.

The orientation fixes every triangle clockwise (v->z, z->w, w->v) and solves
for the remaining edge directions so that every bounded face is clockwise
odd.  The angle field alpha (defined mod 4*pi) is propagated from the
orientation; its value at a w/z vertex always reduces mod 2*pi to the
geometric angle of the corresponding rhombus side.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict, deque, namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentAnglesError, OrientationFailureError
from .geometry import IsoradialGraph, angle_mod, critical_dimer_weight

FVert = namedtuple("FVert", "kind gvid k")

TWO_PI = 2 * math.pi


def vertex_name(v: FVert) -> str:
    return f"{v.kind}:{v.gvid}:{v.k}"


@dataclass
class Fan:
    """One half-edge at a G-vertex: the k-th triangle's geometry."""

    k: int
    geid: int
    phi: float            # direction angle of the G-edge, in [0, 2pi)
    theta: float          # rhombus half-angle
    gz: float             # geometric angle of the z-side (phi - theta), mod 2pi
    gw: float             # geometric angle of the w-side (phi + theta), mod 2pi
    partner: tuple        # (gvid', k') of the opposite half-edge
    winding: tuple        # cell winding of the v-v edge, this end -> partner
    weight: float


@dataclass
class FEdge:
    eid: int
    i: int
    j: int
    kind: str             # 'tri_vw' | 'tri_wz' | 'tri_zv' | 'ring' | 'vv'
    weight: float
    winding: tuple = (0, 0)
    geid: int | None = None


class FisherGraph:
    def __init__(self, graph: IsoradialGraph):
        self.graph = graph
        self.fans: dict[int, list[Fan]] = {}
        self._build_fans()
        self.verts: list[FVert] = []
        self.vindex: dict[FVert, int] = {}
        self.edges: list[FEdge] = []
        self.vadj: dict[int, list[int]] = defaultdict(list)
        self._build_edges()
        self.positions = self._layout() if graph.periodic is None else None
        self.rotation = self._rotation_system()
        self.faces = self._extract_faces()

    # -- construction --------------------------------------------------------

    def _build_fans(self):
        g = self.graph
        halfedges = defaultdict(list)
        for e in g.interior_edges:
            th = g.edge_half_angle(e.eid)
            w = critical_dimer_weight(th)
            pa = g.pos(e.a)
            pb_from_a = g.pos(e.b)
            d_ab = pb_from_a - pa
            halfedges[e.a[0]].append(
                (angle_mod(cmath.phase(d_ab)), e.eid, th, e.b[0], e.shift, w))
            sb = e.shift
            halfedges[e.b[0]].append(
                (angle_mod(cmath.phase(-d_ab)), e.eid, th, e.a[0],
                 (-sb[0], -sb[1]), w))
        end_index = {}
        for gvid, hes in halfedges.items():
            hes.sort(key=lambda h: h[0])
            fans = []
            for k, (phi, geid, th, ovid, wind, w) in enumerate(hes):
                fans.append(Fan(k=k, geid=geid, phi=phi, theta=th,
                                gz=angle_mod(phi - th), gw=angle_mod(phi + th),
                                partner=None, winding=wind, weight=w))
                end_index[(geid, gvid, phi)] = (gvid, k)
            self.fans[gvid] = fans
        # partner resolution: the two half-edges of one G-edge
        by_edge = defaultdict(list)
        for gvid, fans in self.fans.items():
            for f in fans:
                by_edge[f.geid].append((gvid, f.k))
        for geid, ends in by_edge.items():
            if len(ends) != 2:
                raise OrientationFailureError(f"G-edge {geid} has {len(ends)} fisher ends")
            (ga, ka), (gb, kb) = ends
            self.fans[ga][ka].partner = (gb, kb)
            self.fans[gb][kb].partner = (ga, ka)

    def _add_vert(self, v: FVert) -> int:
        if v not in self.vindex:
            self.vindex[v] = len(self.verts)
            self.verts.append(v)
        return self.vindex[v]

    def _build_edges(self):
        def add_edge(i, j, kind, weight, winding=(0, 0), geid=None):
            e = FEdge(eid=len(self.edges), i=i, j=j, kind=kind, weight=weight,
                      winding=winding, geid=geid)
            self.edges.append(e)
            self.vadj[i].append(e.eid)
            self.vadj[j].append(e.eid)
            return e.eid

        for gvid in sorted(self.fans):
            fans = self.fans[gvid]
            d = len(fans)
            for f in fans:
                iv = self._add_vert(FVert("v", gvid, f.k))
                iw = self._add_vert(FVert("w", gvid, f.k))
                iz = self._add_vert(FVert("z", gvid, f.k))
                add_edge(iv, iw, "tri_vw", 1.0)
                add_edge(iw, iz, "tri_wz", 1.0)
                add_edge(iz, iv, "tri_zv", 1.0)
            for f in fans:
                iw = self.vindex[FVert("w", gvid, f.k)]
                iz1 = self.vindex[FVert("z", gvid, (f.k + 1) % d)]
                add_edge(iw, iz1, "ring", 1.0)
        seen = set()
        for gvid in sorted(self.fans):
            for f in self.fans[gvid]:
                if f.geid in seen:
                    continue
                seen.add(f.geid)
                gb, kb = f.partner
                ia = self.vindex[FVert("v", gvid, f.k)]
                ib = self.vindex[FVert("v", gb, kb)]
                add_edge(ia, ib, "vv", f.weight, winding=f.winding, geid=f.geid)

    def _layout(self):
        g = self.graph
        pos = {}
        for gvid, fans in self.fans.items():
            base = g.pos(gvid)
            d = len(fans)
            rmin = min(2 * math.cos(f.theta) for f in fans)
            rv = 0.35 * min(1.0, rmin)
            rwz = 0.6 * rv
            for f in fans:
                gap_next = angle_mod(fans[(f.k + 1) % d].phi - f.phi)
                gap_prev = angle_mod(f.phi - fans[(f.k - 1) % d].phi)
                delta = 0.3 * min(gap_next, gap_prev, 1.0)
                if d == 1:
                    delta = 0.5
                pos[self.vindex[FVert("v", gvid, f.k)]] = base + rv * cmath.exp(1j * f.phi)
                pos[self.vindex[FVert("w", gvid, f.k)]] = base + rwz * cmath.exp(1j * (f.phi + delta))
                pos[self.vindex[FVert("z", gvid, f.k)]] = base + rwz * cmath.exp(1j * (f.phi - delta))
        return pos

    def _rotation_system(self):
        # counterclockwise edge order around every vertex, derived from the
        # standard decoration layout (exact for any valid embedding):
        #   v_k: (vv, tri_vw, tri_zv)
        #   w_k: (tri_vw, ring_k, tri_wz)
        #   z_k: (tri_zv, tri_wz, ring_{k-1})
        by_pair = {}
        for e in self.edges:
            by_pair.setdefault((e.kind, e.i, e.j), e.eid)
        rot = {}
        for idx, v in enumerate(self.verts):
            gvid, k = v.gvid, v.k
            d = len(self.fans[gvid])
            iv = self.vindex[FVert("v", gvid, k)]
            iw = self.vindex[FVert("w", gvid, k)]
            iz = self.vindex[FVert("z", gvid, k)]
            if v.kind == "v":
                vv = next(e for e in self.vadj[idx] if self.edges[e].kind == "vv")
                rot[idx] = [vv,
                            by_pair[("tri_vw", iv, iw)],
                            by_pair[("tri_zv", iz, iv)]]
            elif v.kind == "w":
                iz1 = self.vindex[FVert("z", gvid, (k + 1) % d)]
                rot[idx] = [by_pair[("tri_vw", iv, iw)],
                            by_pair[("ring", iw, iz1)],
                            by_pair[("tri_wz", iw, iz)]]
            else:
                iwp = self.vindex[FVert("w", gvid, (k - 1) % d)]
                rot[idx] = [by_pair[("tri_zv", iz, iv)],
                            by_pair[("tri_wz", iw, iz)],
                            by_pair[("ring", iwp, iz)]]
        return rot

    def _extract_faces(self):
        """Face orbits of the rotation system.

        A directed edge is (eid, end) with end=0 meaning i->j.  The next
        directed edge turns maximally clockwise at the head, which traverses
        every face once; bounded faces come out counterclockwise.
        """
        def head(de):
            e = self.edges[de[0]]
            return e.j if de[1] == 0 else e.i

        def nxt(de):
            h = head(de)
            rotl = self.rotation[h]
            i = rotl.index(de[0])
            e2 = rotl[(i - 1) % len(rotl)]
            end2 = 0 if self.edges[e2].i == h else 1
            # self-loop safety: pick the end whose tail is h
            if self.edges[e2].i == self.edges[e2].j:
                raise OrientationFailureError("self-loop in Fisher graph")
            return (e2, end2)

        seen = set()
        faces = []
        for eid in range(len(self.edges)):
            for end in (0, 1):
                de = (eid, end)
                if de in seen:
                    continue
                orbit = []
                cur = de
                while cur not in seen:
                    seen.add(cur)
                    orbit.append(cur)
                    cur = nxt(cur)
                faces.append(tuple(orbit))
        return faces

    # -- queries ---------------------------------------------------------------

    def degree_check(self):
        return all(len(self.vadj[i]) == 3 for i in range(len(self.verts)))

    def vid(self, kind: str, gvid: int, k: int) -> int:
        return self.vindex[FVert(kind, gvid, k)]

    def full_decoration(self, gvid: int) -> bool:
        """True when the rhombus fan at gvid closes up (interior G-vertex)."""
        return abs(sum(2 * f.theta for f in self.fans[gvid]) - TWO_PI) < 1e-7

    def vert(self, idx: int) -> FVert:
        return self.verts[idx]

    def edge_between(self, i: int, j: int) -> list[FEdge]:
        return [self.edges[e] for e in self.vadj[i]
                if self.edges[e].i + self.edges[e].j == i + j
                and {self.edges[e].i, self.edges[e].j} == {i, j}]

    def face_cycle_vertices(self, orbit) -> list[int]:
        out = []
        for eid, end in orbit:
            e = self.edges[eid]
            out.append(e.i if end == 0 else e.j)
        return out

    def face_displacement(self, orbit):
        w = [0, 0]
        for eid, end in orbit:
            e = self.edges[eid]
            s = e.winding if end == 0 else (-e.winding[0], -e.winding[1])
            w[0] += s[0]
            w[1] += s[1]
        return tuple(w)

    def face_signed_area(self, orbit) -> float:
        b = self.graph.periodic
        if self.positions is not None:
            pts = []
            for eid, end in orbit:
                e = self.edges[eid]
                pts.append(self.positions[e.i if end == 0 else e.j])
        else:
            pos = self._cell_positions()
            pts = []
            cur = 0j
            for eid, end in orbit:
                e = self.edges[eid]
                tail = e.i if end == 0 else e.j
                pts.append(pos[tail] + cur)
                s = e.winding if end == 0 else (-e.winding[0], -e.winding[1])
                cur += b.shift(s)
        area = 0.0
        n = len(pts)
        for i in range(n):
            a, c = pts[i], pts[(i + 1) % n]
            area += a.real * c.imag - c.real * a.imag
        return area / 2.0

    def _cell_positions(self):
        if not hasattr(self, "_cellpos"):
            g = self.graph
            pos = {}
            for gvid, fans in self.fans.items():
                base = g.pos(gvid)
                d = len(fans)
                for f in fans:
                    gap_next = angle_mod(fans[(f.k + 1) % d].phi - f.phi)
                    gap_prev = angle_mod(f.phi - fans[(f.k - 1) % d].phi)
                    delta = 0.3 * min(gap_next, gap_prev, 1.0) if d > 1 else 0.5
                    pos[self.vindex[FVert("v", gvid, f.k)]] = base + 0.3 * cmath.exp(1j * f.phi)
                    pos[self.vindex[FVert("w", gvid, f.k)]] = base + 0.18 * cmath.exp(1j * (f.phi + delta))
                    pos[self.vindex[FVert("z", gvid, f.k)]] = base + 0.18 * cmath.exp(1j * (f.phi - delta))
            self._cellpos = pos
        return self._cellpos


# ---------------------------------------------------------------------------
# Kasteleyn orientation


class KasteleynOrientation:
    """Edge directions as a sign per stored edge: +1 means i -> j."""

    def __init__(self, fisher: FisherGraph, signs: np.ndarray):
        self.fisher = fisher
        self.signs = signs

    def eps_edge(self, eid: int, i: int, j: int) -> int:
        e = self.fisher.edges[eid]
        s = int(self.signs[eid])
        if (e.i, e.j) == (i, j):
            return s
        if (e.j, e.i) == (i, j):
            return -s
        raise KeyError((eid, i, j))

    def eps(self, i: int, j: int) -> int:
        """Sign between adjacent vertices (0 if non-adjacent)."""
        for eid in self.fisher.vadj[i]:
            e = self.fisher.edges[eid]
            if {e.i, e.j} == {i, j}:
                return self.eps_edge(eid, i, j)
        return 0

    def flip_decorations(self, gvids) -> "KasteleynOrientation":
        """Gauge variant: flip every v-v edge incident to the given decorations.

        Preserves clockwise triangles and all face parities, so the result is
        another valid Kasteleyn orientation.
        """
        gv = set(gvids)
        signs = self.signs.copy()
        for e in self.fisher.edges:
            if e.kind != "vv":
                continue
            na = self.fisher.verts[e.i].gvid in gv
            nb = self.fisher.verts[e.j].gvid in gv
            if na != nb:
                signs[e.eid] = -signs[e.eid]
        return KasteleynOrientation(self.fisher, signs)


def kasteleyn_orient(fisher: FisherGraph,
                     fixed: dict[int, int] | None = None) -> KasteleynOrientation:
    """Clockwise-odd orientation with every decoration triangle clockwise.

    ``fixed`` pins additional ring/vv edge signs (by edge id) before solving,
    e.g. to make two graphs agree on a common region.
    """
    fixed = fixed or {}
    nE = len(fisher.edges)
    base = np.zeros(nE, dtype=np.int8)
    free = []
    free_index = {}
    for e in fisher.edges:
        if e.kind == "tri_vw":      # oriented w -> v
            base[e.eid] = -1 if fisher.verts[e.i].kind == "v" else 1
        elif e.kind == "tri_wz":    # oriented z -> w
            base[e.eid] = -1 if fisher.verts[e.i].kind == "w" else 1
        elif e.kind == "tri_zv":    # oriented v -> z
            base[e.eid] = -1 if fisher.verts[e.i].kind == "z" else 1
        elif e.eid in fixed:
            base[e.eid] = fixed[e.eid]
        else:
            base[e.eid] = 1         # reference direction i -> j, may flip
            free_index[e.eid] = len(free)
            free.append(e.eid)

    rows = []
    rhs = []
    for orbit in fisher.faces:
        if fisher.graph.periodic is None and fisher.face_signed_area(orbit) < 0:
            continue  # outer face unconstrained
        if fisher.graph.periodic is not None and fisher.face_displacement(orbit) != (0, 0):
            raise OrientationFailureError("non-contractible face orbit on torus")
        row = np.zeros(len(free), dtype=np.uint8)
        const = 0
        # orbit is counterclockwise; clockwise traversal crosses each directed
        # edge reversed, so an edge is clockwise-co-oriented iff its final
        # direction disagrees with the orbit direction
        for eid, end in orbit:
            e = fisher.edges[eid]
            along = 1 if end == 0 else -1   # orbit traverses i->j or j->i
            co = 1 if base[eid] * along == -1 else 0
            if eid in free_index:
                row[free_index[eid]] ^= 1
                const ^= co
            else:
                const ^= co
        rows.append(row)
        rhs.append(1 ^ const)
    A = np.array(rows, dtype=np.uint8) if rows else np.zeros((0, len(free)), np.uint8)
    b = np.array(rhs, dtype=np.uint8)
    x = _gf2_solve(A, b)
    if x is None:
        raise OrientationFailureError("face parity system unsolvable")
    signs = base.copy()
    for eid, col in free_index.items():
        if x[col]:
            signs[eid] = -signs[eid]
    return KasteleynOrientation(fisher, signs)


def _gf2_solve(A: np.ndarray, b: np.ndarray):
    A = A.copy() % 2
    b = b.copy() % 2
    m, n = A.shape
    piv_cols = []
    r = 0
    for c in range(n):
        rows = np.nonzero(A[r:, c])[0]
        if len(rows) == 0:
            continue
        p = r + rows[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
            b[[r, p]] = b[[p, r]]
        hit = np.nonzero(A[:, c])[0]
        for q in hit:
            if q != r:
                A[q] ^= A[r]
                b[q] ^= b[r]
        piv_cols.append(c)
        r += 1
        if r == m:
            break
    if np.any(b[r:]):
        return None
    x = np.zeros(n, dtype=np.uint8)
    for i, c in enumerate(piv_cols):
        x[c] = b[i]
    return x


def orientation_audit(fisher: FisherGraph, orientation: KasteleynOrientation,
                      skip_partial: bool = False) -> dict:
    """Explicit clockwise-odd face walk over every constrained face.

    ``skip_partial`` ignores faces touching truncated boundary decorations
    (needed for orientations lifted from a torus, whose fallback ring edges
    carry no parity guarantee there).
    """
    bad = 0
    checked = 0
    for orbit in fisher.faces:
        if fisher.graph.periodic is None and fisher.face_signed_area(orbit) < 0:
            continue
        if skip_partial and any(
                not fisher.full_decoration(fisher.verts[fisher.edges[eid].i].gvid)
                for eid, _ in orbit):
            continue
        checked += 1
        n_co = 0
        for eid, end in orbit:
            along = 1 if end == 0 else -1
            if orientation.signs[eid] * along == -1:
                n_co += 1
        if n_co % 2 == 0:
            bad += 1
    return {"checked": checked, "violations": bad}


# ---------------------------------------------------------------------------
# Angle field


class AngleField:
    """alpha in R/4piZ on w/z vertices, stored as (m, s) with alpha = m*pi + s.

    The integer part tracks the exact pi-multiples added by the propagation
    rules; s accumulates the geometric 2*theta increments, so half-angles
    e^{i alpha/2} = i^m e^{i s/2} stay clean over long chains.
    """

    def __init__(self, fisher: FisherGraph, orientation: KasteleynOrientation,
                 base_gvid: int | None = None):
        self.fisher = fisher
        self.orientation = orientation
        self.mpart: dict[int, int] = {}
        self.spart: dict[int, float] = {}
        if base_gvid is None:
            g = fisher.graph
            base_gvid = min(fisher.fans, key=lambda v: (round(g.pos(v).real, 9),
                                                        round(g.pos(v).imag, 9), v))
        self.base_gvid = base_gvid
        self._propagate()

    # relation edges: (target_vertex, source_vertex, dm, ds)
    def _relations(self):
        f = self.fisher
        ori = self.orientation
        rels = []
        for gvid, fans in f.fans.items():
            d = len(fans)
            for fan in fans:
                iw = f.vid("w", gvid, fan.k)
                iz = f.vid("z", gvid, fan.k)
                rels.append((iw, iz, 0, 2 * fan.theta))
                nxt = fans[(fan.k + 1) % d]
                gap = abs(angle_mod(nxt.gz - fan.gw, TWO_PI))
                if min(gap, TWO_PI - gap) < 1e-7:
                    iz1 = f.vid("z", gvid, nxt.k)
                    eps = ori.eps(iw, iz1)
                    rels.append((iz1, iw, 0 if eps == 1 else 2, 0.0))
        for e in f.edges:
            if e.kind != "vv":
                continue
            va, vb = f.verts[e.i], f.verts[e.j]
            eps = ori.eps_edge(e.eid, e.i, e.j)
            iwa = f.vid("w", va.gvid, va.k)
            iwb = f.vid("w", vb.gvid, vb.k)
            rels.append((iwb, iwa, -eps, 0.0))
            rels.append((iwa, iwb, eps, 0.0))
        return rels

    def _propagate(self):
        f = self.fisher
        rels = self._relations()
        fwd = defaultdict(list)
        for tgt, src, dm, ds in rels:
            fwd[src].append((tgt, dm, ds))
            fwd[tgt].append((src, -dm, -ds))
        base_fan = f.fans[self.base_gvid][0]
        start = f.vid("z", self.base_gvid, 0)
        self.mpart[start] = 0
        self.spart[start] = base_fan.gz

        def set_value(vtx, m, s):
            self.mpart[vtx] = m
            self.spart[vtx] = s
            # keep w = z + 2 theta exact within each triangle, not just mod 4pi
            fv = f.verts[vtx]
            th = f.fans[fv.gvid][fv.k].theta
            if fv.kind == "w":
                other = f.vid("z", fv.gvid, fv.k)
                if other not in self.mpart:
                    self.mpart[other] = m
                    self.spart[other] = s - 2 * th
            else:
                other = f.vid("w", fv.gvid, fv.k)
                if other not in self.mpart:
                    self.mpart[other] = m
                    self.spart[other] = s + 2 * th

        set_value(start, 0, base_fan.gz)
        q = deque([start, f.vid("w", self.base_gvid, 0)])
        while q:
            u = q.popleft()
            for vtx, dm, ds in fwd[u]:
                if vtx in self.mpart:
                    continue
                set_value(vtx, self.mpart[u] + dm, self.spart[u] + ds)
                q.append(vtx)
                other = f.vid("w" if f.verts[vtx].kind == "z" else "z",
                              f.verts[vtx].gvid, f.verts[vtx].k)
                q.append(other)
        # closure audit over every relation (tree and non-tree)
        worst = 0.0
        for tgt, src, dm, ds in rels:
            if tgt not in self.mpart or src not in self.mpart:
                continue
            dm_eff = (self.mpart[tgt] - self.mpart[src] - dm)
            ds_eff = (self.spart[tgt] - self.spart[src] - ds)
            res = dm_eff * math.pi + ds_eff
            res -= 4 * math.pi * round(res / (4 * math.pi))
            worst = max(worst, abs(res))
        if worst > 1e-9:
            raise InconsistentAnglesError(f"mod-4pi closure residue {worst:.3e}")
        self.closure_residue = worst

    def alpha(self, idx: int) -> float:
        return self.mpart[idx] * math.pi + self.spart[idx]

    def unit(self, idx: int) -> complex:
        """e^{i alpha} for a w/z vertex."""
        return (1j) ** ((2 * self.mpart[idx]) % 4) * cmath.exp(1j * self.spart[idx])

    def half_unit(self, idx: int) -> complex:
        """e^{i alpha/2}; depends on alpha mod 4pi."""
        return (1j) ** (self.mpart[idx] % 4) * cmath.exp(0.5j * self.spart[idx])

    def geometric_audit(self) -> float:
        """max |e^{i alpha} - geometric side direction| over all w/z vertices."""
        f = self.fisher
        worst = 0.0
        for gvid, fans in f.fans.items():
            for fan in fans:
                for kind, ang in (("w", fan.gw), ("z", fan.gz)):
                    idx = f.vid(kind, gvid, fan.k)
                    if idx not in self.mpart:
                        continue
                    worst = max(worst, abs(self.unit(idx) - cmath.exp(1j * ang)))
        return worst


def assign_angles(fisher: FisherGraph, orientation: KasteleynOrientation,
                  base_gvid: int | None = None) -> AngleField:
    return AngleField(fisher, orientation, base_gvid)


# ---------------------------------------------------------------------------
# Kasteleyn matrix view


class KasteleynMatrix:
    def __init__(self, fisher: FisherGraph, orientation: KasteleynOrientation):
        self.fisher = fisher
        self.orientation = orientation

    def entry(self, i: int, j: int) -> float:
        out = 0.0
        for eid in self.fisher.vadj[i]:
            e = self.fisher.edges[eid]
            if {e.i, e.j} == {i, j} and i != j:
                out += self.orientation.eps_edge(eid, i, j) * e.weight
        return out

    def row(self, i: int):
        out = []
        for eid in self.fisher.vadj[i]:
            e = self.fisher.edges[eid]
            j = e.j if e.i == i else e.i
            out.append((j, self.orientation.eps_edge(eid, i, j) * e.weight, e))
        return out


def kasteleyn_entry(fisher, orientation, i, j) -> float:
    return KasteleynMatrix(fisher, orientation).entry(i, j)


def lift_orientation(patch_fisher: FisherGraph, vmap: dict,
                     cell_fisher: FisherGraph,
                     cell_orientation: KasteleynOrientation) -> KasteleynOrientation:
    """Pull a periodic (torus) orientation back onto a patch cut from the cell.

    vmap maps patch G-vertex ids to (cell G-vertex id, shift).  Half-edges are
    matched by direction angle.  Faces of the patch that are lifts of torus
    faces keep their clockwise-odd parity; only such faces matter for local
    formulas at interior vertices.
    """
    kmap = {}
    for pvid, (cvid, _s) in vmap.items():
        if pvid not in patch_fisher.fans:
            continue
        cf = cell_fisher.fans[cvid]
        for fan in patch_fisher.fans[pvid]:
            match = [g.k for g in cf
                     if abs(cmath.exp(1j * g.phi) - cmath.exp(1j * fan.phi)) < 1e-7]
            if len(match) != 1:
                raise OrientationFailureError("ambiguous half-edge match in lift")
            kmap[(pvid, fan.k)] = (cvid, match[0])

    def cell_vertex(kind, pvid, k):
        cvid, ck = kmap[(pvid, k)]
        return cell_fisher.vid(kind, cvid, ck)

    signs = np.zeros(len(patch_fisher.edges), dtype=np.int8)
    for e in patch_fisher.edges:
        va, vb = patch_fisher.verts[e.i], patch_fisher.verts[e.j]
        ca = cell_vertex(va.kind, va.gvid, va.k)
        cb = cell_vertex(vb.kind, vb.gvid, vb.k)
        cands = [ce for ce in cell_fisher.edges
                 if ce.kind == e.kind and {ce.i, ce.j} == {ca, cb}]
        if len(cands) == 0:
            # ring edge of a truncated boundary decoration; no torus
            # counterpart, and no interior face depends on it
            signs[e.eid] = 1
            continue
        if len(cands) > 1:
            raise OrientationFailureError(
                f"edge lift ambiguous for {e.kind} ({len(cands)} candidates)")
        ce = cands[0]
        s = int(cell_orientation.signs[ce.eid])
        signs[e.eid] = s if (ce.i, ce.j) == (ca, cb) else -s
    return KasteleynOrientation(patch_fisher, signs)


class _OracleGraph:
    """Bare finite graph with prescribed half-angles, for enumeration oracles.

    Skips all isoradiality checking; only the fan/weight surface that the
    Fisher construction needs.
    """

    periodic = None

    def __init__(self, positions, edges, thetas):
        self.vertices = {int(k): complex(v) for k, v in positions.items()}
        from .geometry import Edge

        self.edges = [Edge(eid=i, a=(int(a), (0, 0)), b=(int(b), (0, 0)))
                      for i, (a, b) in enumerate(edges)]
        self.interior_edges = self.edges
        self._thetas = [float(t) for t in thetas]

    def pos(self, ref):
        if isinstance(ref, tuple):
            ref = ref[0]
        return self.vertices[int(ref)]

    def edge_half_angle(self, eid):
        return self._thetas[eid]


def fisher_from_edges(positions, edges, thetas) -> FisherGraph:
    """Fisher graph of an arbitrary finite embedded graph (oracle plumbing)."""
    return FisherGraph(_OracleGraph(positions, edges, thetas))


def cell_vertex_map(patch_fisher: FisherGraph, vmap: dict,
                    cell_fisher: FisherGraph) -> dict[int, tuple[int, tuple[int, int]]]:
    """Map patch Fisher vertex index -> (cell Fisher vertex index, cell offset)."""
    out = {}
    for pvid, (cvid, shift) in vmap.items():
        if pvid not in patch_fisher.fans:
            continue
        cf = cell_fisher.fans[cvid]
        for fan in patch_fisher.fans[pvid]:
            match = [g.k for g in cf
                     if abs(cmath.exp(1j * g.phi) - cmath.exp(1j * fan.phi)) < 1e-7]
            if len(match) != 1:
                raise OrientationFailureError("ambiguous half-edge match")
            for kind in "vwz":
                out[patch_fisher.vid(kind, pvid, fan.k)] = (
                    cell_fisher.vid(kind, cvid, match[0]), shift)
    return out


def decorate(graph: IsoradialGraph) -> FisherGraph:
    """Fisher decoration of an isoradial graph (patch or torus quotient)."""
    return FisherGraph(graph)


def orientation_csv(fisher: FisherGraph, orientation: KasteleynOrientation) -> str:
    lines = ["from,to,sign,weight"]
    for e in fisher.edges:
        s = int(orientation.signs[e.eid])
        lines.append(f"{vertex_name(fisher.verts[e.i])},{vertex_name(fisher.verts[e.j])},"
                     f"{s},{e.weight:.15g}")
    return "\n".join(lines) + "\n"


def angles_csv(fisher: FisherGraph, angles: AngleField) -> str:
    lines = ["vertex,alpha"]
    for idx, v in enumerate(fisher.verts):
        if v.kind == "v" or idx not in angles.mpart:
            continue
        lines.append(f"{vertex_name(v)},{angles.alpha(idx):.15g}")
    return "\n".join(lines) + "\n"
