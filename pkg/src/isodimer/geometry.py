"""Isoradial graphs, diamond graphs, train-tracks and the discrete exponential.

Positions are complex numbers.  A graph is a set of vertices plus a list of
faces given as vertex cycles; circumcenters are always recomputed from the
vertex positions, never trusted from input.  Periodic (toroidal) graphs use
vertex references ``(vid, (m, n))`` meaning "vertex vid translated by
m*b1 + n*b2".

The diamond graph holds one rhombus per G-edge whose two adjacent faces are
both present, i.e. a finite patch is a union of whole rhombi.  Train-tracks,
separation, minimal paths and the discrete exponential are implemented for
finite patches only.
"""

from __future__ import annotations

import cmath
import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRhombusError,
    NoPathError,
    NonIsoradialError,
    OutOfRangeError,
    PoleHitError,
)

GEOM_TOL = 1e-9

NodeRef = tuple[int, tuple[int, int]]


def _ref(v) -> NodeRef:
    if isinstance(v, tuple) and len(v) == 2 and isinstance(v[1], tuple):
        return (int(v[0]), (int(v[1][0]), int(v[1][1])))
    return (int(v), (0, 0))


def angle_mod(a: float, period: float = 2 * math.pi) -> float:
    """Reduce an angle to [0, period)."""
    a = math.fmod(a, period)
    return a + period if a < 0 else a


def unit(z: complex) -> complex:
    return z / abs(z)


def critical_coupling(theta: float) -> float:
    """Critical coupling J(theta) = (1/2) log((1 + sin theta)/cos theta)."""
    if not 0.0 < theta < math.pi / 2:
        raise OutOfRangeError(f"half-angle {theta} outside (0, pi/2)")
    return 0.5 * math.log((1.0 + math.sin(theta)) / math.cos(theta))


def critical_dimer_weight(theta: float) -> float:
    """Critical dimer weight cot(theta/2) on the edge of half-angle theta."""
    if not 0.0 < theta < math.pi / 2:
        raise OutOfRangeError(f"half-angle {theta} outside (0, pi/2)")
    return 1.0 / math.tan(theta / 2.0)


@dataclass(frozen=True)
class PeriodicBasis:
    b1: complex
    b2: complex

    def shift(self, s: tuple[int, int]) -> complex:
        return s[0] * self.b1 + s[1] * self.b2


@dataclass
class Face:
    fid: int
    cycle: tuple[NodeRef, ...]
    circumcenter: complex = 0j


@dataclass
class Edge:
    """Undirected G-edge between refs a and b (canonical orientation)."""

    eid: int
    a: NodeRef
    b: NodeRef
    faces: list[tuple[int, tuple[int, int]]] = field(default_factory=list)

    @property
    def shift(self) -> tuple[int, int]:
        return (self.b[1][0] - self.a[1][0], self.b[1][1] - self.a[1][1])


@dataclass
class Rhombus:
    """Unit rhombus of a G-edge: primal corners x, y and dual corners t, u.

    ``t`` is the circumcenter on the counterclockwise side of the directed
    edge x -> y, ``u`` on the clockwise side; the half-angle is measured at
    the primal corners.
    """

    rid: int
    eid: int
    x: NodeRef
    y: NodeRef
    t: tuple[int, tuple[int, int]]
    u: tuple[int, tuple[int, int]]
    half_angle: float


class IsoradialGraph:
    """Embedded isoradial graph (finite patch or toroidal quotient)."""

    def __init__(self, vertices, faces, periodic: PeriodicBasis | None = None,
                 epsilon: float = 0.05, validate: bool = True):
        self.vertices: dict[int, complex] = {int(k): complex(v) for k, v in vertices.items()}
        self.periodic = periodic
        self.epsilon = float(epsilon)
        self.faces: list[Face] = []
        for i, cyc in enumerate(faces):
            refs = tuple(_ref(v) for v in cyc)
            self.faces.append(Face(fid=i, cycle=refs))
        self._build_edges()
        self._compute_circumcenters(validate=validate)
        if validate:
            self._validate()

    # -- reference helpers -------------------------------------------------

    def pos(self, ref) -> complex:
        vid, s = _ref(ref)
        p = self.vertices[vid]
        if s != (0, 0):
            if self.periodic is None:
                raise KeyError(f"shifted ref {ref} on a non-periodic graph")
            p = p + self.periodic.shift(s)
        return p

    def face_pos(self, fref) -> complex:
        fid, s = fref
        c = self.faces[fid].circumcenter
        if s != (0, 0):
            c = c + self.periodic.shift(s)
        return c

    # -- construction ------------------------------------------------------

    def _edge_key_oriented(self, a: NodeRef, b: NodeRef):
        # translate so the first ref has shift (0,0); canonicalize direction;
        # also return the shift that moved the canonical frame to 0
        ka = ((a[0], (0, 0)), (b[0], (b[1][0] - a[1][0], b[1][1] - a[1][1])))
        kb = ((b[0], (0, 0)), (a[0], (a[1][0] - b[1][0], a[1][1] - b[1][1])))
        return (ka, a[1]) if ka <= kb else (kb, b[1])

    def _build_edges(self):
        self.edges: list[Edge] = []
        self._edge_index: dict = {}
        for f in self.faces:
            n = len(f.cycle)
            for i in range(n):
                a, b = f.cycle[i], f.cycle[(i + 1) % n]
                key, s0 = self._edge_key_oriented(a, b)
                if key not in self._edge_index:
                    e = Edge(eid=len(self.edges), a=key[0], b=key[1])
                    self._edge_index[key] = e.eid
                    self.edges.append(e)
                e = self.edges[self._edge_index[key]]
                # face adjacency in the edge's canonical frame
                e.faces.append((f.fid, (-s0[0], -s0[1])))
        self.interior_edges = [e for e in self.edges if len(e.faces) == 2]

    def _compute_circumcenters(self, validate: bool):
        for f in self.faces:
            pts = np.array([self.pos(r) for r in f.cycle])
            c = _circumcenter(pts)
            f.circumcenter = c
            if validate:
                d = np.abs(pts - c)
                if np.max(np.abs(d - 1.0)) > GEOM_TOL:
                    raise NonIsoradialError(
                        f"face {f.fid}: circumradius deviation {np.max(np.abs(d-1)):.3e}")
                if not _point_in_polygon(c, pts):
                    raise NonIsoradialError(f"face {f.fid}: circumcenter outside face")

    def _validate(self):
        for e in self.interior_edges:
            th = self.edge_half_angle(e.eid)
            if not self.epsilon - GEOM_TOL <= th <= math.pi / 2 - self.epsilon + GEOM_TOL:
                raise DegenerateRhombusError(
                    f"edge {e.eid}: half-angle {th:.6f} outside "
                    f"[{self.epsilon}, pi/2-{self.epsilon}]")

    def edge_half_angle(self, eid: int) -> float:
        e = self.edges[eid]
        if len(e.faces) != 2:
            raise DegenerateRhombusError(f"edge {eid} has no rhombus (boundary edge)")
        x = self.pos(e.a)
        t = self.face_pos(e.faces[0])
        u = self.face_pos(e.faces[1])
        a1 = cmath.phase((t - x))
        a2 = cmath.phase((u - x))
        d = angle_mod(a1 - a2)
        if d > math.pi:
            d = 2 * math.pi - d
        return d / 2.0

    # -- JSON interface (field names fixed by the external contract) --------

    def to_json(self) -> dict:
        doc = {
            "vertices": [{"id": vid, "x": p.real, "y": p.imag}
                         for vid, p in sorted(self.vertices.items())],
            "faces": [{"id": f.fid,
                       "cycle": [vid if s == (0, 0) else [vid, s[0], s[1]]
                                 for vid, s in f.cycle]}
                      for f in self.faces],
            "epsilon": self.epsilon,
        }
        if self.periodic is not None:
            doc["periodic"] = {
                "basis": [[self.periodic.b1.real, self.periodic.b1.imag],
                          [self.periodic.b2.real, self.periodic.b2.imag]],
                "cell_vertices": sorted(self.vertices),
            }
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "IsoradialGraph":
        vertices = {int(v["id"]): complex(v["x"], v["y"]) for v in doc["vertices"]}
        faces = []
        for f in doc["faces"]:
            cyc = []
            for entry in f["cycle"]:
                if isinstance(entry, list):
                    cyc.append((entry[0], (entry[1], entry[2])))
                else:
                    cyc.append((entry, (0, 0)))
            faces.append(cyc)
        periodic = None
        if doc.get("periodic"):
            b = doc["periodic"]["basis"]
            periodic = PeriodicBasis(complex(b[0][0], b[0][1]), complex(b[1][0], b[1][1]))
        return cls(vertices, faces, periodic=periodic,
                   epsilon=doc.get("epsilon", 0.05))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _circumcenter(pts: np.ndarray) -> complex:
    """Point at unit distance from all pts (least squares + one polish step)."""
    x, y = pts.real, pts.imag
    # |p_i|^2 - 2 p_i . c = |p_j|^2 - 2 p_j . c  for all consecutive pairs
    A = np.stack([2 * (x - np.roll(x, 1)), 2 * (y - np.roll(y, 1))], axis=1)
    rhs = (x**2 + y**2) - (np.roll(x, 1) ** 2 + np.roll(y, 1) ** 2)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    c = complex(sol[0], sol[1])
    for _ in range(2):  # Gauss-Newton polish on |p_i - c| = 1
        d = pts - c
        r = np.abs(d)
        J = np.stack([-d.real / r, -d.imag / r], axis=1)
        step, *_ = np.linalg.lstsq(J, 1.0 - r, rcond=None)
        c += complex(step[0], step[1])
    return c


def _point_in_polygon(c: complex, pts: np.ndarray, tol: float = 1e-7) -> bool:
    # winding number; points within tol of the boundary count as inside
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        ab = b - a
        t = np.clip(((c - a) / ab).real, 0.0, 1.0)
        if abs(a + t * ab - c) < tol:
            return True
    ang = 0.0
    for i in range(n):
        ang += cmath.phase((pts[(i + 1) % n] - c) / (pts[i] - c))
    return abs(ang) > math.pi


# ---------------------------------------------------------------------------
# Diamond graph


@dataclass
class TrainTrack:
    tid: int
    rhombi: tuple[int, ...]
    direction: complex          # common parallel, angle in [0, pi)
    crossed_edges: tuple[frozenset, ...]
    full_crossing: bool         # reaches the patch boundary on both ends


@dataclass
class DiamondPath:
    start: object
    end: object
    nodes: tuple
    steps: tuple[complex, ...]


class DiamondGraph:
    """Rhombus graph of a finite isoradial patch.

    Nodes are ``('p', vid)`` for primal vertices and ``('d', fid)`` for
    circumcenters.  Every face is a unit rhombus, every present G-edge the
    diagonal of exactly one of them.
    """

    def __init__(self, graph: IsoradialGraph):
        if graph.periodic is not None:
            raise ValueError("diamond-graph machinery is finite-patch only")
        self.graph = graph
        self.rhombi: list[Rhombus] = []
        self.edge_rhombus: dict[int, int] = {}
        self.node_pos: dict = {}
        self.adj: dict = defaultdict(dict)   # node -> {node: step unit vector}
        self._edge_sides: dict[frozenset, list[int]] = defaultdict(list)
        self._build()
        self._tracks: list[TrainTrack] | None = None
        self._track_of_edge: dict[frozenset, int] = {}
        self._components: dict[int, dict] = {}
        self._bfs_cache: dict = {}

    def _build(self):
        g = self.graph
        for vid in g.vertices:
            self.node_pos[("p", vid)] = g.pos(vid)
        for f in g.faces:
            self.node_pos[("d", f.fid)] = f.circumcenter
        for e in g.interior_edges:
            xa, xb = g.pos(e.a), g.pos(e.b)
            f0, f1 = e.faces
            t0, t1 = g.face_pos(f0), g.face_pos(f1)
            # t = ccw side of a->b
            if ((xb - xa) * (t0 - xa).conjugate()).imag < 0:
                tcc, ucc = (f0, t0), (f1, t1)
            else:
                tcc, ucc = (f1, t1), (f0, t0)
            sides = [abs(t0 - xa), abs(t1 - xa), abs(t0 - xb), abs(t1 - xb)]
            if max(abs(s - 1.0) for s in sides) > GEOM_TOL:
                raise NonIsoradialError(f"edge {e.eid}: rhombus sides not unit")
            th = g.edge_half_angle(e.eid)
            if not 0 < th < math.pi / 2:
                raise DegenerateRhombusError(f"edge {e.eid}: half-angle {th}")
            r = Rhombus(rid=len(self.rhombi), eid=e.eid,
                        x=(e.a[0], e.a[1]), y=(e.b[0], e.b[1]),
                        t=tcc[0], u=ucc[0], half_angle=th)
            self.rhombi.append(r)
            self.edge_rhombus[e.eid] = r.rid
            pa, pb = ("p", e.a[0]), ("p", e.b[0])
            pt, pu = ("d", tcc[0][0]), ("d", ucc[0][0])
            for m, n in ((pa, pt), (pt, pb), (pb, pu), (pu, pa)):
                step = unit(self.node_pos[n] - self.node_pos[m])
                self.adj[m][n] = step
                self.adj[n][m] = -step
                self._edge_sides[frozenset((m, n))].append(r.rid)

    # -- basic queries -------------------------------------------------------

    def rhombus_of_gedge(self, eid: int) -> Rhombus:
        return self.rhombi[self.edge_rhombus[eid]]

    def rhombus_corners(self, r: Rhombus):
        return (("p", r.x[0]), ("d", r.t[0]), ("p", r.y[0]), ("d", r.u[0]))

    def rhombus_diamond_edges(self, r: Rhombus):
        pa, pt, pb, pu = self.rhombus_corners(r)
        return [frozenset((pa, pt)), frozenset((pt, pb)),
                frozenset((pb, pu)), frozenset((pu, pa))]

    # -- train-tracks ---------------------------------------------------------

    def train_tracks(self) -> list[TrainTrack]:
        if self._tracks is not None:
            return self._tracks
        tracks = []
        seen_edges = set()
        for de in self._edge_sides:
            if de in seen_edges:
                continue
            edges = deque([de])
            rhombi = deque()
            closed = False
            # forward: repeatedly cross the unused adjacent rhombus
            prev, cur = None, de
            while True:
                nxt = [r for r in self._edge_sides[cur] if r != prev]
                if not nxt:
                    break
                r = nxt[0]
                opp = self._opposite_edge(r, cur)
                rhombi.append(r)
                edges.append(opp)
                if opp == de:
                    closed = True
                    break
                prev, cur = r, opp
            if not closed:
                # backward from the seed edge through its other rhombus
                prev = rhombi[0] if rhombi else None
                cur = de
                while True:
                    nxt = [r for r in self._edge_sides[cur] if r != prev]
                    if not nxt:
                        break
                    r = nxt[0]
                    opp = self._opposite_edge(r, cur)
                    rhombi.appendleft(r)
                    edges.appendleft(opp)
                    prev, cur = r, opp
            m, n = tuple(de)
            dvec = unit(self.node_pos[n] - self.node_pos[m])
            ph = cmath.phase(dvec)
            if not 0.0 <= ph < math.pi - 1e-12:
                dvec = -dvec
            ends_free = (len(self._edge_sides[edges[0]]) == 1
                         and len(self._edge_sides[edges[-1]]) == 1)
            t = TrainTrack(tid=len(tracks), rhombi=tuple(rhombi),
                           direction=dvec, crossed_edges=tuple(edges),
                           full_crossing=closed or ends_free)
            tracks.append(t)
            for ce in edges:
                seen_edges.add(ce)
                self._track_of_edge[ce] = t.tid
        self._tracks = tracks
        return tracks

    def _opposite_edge(self, rid: int, de: frozenset) -> frozenset:
        edges = self.rhombus_diamond_edges(self.rhombi[rid])
        i = edges.index(de)
        return edges[(i + 2) % 4]

    def track_of_diamond_edge(self, a, b) -> TrainTrack:
        self.train_tracks()
        return self._tracks[self._track_of_edge[frozenset((a, b))]]

    # -- separation -----------------------------------------------------------

    def _component_labels(self, tid: int) -> dict:
        if tid in self._components:
            return self._components[tid]
        track = self.train_tracks()[tid]
        # cutting the crossed (parallel) edges splits the two sides of the
        # strip; boundary vertices stay attached to their own side
        removed = set(track.crossed_edges)
        labels = {}
        cur = 0
        for start in self.adj:
            if start in labels:
                continue
            q = deque([start])
            labels[start] = cur
            while q:
                u = q.popleft()
                for v in self.adj[u]:
                    if v in labels or frozenset((u, v)) in removed:
                        continue
                    labels[v] = cur
                    q.append(v)
            cur += 1
        self._components[tid] = labels
        return labels

    def separates(self, track: TrainTrack, x, y) -> bool:
        """True iff deleting the track's rhombi disconnects x from y.

        On finite patches a track only counts as separating when it crosses
        the patch fully (boundary to boundary, or closed).
        """
        nx, ny = _as_primal(x), _as_primal(y)
        for n in (nx, ny):
            if n not in self.adj:
                raise NoPathError(f"{n} has no rhombus in this patch")
        if not track.full_crossing:
            return False
        labels = self._component_labels(track.tid)
        return labels[nx] != labels[ny]

    # -- minimal paths ----------------------------------------------------------

    def _bfs(self, src):
        if src in self._bfs_cache:
            return self._bfs_cache[src]
        parent = {src: None}
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in self.adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    q.append(v)
        self._bfs_cache[src] = (dist, parent)
        return dist, parent

    def minimal_path(self, x, y, verify: bool = True) -> DiamondPath:
        """Minimal diamond path from y to x (steps sum to x - y)."""
        nx, ny = _as_primal(x), _as_primal(y)
        if nx == ny:
            return DiamondPath(start=ny, end=nx, nodes=(ny,), steps=())
        dist, parent = self._bfs(ny)
        if nx not in dist:
            raise NoPathError(f"{x} and {y} are disconnected")
        nodes = [nx]
        while nodes[-1] != ny:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        steps = tuple(self.adj[nodes[i]][nodes[i + 1]] for i in range(len(nodes) - 1))
        path = DiamondPath(start=ny, end=nx, nodes=tuple(nodes), steps=steps)
        if verify:
            self._verify_minimal(path, nx, ny)
        return path

    def _verify_minimal(self, path: DiamondPath, nx, ny):
        tids = []
        for i in range(len(path.nodes) - 1):
            t = self.track_of_diamond_edge(path.nodes[i], path.nodes[i + 1])
            tids.append(t.tid)
            if not self.separates(t, nx, ny):
                raise NoPathError(
                    f"BFS path step {i} crosses a non-separating track; "
                    "vertices too close to the patch boundary")
        if len(set(tids)) != len(tids):
            raise NoPathError("BFS path reuses a train-track; not minimal")

    def separating_tracks(self, x, y) -> list[TrainTrack]:
        nx, ny = _as_primal(x), _as_primal(y)
        return [t for t in self.train_tracks() if self.separates(t, nx, ny)]

    # -- discrete exponential ----------------------------------------------------

    def discrete_exp(self, x, y, lam: complex) -> complex:
        """Exp_{x,y}(lambda), evaluated along a minimal path from y to x."""
        path = self.minimal_path(x, y, verify=False)
        return discrete_exp_steps(path.steps, lam)

    def interior_depth(self, vid: int) -> int:
        """G-graph distance from vertex vid to the nearest boundary vertex.

        A boundary vertex is one whose rhombus fan does not close up (angle
        sum < 2*pi), i.e. some adjacent face of the infinite graph is absent.
        """
        return self._interior_depths()[vid]

    def _interior_depths(self) -> dict[int, int]:
        if hasattr(self, "_depths"):
            return self._depths
        g = self.graph
        incident = defaultdict(float)
        gadj = defaultdict(set)
        for e in g.interior_edges:
            th = g.edge_half_angle(e.eid)
            incident[e.a[0]] += 2 * th
            incident[e.b[0]] += 2 * th
            gadj[e.a[0]].add(e.b[0])
            gadj[e.b[0]].add(e.a[0])
        boundary = [v for v in g.vertices
                    if abs(incident[v] - 2 * math.pi) > 1e-7]
        depths = {v: (0 if v in set(boundary) else None) for v in g.vertices}
        q = deque(boundary)
        while q:
            u = q.popleft()
            for v in gadj[u]:
                if depths[v] is None:
                    depths[v] = depths[u] + 1
                    q.append(v)
        for v, d in depths.items():
            if d is None:
                depths[v] = 10 ** 9
        self._depths = depths
        return depths


def _as_primal(x):
    if isinstance(x, tuple) and len(x) == 2 and x[0] in ("p", "d"):
        return x
    return ("p", int(x))


def discrete_exp_steps(steps, lam: complex) -> complex:
    """Product of (s + lambda)/(s - lambda) over unit step vectors s."""
    out = 1.0 + 0j
    for s in steps:
        d = s - lam
        if abs(d) < 1e-12:
            raise PoleHitError(f"lambda = {lam} sits on step direction {s}")
        out *= (s + lam) / d
    return out


def build_diamond(graph: IsoradialGraph) -> DiamondGraph:
    """Diamond (rhombus) graph of a finite isoradial patch."""
    return DiamondGraph(graph)
