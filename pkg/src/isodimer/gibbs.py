"""Gibbs probabilities of edge sets via Pfaffians, and brute-force oracles.

The probability that edges {x_i y_i} all belong to a random dimer
configuration is (prod K_{x_i,y_i}) Pf(t(K^-1) restricted to
(x_1,y_1,...,x_k,y_k)), rows and columns in exactly that order.  Closed forms
for the four single-edge probabilities anchor the conventions.

The enumeration oracle counts weighted perfect matchings directly
(branch-and-bound on a lowest-degree vertex) and never touches Kasteleyn
machinery, so it independently checks signs and normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NoPerfectMatchingError,
    NotAMatchingFragmentError,
    OddOrderError,
    OutOfRangeError,
    OutOfRangeProbabilityError,
    TooLargeError,
)
from .fisher import FisherGraph
from .localinverse import LocalInverseEngine


def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of a real antisymmetric matrix (Parlett-Reid, partial pivoting)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise OddOrderError("matrix not square")
    if n % 2:
        raise OddOrderError("Pfaffian needs even order")
    if np.max(np.abs(A + A.T)) > 1e-13 * max(1.0, np.max(np.abs(A))):
        raise ValueError("matrix not antisymmetric")
    if n == 0:
        return 1.0
    A = A.copy()
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if A[kp, k] == 0.0:
            return 0.0
        if kp != k + 1:
            A[[k + 1, kp]] = A[[kp, k + 1]]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1])
            A[k + 2:, k + 2:] -= np.outer(A[k + 2:, k + 1], tau)
    return pf


def pfaffian_reference(A: np.ndarray) -> float:
    """O(n!!) expansion along the first row; small matrices only."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n % 2:
        raise OddOrderError("Pfaffian needs even order")
    if n == 0:
        return 1.0
    if n == 2:
        return A[0, 1]
    out = 0.0
    rest = list(range(1, n))
    for idx, j in enumerate(rest):
        sub = [r for r in rest if r != j]
        minor = A[np.ix_(sub, sub)]
        out += (-1) ** idx * A[0, j] * pfaffian_reference(minor)
    return out


# ---------------------------------------------------------------------------
# cylinder probabilities


@dataclass
class CylinderResult:
    probability: float
    valid: bool
    antisymmetry_defect: float


def cylinder_probability(engine: LocalInverseEngine, edges,
                         clamp_tol: float = 1e-10) -> CylinderResult:
    """P(e_1, ..., e_k) for vertex-disjoint Fisher edges (x_i, y_i)."""
    verts = []
    for x, y in edges:
        verts.extend((x, y))
    if len(set(verts)) != len(verts):
        raise NotAMatchingFragmentError("edge endpoints not pairwise distinct")
    prod = 1.0
    for x, y in edges:
        kxy = engine.K.entry(x, y)
        if kxy == 0.0:
            raise NotAMatchingFragmentError(f"({x},{y}) is not a Fisher edge")
        prod *= kxy
    m = len(verts)
    M = np.zeros((m, m))
    for r in range(m):
        for c in range(r + 1, m):
            M[r, c] = engine.inverse_value(verts[c], verts[r])  # transpose
            M[c, r] = engine.inverse_value(verts[r], verts[c])
    defect = float(np.max(np.abs(M + M.T)))
    skew = (M - M.T) / 2.0
    p = prod * pfaffian(skew)
    valid = -clamp_tol <= p <= 1.0 + clamp_tol
    if p > 1.0 + 1e-6 or p < -1e-6:
        raise OutOfRangeProbabilityError(f"probability {p} far outside [0,1]")
    return CylinderResult(probability=p, valid=valid, antisymmetry_defect=defect)


def edge_probability_closed_form(kind: str, theta: float | None = None) -> float:
    """Appendix closed forms for the four single-edge probabilities."""
    if kind == "wz_next":
        return 0.5
    if theta is None or not 0.0 < theta < math.pi / 2:
        raise OutOfRangeError(f"half-angle {theta} outside (0, pi/2)")
    t = (math.pi - 2 * theta) / (math.pi * math.cos(theta))
    if kind == "wz":
        return 0.25 + t / 4.0
    if kind == "wv_or_zv":
        return 0.25 - t / 4.0
    if kind == "vv":
        return 0.5 + t / 2.0
    raise OutOfRangeError(f"unknown edge kind {kind!r}")


def spin_same_sign_probability(phi: float) -> float:
    """Probability that the two dual spins across a rhombus of angle phi are both +."""
    if not 0.0 < phi < math.pi / 2:
        raise OutOfRangeError(f"dual angle {phi} outside (0, pi/2)")
    return 0.25 + phi / (2 * math.pi * math.sin(phi))


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class MatchingEnsemble:
    partition_function: float
    matchings: list[tuple[int, ...]] = field(repr=False)
    weights: list[float] = field(repr=False)
    edge_marginals: dict[int, float] = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.matchings)

    def marginal(self, eid: int) -> float:
        return self.edge_marginals.get(eid, 0.0) / self.partition_function

    def pair_marginal(self, e1: int, e2: int) -> float:
        z = sum(w for m, w in zip(self.matchings, self.weights)
                if e1 in m and e2 in m)
        return z / self.partition_function


def enumerate_matchings(fisher: FisherGraph, pinned_present=(), pinned_absent=(),
                        max_vertices: int = 40) -> MatchingEnsemble:
    """Exhaustive weighted perfect-matching enumeration (oracle)."""
    nV = len(fisher.verts)
    if nV > max_vertices:
        raise TooLargeError(f"{nV} vertices > budget {max_vertices}")
    if nV % 2:
        raise NoPerfectMatchingError("odd vertex count")
    pinned_present = set(pinned_present)
    pinned_absent = set(pinned_absent)
    adj = {i: [] for i in range(nV)}
    for e in fisher.edges:
        if e.eid in pinned_absent:
            continue
        adj[e.i].append(e)
        adj[e.j].append(e)

    matched = [False] * nV
    chosen: list[int] = []
    matchings: list[tuple[int, ...]] = []
    weights: list[float] = []

    for eid in pinned_present:
        e = fisher.edges[eid]
        if matched[e.i] or matched[e.j]:
            raise NotAMatchingFragmentError("pinned edges overlap")
        matched[e.i] = matched[e.j] = True
        chosen.append(eid)

    def recurse(weight: float):
        pick, deg = -1, 10 ** 9
        for v in range(nV):
            if matched[v]:
                continue
            d = sum(1 for e in adj[v] if not matched[e.i] and not matched[e.j])
            if d == 0:
                return
            if d < deg:
                pick, deg = v, d
        if pick == -1:
            matchings.append(tuple(sorted(chosen)))
            weights.append(weight)
            return
        for e in adj[pick]:
            if matched[e.i] or matched[e.j]:
                continue
            matched[e.i] = matched[e.j] = True
            chosen.append(e.eid)
            recurse(weight * e.weight)
            chosen.pop()
            matched[e.i] = matched[e.j] = False

    w0 = 1.0
    for eid in pinned_present:
        w0 *= fisher.edges[eid].weight
    recurse(w0)
    if not matchings:
        raise NoPerfectMatchingError("no perfect matching extends the pins")
    Z = math.fsum(weights)
    marg: dict[int, float] = {}
    for m, w in zip(matchings, weights):
        for eid in m:
            marg[eid] = marg.get(eid, 0.0) + w
    return MatchingEnsemble(partition_function=Z, matchings=matchings,
                            weights=weights, edge_marginals=marg)


def ising_partition_bruteforce(n_vertices: int, edges, couplings) -> float:
    """Z^J by summation over all 2^n spin configurations."""
    if n_vertices > 22:
        raise TooLargeError("spin enumeration beyond 2^22")
    edges = list(edges)
    J = list(couplings)
    Z = 0.0
    for mask in range(1 << n_vertices):
        s = 0.0
        for (a, b), j in zip(edges, J):
            sa = 1 if (mask >> a) & 1 else -1
            sb = 1 if (mask >> b) & 1 else -1
            s += j * sa * sb
        Z += math.exp(s)
    return Z
