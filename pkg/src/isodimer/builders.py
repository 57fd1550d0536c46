"""Built-in isoradial graphs: lattice patches, torus cells, quasi-periodic patches.

All lattices are normalized to unit circumradius.  ``square(theta)`` is the
rectangular lattice whose horizontal edges carry half-angle theta and vertical
edges pi/2 - theta; theta = pi/4 is the usual critical Z^2.  Patches are cut
from torus cells by instancing, which also yields the patch-to-cell vertex map
used to transport periodic data onto patches.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .geometry import IsoradialGraph, PeriodicBasis


def square_torus_cell(theta: float = math.pi / 4, n: int = 1) -> IsoradialGraph:
    b1 = complex(2 * math.cos(theta), 0.0)
    b2 = complex(0.0, 2 * math.sin(theta))
    vid = lambda i, j: i * n + j

    def vref(i, j):
        return (vid(i % n, j % n), (i // n, j // n))

    vertices = {vid(i, j): i * b1 + j * b2 for i in range(n) for j in range(n)}
    faces = [[vref(i, j), vref(i + 1, j), vref(i + 1, j + 1), vref(i, j + 1)]
             for i in range(n) for j in range(n)]
    return IsoradialGraph(vertices, faces, periodic=PeriodicBasis(n * b1, n * b2))


def triangular_torus_cell(n: int = 1) -> IsoradialGraph:
    b1 = complex(math.sqrt(3), 0.0)
    b2 = math.sqrt(3) * cmath.exp(1j * math.pi / 3)
    vid = lambda i, j: i * n + j

    def vref(i, j):
        return (vid(i % n, j % n), (i // n, j // n))

    vertices = {vid(i, j): i * b1 + j * b2 for i in range(n) for j in range(n)}
    faces = []
    for i in range(n):
        for j in range(n):
            faces.append([vref(i, j), vref(i + 1, j), vref(i, j + 1)])
            faces.append([vref(i + 1, j), vref(i + 1, j + 1), vref(i, j + 1)])
    return IsoradialGraph(vertices, faces, periodic=PeriodicBasis(n * b1, n * b2))


def honeycomb_torus_cell(n: int = 1) -> IsoradialGraph:
    b1 = math.sqrt(3) * cmath.exp(1j * math.pi / 3)
    b2 = math.sqrt(3) * cmath.exp(2j * math.pi / 3)
    vid = lambda i, j, s: 2 * (i * n + j) + s

    def vref(i, j, s):
        return (vid(i % n, j % n, s), (i // n, j // n))

    vertices = {}
    for i in range(n):
        for j in range(n):
            base = i * b1 + j * b2
            vertices[vid(i, j, 0)] = base
            vertices[vid(i, j, 1)] = base + 1j
    faces = []
    for i in range(n):
        for j in range(n):
            # hexagon counterclockwise around center i*b1 + j*b2 + e^{i pi/6}
            faces.append([vref(i + 1, j - 1, 1), vref(i + 1, j, 0), vref(i, j, 1),
                          vref(i, j, 0), vref(i, j - 1, 1), vref(i + 1, j - 1, 0)])
    return IsoradialGraph(vertices, faces, periodic=PeriodicBasis(n * b1, n * b2))


def patch_from_cell(cell: IsoradialGraph, radius: float, center: complex = 0j):
    """Finite disk patch cut from a periodic cell by instancing.

    Keeps every face whose circumcenter lies within ``radius`` of ``center``.
    Returns ``(patch, vmap)`` with ``vmap[patch_vid] = (cell_vid, (m, n))``.
    """
    b = cell.periodic
    if b is None:
        raise ValueError("patch_from_cell needs a periodic cell")
    B = np.array([[b.b1.real, b.b2.real], [b.b1.imag, b.b2.imag]])
    Binv = np.linalg.inv(B)
    reach = radius + 4.0
    M = int(math.ceil(reach * np.abs(Binv).sum(axis=1).max())) + 1

    vmap: dict[int, tuple[int, tuple[int, int]]] = {}
    vindex: dict[tuple[int, int, int], int] = {}
    vertices: dict[int, complex] = {}

    def get_vid(cvid, m, n):
        key = (cvid, m, n)
        if key not in vindex:
            new = len(vindex)
            vindex[key] = new
            vmap[new] = (cvid, (m, n))
            vertices[new] = cell.pos((cvid, (m, n)))
        return vindex[key]

    faces = []
    for m in range(-M, M + 1):
        for n in range(-M, M + 1):
            shift = b.shift((m, n))
            for f in cell.faces:
                c = f.circumcenter + shift
                if abs(c - center) > radius:
                    continue
                faces.append([get_vid(vid, m + s[0], n + s[1]) for vid, s in f.cycle])
    patch = IsoradialGraph(vertices, faces, epsilon=cell.epsilon)
    return patch, vmap


def square_patch(theta: float = math.pi / 4, radius: float = 6.0):
    return patch_from_cell(square_torus_cell(theta), radius)[0]


def triangular_patch(radius: float = 6.0):
    return patch_from_cell(triangular_torus_cell(), radius)[0]


def honeycomb_patch(radius: float = 6.0):
    return patch_from_cell(honeycomb_torus_cell(), radius)[0]


def quasi_patch(size: int = 8, seed: int = 0, spread: float = 0.45,
                epsilon: float = 0.05) -> IsoradialGraph:
    """Quasi-periodic rhombic patch from two crossing sequences of track angles.

    Two transverse track families with randomized directions a_k (near pi/2)
    and b_l (near 0) span a deformed grid of rhombi; primal vertices are the
    even-parity grid nodes, so the result is an isoradial graph with
    quadrilateral faces and half-angles in (pi/4 - spread, pi/4 + spread).
    """
    if spread >= math.pi / 4 - epsilon:
        raise ValueError("spread too large for the requested epsilon")
    rng = np.random.default_rng(seed)
    m = n = 2 * size
    a = math.pi / 2 + rng.uniform(-spread, spread, size=m)
    b = rng.uniform(-spread, spread, size=n)
    return quasi_patch_from_angles(a, b, epsilon=epsilon)


def quasi_patch_from_angles(a, b, epsilon: float = 0.05) -> IsoradialGraph:
    """Quasi-periodic patch with explicit track-angle sequences a (columns,
    near pi/2) and b (rows, near 0).

    Grid positions are prefix sums of the step vectors, so two patches whose
    sequences agree up to index i0 coincide exactly on the corresponding
    low-index region (used by the locality tests).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = len(a), len(b)
    A = np.exp(1j * a)
    B = np.exp(1j * b)
    cumA = np.concatenate([[0], np.cumsum(A)])
    cumB = np.concatenate([[0], np.cumsum(B)])

    def pos(i, j):
        return complex(cumA[i] + cumB[j])

    vid = lambda i, j: i * (n + 1) + j
    vertices = {}
    faces = []
    for i in range(1, m):
        for j in range(1, n):
            if (i + j) % 2 == 0:
                continue  # faces sit around odd-parity (dual) grid nodes
            corners = [(i - 1, j), (i, j - 1), (i + 1, j), (i, j + 1)]
            c = pos(i, j)
            corners.sort(key=lambda ij: cmath.phase(pos(*ij) - c))
            for ij in corners:
                vertices.setdefault(vid(*ij), pos(*ij))
            faces.append([vid(*ij) for ij in corners])
    return IsoradialGraph(vertices, faces, epsilon=epsilon)


BUILTIN_CELLS = {
    "z2": square_torus_cell,
    "triangular": triangular_torus_cell,
    "honeycomb": honeycomb_torus_cell,
}
