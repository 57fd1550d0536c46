"""Critical Z-invariant Ising model via dimers on isoradial graphs.

A library for the Fisher-dimer representation of the critical Z-invariant
Ising model: isoradial graphs and their rhombus (diamond) graphs, Fisher
decorations with Kasteleyn orientations, a local residue-calculus formula for
the inverse Kasteleyn matrix, Pfaffian edge-set probabilities with brute-force
oracles, and the periodic machinery (Fourier matrices, characteristic
polynomials, free energies, entropy).
"""

from .builders import (
    honeycomb_patch,
    honeycomb_torus_cell,
    quasi_patch,
    quasi_patch_from_angles,
    square_patch,
    square_torus_cell,
    triangular_patch,
    triangular_torus_cell,
)
from .fisher import (
    AngleField,
    FisherGraph,
    KasteleynMatrix,
    KasteleynOrientation,
    assign_angles,
    decorate,
    kasteleyn_orient,
)
from .geometry import (
    DiamondGraph,
    IsoradialGraph,
    build_diamond,
    critical_coupling,
    critical_dimer_weight,
)
from .gibbs import (
    cylinder_probability,
    edge_probability_closed_form,
    enumerate_matchings,
    pfaffian,
    spin_same_sign_probability,
)
from .localinverse import LocalInverseEngine
from .spectral import (
    PeriodicCell,
    builtin_cell,
    entropy_dimer,
    fourier_inverse_entry,
    free_energy_dimer,
    free_energy_integral,
    free_energy_ising,
    lobachevsky,
)

__version__ = "1.0.0"

__all__ = [s for s in dir() if not s.startswith("_")]
