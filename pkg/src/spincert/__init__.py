"""Certified bounds for Heisenberg-type spin-1/2 lattice models.

The toolkit lower-bounds ground-state energies with symmetry-reduced
moment-matrix semidefinite relaxations, upper-bounds them with product
states and cluster decompositions, and sandwiches ground-state
observables between certified bounds via energy-window constraints.
Every SDP result ships with a rounding-robust certificate that remains
a true bound regardless of solver convergence.

Typical use:

    from spincert import basis, lattice, model, relaxation, sdp

    spec = model.ModelSpec(lattice.chain(10), j2=0.5)
    B = basis.build_basis(spec.lattice, basis.BasisParams(r=2, degree_cap=3))
    prob = relaxation.assemble_energy_problem(spec, B)
    res = sdp.solve(prob.to_conic())
    print(res.certified_bound)          # certified lower bound on E0

The `spincert` console script drives the same pipeline from JSON configs.
"""

from . import basis, cli, exact, lattice, model, pauli, relaxation, sdp
from .basis import BasisParams, build_basis
from .model import ModelSpec, Observable, correlation_observable
from .relaxation import (ReductionOptions, add_rdm_positivity,
                         assemble_energy_problem, assemble_observable_problem)
from .sdp import SolveOptions, certify_bound, export_interchange, \
    import_interchange, solve

__all__ = [
    "basis", "cli", "exact", "lattice", "model", "pauli", "relaxation",
    "sdp", "BasisParams", "build_basis", "ModelSpec", "Observable",
    "correlation_observable", "ReductionOptions", "add_rdm_positivity",
    "assemble_energy_problem", "assemble_observable_problem",
    "SolveOptions", "certify_bound", "export_interchange",
    "import_interchange", "solve",
]

__version__ = "0.1.0"
