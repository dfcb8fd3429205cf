"""Heisenberg-type Hamiltonians and the observables we certify.

The Hamiltonian convention is

    H = (1/4) * sum_{bonds} J_bond * sum_a sigma_i^a sigma_j^a,

with J = 1 on first-neighbour bonds and J = j2 on second-neighbour
bonds, periodic boundaries, and the bond lists taken literally from the
double sums (so tiny lattices carry doubled couplings, see lattice.py).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import pauli
from .lattice import Lattice, neighbor_pairs
from .pauli import AXES, PauliPolynomial, PauliString, from_factors


@dataclass(frozen=True)
class ModelSpec:
    lattice: Lattice
    j2: float = 0.0
    prefactor: float = 0.25

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites


@dataclass(frozen=True)
class Observable:
    """A Hermitian polynomial together with a reporting label."""

    label: str
    poly: PauliPolynomial = field(compare=False)

    def __post_init__(self) -> None:
        if not self.poly.is_hermitian():
            raise ValueError(f"observable {self.label!r} is not Hermitian")


def bond_list(spec: ModelSpec) -> list[tuple[int, int, float]]:
    """All couplings as (site, site, weight) with the 1/4 prefactor folded in."""
    bonds = [(i, j, spec.prefactor) for i, j in neighbor_pairs(spec.lattice, "first")]
    if spec.j2 != 0.0:
        bonds += [
            (i, j, spec.prefactor * spec.j2)
            for i, j in neighbor_pairs(spec.lattice, "second")
        ]
    return bonds


def heisenberg_bond(i: int, j: int, weight: float = 1.0) -> PauliPolynomial:
    """weight * sum_a sigma_i^a sigma_j^a."""
    return PauliPolynomial.from_terms(
        (from_factors(((i, a), (j, a))), weight) for a in AXES
    )


def build_hamiltonian(spec: ModelSpec) -> PauliPolynomial:
    out = PauliPolynomial()
    for i, j, w in bond_list(spec):
        out = out + heisenberg_bond(i, j, w)
    return out


def correlation_observable(spec: ModelSpec, displacement, axis: int = pauli.X) -> Observable:
    """(1/4) sigma_0^a sigma_d^a for a single reference pair.

    Translation symmetry of the relaxation makes the reference site
    immaterial; the zero displacement is rejected because the product
    would collapse to a constant.
    """
    lat = spec.lattice
    site = lat.translate_site(0, displacement)
    if site == 0:
        raise ValueError("zero displacement does not define a correlation")
    poly = PauliPolynomial.from_terms([(from_factors(((0, axis), (site, axis))), 0.25)])
    if lat.kind == "chain":
        label = f"C({displacement})"
    else:
        label = f"C({displacement[0]},{displacement[1]})"
    return Observable(label, poly)


def hamiltonian_term_observable(spec: ModelSpec, which: str) -> Observable:
    """The J1 (or J2) part of H divided by its bond count: the per-bond
    energy, equal to 3*C1 (resp. 3*C2) under the axis symmetry."""
    if which not in ("j1", "j2"):
        raise ValueError(f"unknown Hamiltonian part {which!r}")
    pairs = neighbor_pairs(spec.lattice, "first" if which == "j1" else "second")
    weight = spec.prefactor if which == "j1" else spec.prefactor * spec.j2
    if which == "j2" and spec.j2 == 0.0:
        raise ValueError("model has no second-neighbour part")
    out = PauliPolynomial()
    for i, j in pairs:
        out = out + heisenberg_bond(i, j, weight / len(pairs))
    return Observable(f"H_{which}/bond", out)


def three_qubit_chain() -> tuple[PauliPolynomial, list[PauliPolynomial]]:
    """The textbook three-qubit example H = s1.s2 + s2.s3 (open ends,
    unit coupling).  Returns the Hamiltonian and its two bond terms."""
    bonds = [heisenberg_bond(0, 1), heisenberg_bond(1, 2)]
    return bonds[0] + bonds[1], bonds
