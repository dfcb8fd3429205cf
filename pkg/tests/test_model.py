"""Hamiltonian assembly and observable definitions."""

import numpy as np
import pytest

from spincert import lattice, model, pauli
from spincert.model import ModelSpec


def test_bond_list_prefactor_and_j2():
    spec = ModelSpec(lattice.chain(6), j2=0.5)
    bonds = model.bond_list(spec)
    assert len(bonds) == 12
    assert all(w == 0.25 for _, _, w in bonds[:6])
    assert all(w == 0.125 for _, _, w in bonds[6:])
    assert len(model.bond_list(ModelSpec(lattice.chain(6)))) == 6


def test_hamiltonian_term_count_and_hermiticity():
    H = model.build_hamiltonian(ModelSpec(lattice.chain(6)))
    assert len(H) == 18
    assert H.is_hermitian()
    H2 = model.build_hamiltonian(ModelSpec(lattice.square(3), j2=0.3))
    assert H2.is_hermitian()
    assert len(H2) == 3 * 36


def test_two_site_chain_doubles_coupling():
    # literal double sum on N=2: the single bond is counted twice
    H = model.build_hamiltonian(ModelSpec(lattice.chain(2)))
    evals = np.linalg.eigvalsh(H.to_matrix(2))
    assert abs(evals[0] - (-1.5)) < 1e-12


def test_heisenberg_bond_structure():
    b = model.heisenberg_bond(0, 2, 0.5)
    assert len(b) == 3
    for key, coef in b.items():
        assert coef == 0.5
        assert key.sites == (0, 2)


def test_correlation_observable():
    spec = ModelSpec(lattice.chain(8))
    obs = model.correlation_observable(spec, 3)
    assert obs.label == "C(3)"
    ((key, coef),) = list(obs.poly.items())
    assert key == pauli.from_factors(((0, pauli.X), (3, pauli.X)))
    assert coef == 0.25
    with pytest.raises(ValueError):
        model.correlation_observable(spec, 8)  # wraps to zero displacement
    obs2 = model.correlation_observable(ModelSpec(lattice.square(3)), (1, 1), pauli.Z)
    assert obs2.label == "C(1,1)"


def test_hamiltonian_term_observable():
    spec = ModelSpec(lattice.chain(6), j2=0.4)
    oj1 = model.hamiltonian_term_observable(spec, "j1")
    # per-bond energy: weights 0.25 / 6 on every first-neighbour term
    assert all(abs(c - 0.25 / 6) < 1e-15 for _, c in oj1.poly.items())
    oj2 = model.hamiltonian_term_observable(spec, "j2")
    assert all(abs(c - 0.1 / 6) < 1e-15 for _, c in oj2.poly.items())
    with pytest.raises(ValueError):
        model.hamiltonian_term_observable(spec, "j3")
    with pytest.raises(ValueError):
        model.hamiltonian_term_observable(ModelSpec(lattice.chain(6)), "j2")


def test_observable_requires_hermitian():
    bad = pauli.PauliPolynomial.from_terms([(pauli.single(0, pauli.X), 1j)])
    with pytest.raises(ValueError):
        model.Observable("bad", bad)


def test_three_qubit_chain():
    H, bonds = model.three_qubit_chain()
    assert len(bonds) == 2
    assert H.allclose(bonds[0] + bonds[1])
    evals = np.linalg.eigvalsh(H.to_matrix(3))
    assert abs(evals[0] - (-4.0)) < 1e-12
