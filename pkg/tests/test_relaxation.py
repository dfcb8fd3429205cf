"""Moment-matrix assembly, symmetry reduction, and problem construction."""

import numpy as np
import pytest

from spincert import exact, lattice, model, pauli
from spincert.basis import BasisParams, MonomialBasis, all_monomials, build_basis
from spincert.model import ModelSpec
from spincert.pauli import PauliPolynomial, PauliString, X, Y, Z, from_factors, single
from spincert.relaxation import (IDENT, ZERO, InvalidReductionError, MomentIndex,
                                 ReductionOptions, add_rdm_positivity,
                                 assemble_energy_problem,
                                 assemble_observable_problem,
                                 block_diagonalize_translation,
                                 build_moment_matrix, split_sign_blocks)


def chain(n, j2=0.0):
    return ModelSpec(lattice.chain(n), j2)


def dense_eval(blk, x):
    """Hermitian matrix of a symbolic block at moment vector x."""
    A = np.zeros((blk.dim, blk.dim), dtype=complex)
    for r, c, v, cf in zip(blk.rows, blk.cols, blk.vars, blk.coefs):
        val = cf if v < 0 else cf * x[v]
        A[r, c] += val
        if r != c:
            A[c, r] += np.conj(val)
    return A


def ed_moments(index, state):
    """Ground-space averaged moments of every indexed monomial."""
    x = np.zeros(index.n_vars)
    for vid, rep in enumerate(index.var_reps):
        O = PauliPolynomial.from_terms([(rep, 1.0)])
        x[vid] = exact.expectation(state, O)
    return x


def test_resolve_identity_and_phase():
    idx = MomentIndex(2, None, ReductionOptions.all_off())
    code, coef = idx.resolve(pauli.identity())
    assert code == IDENT and coef == 1.0
    phased = PauliString(1, ((0, X),))
    code, coef = idx.resolve(phased)
    assert code >= 0 and coef == 1j


def test_resolve_unknown_without_create():
    idx = MomentIndex(2, None, ReductionOptions.all_off())
    with pytest.raises(InvalidReductionError):
        idx.resolve(single(0, X), create=False)
    idx.resolve(single(0, X))
    code, _ = idx.resolve(single(0, X), create=False)
    assert code == 0


def test_zero_variant_flags():
    idx = MomentIndex(6, lattice.chain(6), ReductionOptions())
    assert idx.resolve(single(0, Z))[0] == ZERO
    assert idx.resolve(from_factors(((0, X), (1, Y))))[0] == ZERO
    # sign-even but time-reversal odd: only the zero_variant rule kills it
    xyz = from_factors(((0, X), (1, Y), (2, Z)))
    assert idx.resolve(xyz)[0] == ZERO
    assert idx.resolve(from_factors(((0, X), (1, X))))[0] >= 0

    sign_only = MomentIndex(6, lattice.chain(6),
                            ReductionOptions(zero_variant=False))
    assert sign_only.resolve(single(0, Z))[0] == ZERO
    assert sign_only.resolve(xyz)[0] >= 0


def test_symmetry_identification():
    lat = lattice.chain(6)
    idx = MomentIndex(6, lat, ReductionOptions())
    a = from_factors(((0, X), (1, X)))
    b = pauli.act_translation(lat, 3, a)
    c = pauli.act_axis_permutation((1, 2, 0), a)
    assert idx.resolve(a)[0] == idx.resolve(b)[0] == idx.resolve(c)[0]

    plain = MomentIndex(6, lat, ReductionOptions.all_off())
    assert plain.resolve(a)[0] != plain.resolve(b)[0]


def test_two_by_two_flat_matrix():
    rows = [pauli.identity(), single(0, X)]
    M = build_moment_matrix(rows, opts=ReductionOptions.all_off())
    assert M.stage == "full" and len(M.parts) == 1
    blk = M.parts[0].block
    assert blk.dim == 2
    entries = {(r, c): (v, cf) for r, c, v, cf
               in zip(blk.rows, blk.cols, blk.vars, blk.coefs)}
    assert entries[(0, 0)] == (-1, 1.0)
    assert entries[(1, 1)] == (-1, 1.0)
    var, cf = entries[(0, 1)]
    assert var >= 0 and cf == 1.0


def test_split_rejects_resplit():
    B = build_basis(lattice.chain(6), BasisParams(r=2, degree_cap=3))
    M = build_moment_matrix(B, opts=ReductionOptions(), layout="padded",
                            materialize=False)
    S = split_sign_blocks(M)
    assert S.stage != "full"
    with pytest.raises(ValueError):
        split_sign_blocks(S)


def test_census_chain6_r3_d4():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=3, degree_cap=4))
    problem = assemble_energy_problem(spec, B)
    assert problem.census() == {37: 1, 36: 5, 34: 18}


def test_frequency_blocks_match_padded_eigenvalues():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=2, degree_cap=3))
    opts = ReductionOptions(validate_circulant=True)
    idx = MomentIndex(6, spec.lattice, opts)

    padded = build_moment_matrix(B, spec, opts, index=idx, layout="padded")
    blk_full = padded.parts[0].block
    freq = block_diagonalize_translation(split_sign_blocks(
        build_moment_matrix(B, spec, opts, index=idx, layout="padded",
                            materialize=False)))
    assert freq.stage == "frequency"

    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, idx.n_vars)
    big = np.linalg.eigvalsh(dense_eval(blk_full, x))
    small = np.concatenate([np.linalg.eigvalsh(dense_eval(p.block, x))
                            for p in freq.parts])
    assert big.shape == small.shape
    assert np.allclose(np.sort(big), np.sort(small), atol=1e-9)


def test_ground_state_moments_are_feasible():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=2, degree_cap=3))
    problem = assemble_energy_problem(spec, B)
    energy, state = exact.ground_state(model.build_hamiltonian(spec), 6)
    x = ed_moments(problem.index, state)
    assert np.all(np.abs(x) <= 1.0 + 1e-12)
    for blk in problem.blocks:
        evals = np.linalg.eigvalsh(dense_eval(blk, x))
        assert evals[0] > -1e-10, blk.label
    assert abs(problem.obj_const + problem.objective @ x - energy) < 1e-9


def test_observable_problem_window_and_sense():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=2, degree_cap=3))
    obs = model.correlation_observable(spec, 1)
    energy, state = exact.ground_state(model.build_hamiltonian(spec), 6)
    lo, hi = energy - 1e-3, energy + 1e-3

    pmin = assemble_observable_problem(spec, B, obs, (lo, hi), "min")
    pmax = assemble_observable_problem(spec, B, obs, (lo, hi), "max")
    assert pmin.sense == +1 and pmax.sense == -1
    assert np.allclose(pmax.objective, -pmin.objective)
    assert pmax.obj_const == -pmin.obj_const
    assert pmin.meta["window"] == [lo, hi]

    x = ed_moments(pmin.index, state)
    labels = {b.label: b for b in pmin.blocks}
    lo_val = dense_eval(labels["window_lo"], x)[0, 0].real
    hi_val = dense_eval(labels["window_hi"], x)[0, 0].real
    assert abs(lo_val - (energy - lo)) < 1e-9
    assert abs(hi_val - (hi - energy)) < 1e-9
    target = exact.expectation(state, obs.poly)
    assert abs(pmin.obj_const + pmin.objective @ x - target) < 1e-9


def test_observable_problem_validation():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=2, degree_cap=3))
    obs = model.correlation_observable(spec, 1)
    with pytest.raises(ValueError):
        assemble_observable_problem(spec, B, obs, (1.0, -1.0), "min")
    with pytest.raises(ValueError):
        assemble_observable_problem(spec, B, obs, (-1.0, 1.0), "both")


def test_unrepresentable_hamiltonian_term():
    # Z0Z1 never shows up among products of {1, X0, X1}
    H = PauliPolynomial.from_terms(
        [(from_factors(((0, Z), (1, Z))), 1.0)])
    rows = [pauli.identity(), single(0, X), single(1, X)]
    with pytest.raises(InvalidReductionError):
        assemble_energy_problem(H, rows, ReductionOptions.all_off())


def test_rdm_positivity_block():
    spec = chain(6)
    B = build_basis(spec.lattice, BasisParams(r=2, degree_cap=3))
    problem = assemble_energy_problem(spec, B)
    n_before = len(problem.blocks)

    p2 = add_rdm_positivity(problem, 2)
    assert len(problem.blocks) == n_before
    assert "rdm_blocks" not in problem.meta
    assert p2.meta["rdm_blocks"] == [2]
    added = p2.blocks[-1]
    assert added.kind == "rdm" and added.dim == 4

    _, state = exact.ground_state(model.build_hamiltonian(spec), 6)
    x = ed_moments(p2.index, state)
    rho = dense_eval(added, x)
    assert abs(np.trace(rho).real - 1.0) < 1e-9
    assert np.linalg.eigvalsh(rho)[0] > -1e-10

    with pytest.raises(ValueError):
        add_rdm_positivity(problem, 0)
    with pytest.raises(ValueError):
        add_rdm_positivity(problem, 11)
    with pytest.raises(ValueError):
        add_rdm_positivity(problem, 7)


def test_zero_variant_rejects_time_reversal_odd_model():
    H = PauliPolynomial.from_terms(
        [(from_factors(((0, X), (1, Y), (2, Z))), 1.0)])
    rows = all_monomials(3, 2)
    opts = ReductionOptions(translations="off", axis_permutations=False,
                            mirror=False)
    with pytest.raises(InvalidReductionError):
        assemble_energy_problem(H, rows, opts)


def test_translation_blocking_needs_lattice():
    H = PauliPolynomial.from_terms(
        [(from_factors(((0, X), (1, X))), 1.0)])
    rows = all_monomials(2, 2)
    with pytest.raises(InvalidReductionError):
        assemble_energy_problem(H, rows, ReductionOptions())
