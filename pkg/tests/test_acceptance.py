"""Acceptance gate: one test per criterion, pinned tolerances.

Each test prints a single summary line; run with -v for one pass/fail
line per criterion.  SDP iteration caps are tuned so every certified
bound reaches its stated tolerance inside the stated runtime on a
desktop-class machine; certificates stay valid at any cap.
"""

import itertools
import time

import numpy as np
import pytest

from spincert import basis, exact, lattice, model, pauli, relaxation, sdp
from spincert.basis import BasisParams, all_monomials, build_basis
from spincert.model import ModelSpec
from spincert.pauli import adjoint, multiply, to_matrix
from spincert.relaxation import (ReductionOptions, SymbolicBlock,
                                 add_rdm_positivity, assemble_energy_problem,
                                 assemble_observable_problem)
from spincert.sdp import (SolveOptions, complex_to_real, export_interchange,
                          import_interchange, solve)

# dense-diagonalization targets, per spin
N6_PER_SPIN = -0.467129
N10_PER_SPIN = -0.451545
MG_PER_SPIN = -0.375


def chain(n, j2=0.0):
    return ModelSpec(lattice.chain(n), j2=j2)


def chain_basis(spec, r, d):
    return build_basis(spec.lattice, BasisParams(r=r, degree_cap=d))


def square_basis(spec):
    return build_basis(spec.lattice,
                       BasisParams(r=1, degree_cap=3, variant="square"))


def ground(spec):
    return exact.ground_state(model.build_hamiltonian(spec), spec.n_sites)


def certified_energy(spec, B, max_iter=200_000, **kw):
    prob = assemble_energy_problem(spec, B)
    res = solve(prob.to_conic(), SolveOptions(max_iter=max_iter, **kw))
    return prob, res


def certified_interval_side(spec, B, obs, window, direction, max_iter):
    prob = assemble_observable_problem(spec, B, obs, window, direction)
    res = solve(prob.to_conic(), SolveOptions(max_iter=max_iter))
    return res.certified_bound if direction == "min" else -res.certified_bound


def test_criterion_01_three_qubit_pedagogical():
    t0 = time.perf_counter()
    H, bonds = model.three_qubit_chain()
    energy, _ = exact.ground_state(H, 3)
    anderson = exact.decomposition_bound(bonds, 3)
    product = exact.product_bound_for_bonds([(0, 1, 1.0), (1, 2, 1.0)], 3)

    rows = all_monomials(3, 3)
    opts = ReductionOptions(translations="off", axis_permutations=False,
                            mirror=False)
    reduced = assemble_energy_problem(H, rows, opts)
    res = solve(reduced.to_conic())
    fast = time.perf_counter() - t0

    raw = assemble_energy_problem(H, rows, ReductionOptions.all_off())
    res_raw = solve(raw.to_conic())

    print(f"criterion 1: ED {energy:.9f} anderson {anderson:.1f} "
          f"product {product:.9f} sdp {res.certified_bound:.9f} "
          f"raw {res_raw.certified_bound:.9f} ({fast:.2f}s)")
    assert abs(energy - (-4.0)) < 1e-6
    assert abs(anderson - (-6.0)) < 1e-6
    assert abs(product - (-2.0)) < 1e-6
    assert abs(res.certified_bound - (-4.0)) < 1e-6
    assert abs(res_raw.certified_bound - (-4.0)) < 1e-6
    assert fast < 1.0


def test_criterion_02_chain_per_spin_bounds():
    spec6 = chain(6)
    e6 = ground(spec6)[0] / 6
    _, res6 = certified_energy(spec6, chain_basis(spec6, 3, 4))
    bound6 = res6.certified_bound / 6
    gap6 = abs(bound6 - e6) / abs(e6)

    spec10 = chain(10)
    _, res10 = certified_energy(spec10, chain_basis(spec10, 3, 4),
                                max_iter=5000, check_every=200)
    bound10 = res10.certified_bound / 10

    print(f"criterion 2: N=6 bound {bound6:.8f} ED {e6:.8f} relgap {gap6:.2e} "
          f"({res6.wall_time:.0f}s); N=10 bound {bound10:.8f} "
          f"({res10.wall_time:.0f}s)")
    assert abs(e6 - N6_PER_SPIN) < 1e-6
    assert gap6 <= 1e-5
    assert res6.wall_time < 300
    assert abs(bound10 - N10_PER_SPIN) <= 1e-5
    assert res10.wall_time < 300


def test_criterion_03_majumdar_ghosh_point():
    spec = chain(8, j2=0.5)
    e_ps = ground(spec)[0] / 8
    _, res = certified_energy(spec, chain_basis(spec, 2, 3))
    bound = res.certified_bound / 8
    print(f"criterion 3: ED/spin {e_ps:.12f} bound/spin {bound:.9f}")
    assert abs(e_ps - MG_PER_SPIN) < 1e-10
    assert MG_PER_SPIN - 1e-4 <= bound <= MG_PER_SPIN


def test_criterion_04_sign_certification():
    t0 = time.perf_counter()
    checks = []
    for j2, cases in ((0.2, ((1, "max", "<0"), (2, "min", ">0"))),
                      (0.8, ((1, "max", "<0"), (2, "max", "<0")))):
        spec = chain(8, j2=j2)
        B = chain_basis(spec, 2, 3)
        energy, _ = ground(spec)
        window = (energy - 1e-6, energy + 1e-6)
        for d, direction, want in cases:
            obs = model.correlation_observable(spec, d)
            val = certified_interval_side(spec, B, obs, window, direction, 4000)
            checks.append((j2, d, direction, want, val))
    elapsed = time.perf_counter() - t0
    summary = "; ".join(f"J2={j2} C{d} {dr} {v:+.4f}{w}"
                        for j2, d, dr, w, v in checks)
    print(f"criterion 4: {summary} ({elapsed:.0f}s)")
    for j2, d, direction, want, val in checks:
        if want == "<0":
            assert val < 0.0, (j2, d, direction, val)
        else:
            assert val > 0.0, (j2, d, direction, val)
    assert elapsed < 600


def test_criterion_05_block_census():
    spec = chain(6)
    prob = assemble_energy_problem(spec, chain_basis(spec, 3, 4))
    census = prob.census()
    print(f"criterion 5: census {census}")
    assert census == {37: 1, 36: 5, 34: 18}


def test_criterion_06_reduction_soundness():
    spec = chain(6)
    B = chain_basis(spec, 1, 3)
    p_on = assemble_energy_problem(spec, B)
    r_on = solve(p_on.to_conic())
    p_off = assemble_energy_problem(spec, B, ReductionOptions.all_off())
    # the one-block unreduced problem splits faster on the primal side
    r_off = solve(p_off.to_conic(), SolveOptions(solve_side="primal"))
    diff = abs(r_on.primal_objective - r_off.primal_objective)
    print(f"criterion 6: ON {r_on.primal_objective:.10f} "
          f"OFF {r_off.primal_objective:.10f} diff {diff:.2e} "
          f"({r_on.wall_time:.0f}s + {r_off.wall_time:.0f}s)")
    assert r_on.status == "optimal" and r_off.status == "optimal"
    assert diff < 1e-6


def test_criterion_07_oracle_equivalence():
    # (a) symbolic Pauli algebra vs dense matrices, exhaustive on 3 sites
    monos = all_monomials(3, 3)
    dense = [to_matrix(m, 3) for m in monos]
    worst_mul = 0.0
    for (a, da), (b, db) in itertools.product(zip(monos, dense), repeat=2):
        prod = multiply(a, b)
        worst_mul = max(worst_mul, float(np.abs(
            to_matrix(prod.monomial(), 3) * prod.phase_value() - da @ db).max()))
    worst_adj = max(float(np.abs(to_matrix(adjoint(m), 3) - d.conj().T).max())
                    for m, d in zip(monos, dense))

    # (b) DFT diagonalization of random Hermitian block circulants
    rng = np.random.default_rng(3)
    worst_dft = 0.0
    for _ in range(100):
        F = int(rng.integers(1, 4))
        L = int(rng.choice([4, 5, 6, 8]))
        raw = rng.standard_normal((F, F, L)) + 1j * rng.standard_normal((F, F, L))
        M = np.zeros((F * L, F * L), dtype=complex)
        for p, q, i, j in itertools.product(range(F), range(F), range(L), range(L)):
            M[p * L + i, q * L + j] = raw[p, q, (j - i) % L]
        M = 0.5 * (M + M.conj().T)
        C = M.reshape(F, L, F, L)[:, 0, :, :]          # Hermitized first rows
        omega = np.exp(-2j * np.pi * np.arange(L) / L)
        freq = [sum(omega[k] ** d * C[:, :, d] for d in range(L)) for k in range(L)]
        got = np.sort(np.concatenate([np.linalg.eigvalsh(f) for f in freq]))
        want = np.sort(np.linalg.eigvalsh(M))
        worst_dft = max(worst_dft, float(np.abs(got - want).max()))

    # (c) complex SDPs through the real embedding vs eigenvalue bisection
    worst_sdp = 0.0
    tight = SolveOptions(eps_primal=1e-11, eps_dual=1e-11, eps_gap=1e-11,
                         max_iter=60_000)
    for _ in range(50):
        d = int(rng.integers(2, 6))
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        B0 = G @ G.conj().T / d + 0.1 * np.eye(d)
        B1 = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        B1 = 0.5 * (B1 + B1.conj().T)
        B1 -= np.trace(B1).real / d * np.eye(d)
        blk = SymbolicBlock(d, "rand", "moment")
        for r in range(d):
            for c in range(r, d):
                b0 = B0[r, c].real if r == c else B0[r, c]
                b1 = B1[r, c].real if r == c else B1[r, c]
                if b0 != 0:
                    blk.add(r, c, -1, b0)
                if b1 != 0:
                    blk.add(r, c, 0, b1)
        res = solve(complex_to_real([blk], np.array([1.0])), tight)

        lam = lambda x: float(np.linalg.eigvalsh(B0 + x * B1)[0])
        lo = -1.0
        while lam(lo) >= 0.0:
            lo *= 2.0
        hi = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if lam(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
        worst_sdp = max(worst_sdp, abs(res.primal_objective - hi))

    print(f"criterion 7: pauli {worst_mul:.1e}/{worst_adj:.1e} "
          f"dft {worst_dft:.1e} embedding {worst_sdp:.1e}")
    assert worst_mul < 1e-12 and worst_adj < 1e-12
    assert worst_dft < 1e-12
    assert worst_sdp < 1e-7


def test_criterion_08_soundness_sweep():
    grid = ([("chain", n, j2) for n in (4, 6, 8, 10)
             for j2 in (0.0, 0.2, 0.5)]
            + [("chain", 6, 0.8), ("chain", 8, 0.8)]
            + [("square", 2, j2) for j2 in (0.0, 0.2, 0.5, 0.8)]
            + [("square", 3, 0.0), ("square", 3, 0.2)])
    assert len(grid) == 20
    caps = {("chain", 4): 3000, ("chain", 6): 4000, ("chain", 8): 6000,
            ("chain", 10): 4000, ("square", 2): 6000, ("square", 3): 800}
    interval_points = {("chain", 4, 0.0), ("chain", 4, 0.5),
                       ("chain", 8, 0.2), ("chain", 8, 0.8)}

    t0 = time.perf_counter()
    n_intervals = 0
    for kind, size, j2 in grid:
        if kind == "chain":
            spec = chain(size, j2)
            B = chain_basis(spec, 2, 3)
        else:
            spec = ModelSpec(lattice.square(size), j2=j2)
            B = square_basis(spec)
        energy, state = ground(spec)
        _, res = certified_energy(spec, B, max_iter=caps[(kind, size)],
                                  check_every=200)
        assert res.certified_bound <= energy + 1e-7, (kind, size, j2)

        if (kind, size, j2) in interval_points:
            obs = model.correlation_observable(spec, 1)
            window = (energy - 1e-6, energy + 1e-6)
            lo = certified_interval_side(spec, B, obs, window, "min", 3000)
            hi = certified_interval_side(spec, B, obs, window, "max", 3000)
            target = exact.expectation(state, obs.poly)
            assert lo - 1e-9 <= target <= hi + 1e-9, (kind, size, j2, lo, target, hi)
            assert lo <= hi
            n_intervals += 1
    print(f"criterion 8: 20 energy bounds sound, {n_intervals} certified "
          f"intervals contain ED ({time.perf_counter()-t0:.0f}s)")
    assert n_intervals == len(interval_points)


def test_criterion_09_rdm_monotonicity():
    spec = chain(8)
    B = chain_basis(spec, 2, 3)
    base = assemble_energy_problem(spec, B)
    k2 = add_rdm_positivity(base, 2)
    k4 = add_rdm_positivity(k2, 4)
    opts = SolveOptions(max_iter=30_000, check_every=200)
    b0 = solve(base.to_conic(), opts).certified_bound
    b2 = solve(k2.to_conic(), opts).certified_bound
    b4 = solve(k4.to_conic(), opts).certified_bound
    energy, _ = ground(spec)
    print(f"criterion 9: plain {b0:.10f} k2 {b2:.10f} k4 {b4:.10f} ED {energy:.10f}")
    assert b0 <= energy + 1e-7
    assert b2 >= b0 - 1e-8
    assert b4 >= b2 - 1e-8


def test_criterion_10_interchange_round_trip(tmp_path):
    spec = chain(6)
    prob = assemble_energy_problem(spec, chain_basis(spec, 2, 3))
    conic = prob.to_conic()
    direct = solve(conic)

    path = tmp_path / "chain6.sdpa"
    export_interchange(conic, str(path))
    back = import_interchange(str(path))
    again = solve(back)

    d_obj = abs(direct.primal_objective - again.primal_objective)
    d_cert = abs(direct.certified_bound - again.certified_bound)
    print(f"criterion 10: obj diff {d_obj:.2e} cert diff {d_cert:.2e}")
    assert d_obj <= 1e-9
    assert d_cert <= 1e-9
