"""Ground-truth references: exact diagonalization of small systems plus
the two closed-form energy bounds used to frame the relaxation output.

The lower bound comes from overlapping open-boundary clusters: with the
couplings inside a K-site window divided by the number of windows a bond
belongs to, the windows sum back to the full Hamiltonian, so the
smallest cluster eigenvalue is a per-spin lower bound for the periodic
system.  The upper bound is a mean-field minimum over product states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import model
from .model import ModelSpec
from .pauli import PauliPolynomial

DENSE_LIMIT = 14
ITERATIVE_LIMIT = 20
AUTO_DENSE_LIMIT = 10
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class DenseState:
    """Orthonormal basis of the lowest eigenspace of a 2^n operator."""

    n_sites: int
    energy: float
    vectors: np.ndarray

    def __post_init__(self) -> None:
        dim = 2**self.n_sites
        if self.vectors.ndim != 2 or self.vectors.shape[0] != dim:
            raise ValueError("state vectors must be (2^n, multiplicity)")
        norms = np.linalg.norm(self.vectors, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("state columns must be unit norm")

    @property
    def amplitudes(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def degeneracy(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class EnergyWindow:
    """Certified interval [lower, upper] known to contain the ground energy."""

    lower: float
    upper: float
    lower_source: str = ""
    upper_source: str = ""

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"inverted window [{self.lower}, {self.upper}]")


def _require_sites(op: PauliPolynomial, n_sites: int) -> None:
    for key, _ in op.items():
        if key.sites and key.sites[-1] >= n_sites:
            raise ValueError(
                f"operator acts on site {key.sites[-1]} but the state has {n_sites}"
            )


def ground_state(
    H: PauliPolynomial, n_sites: int, mode: str = "auto"
) -> tuple[float, DenseState]:
    """Lowest eigenvalue of H with an orthonormal basis of its eigenspace.

    Dense mode diagonalizes the full 2^n matrix (n <= 14); iterative mode
    runs a matrix-free Lanczos extremal-eigenpair solve (n <= 20) and
    resolves degeneracies only up to the requested pair count.
    """
    if mode not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown diagonalization mode {mode!r}")
    if mode == "auto":
        mode = "dense" if n_sites <= AUTO_DENSE_LIMIT else "iterative"
    limit = DENSE_LIMIT if mode == "dense" else ITERATIVE_LIMIT
    if not 1 <= n_sites <= limit:
        raise ValueError(f"{mode} mode supports 1..{limit} sites, got {n_sites}")
    _require_sites(H, n_sites)
    dim = 2**n_sites
    if mode == "dense":
        mat = H.to_matrix(n_sites)
        if np.max(np.abs(mat.imag)) < 1e-12:
            evals, evecs = np.linalg.eigh(mat.real)
        else:
            evals, evecs = np.linalg.eigh(mat)
    else:
        op = spla.LinearOperator(
            (dim, dim), matvec=lambda v: H.matvec(v, n_sites), dtype=complex
        )
        # fixed start vector keeps repeated runs bit-identical
        v0 = np.random.default_rng(7).standard_normal(dim)
        k = min(6, dim - 1)
        evals, evecs = spla.eigsh(op, k=k, which="SA", v0=v0, tol=0)
    cut = evals[0] + DEGENERACY_TOL * max(1.0, abs(evals[0]))
    g = int(np.searchsorted(evals, cut, side="right"))
    energy = float(evals[0])
    return energy, DenseState(n_sites, energy, np.ascontiguousarray(evecs[:, :g]))


def expectation(state: DenseState, O: PauliPolynomial) -> float:
    """Ground-space average (1/g) sum_i <psi_i|O|psi_i>.

    Averaging over the orthonormal eigenspace basis equals tr(P O)/g, so
    the value is basis independent and keeps lattice symmetries that
    individual degenerate eigenvectors may break.
    """
    if not O.is_hermitian():
        raise ValueError("expectation requires a Hermitian operator")
    _require_sites(O, state.n_sites)
    total = 0.0 + 0.0j
    for col in state.vectors.T:
        total += np.vdot(col, O.matvec(col, state.n_sites))
    value = total / state.degeneracy
    assert abs(value.imag) < 1e-10
    return float(value.real)


def _chain_cluster(spec: ModelSpec, K: int) -> PauliPolynomial:
    parts = [(1, spec.prefactor)]
    if spec.j2 != 0.0:
        parts.append((2, spec.prefactor * spec.j2))
    longest = max(r for r, _ in parts)
    if K < longest + 1:
        raise ValueError(f"cluster of {K} sites is shorter than a range-{longest} coupling")
    out = PauliPolynomial()
    for rng, w in parts:
        # each range-r bond lies in K-r of the N windows of K sites
        for i in range(K - rng):
            out = out + model.heisenberg_bond(i, i + rng, w / (K - rng))
    return out


def _square_cluster(spec: ModelSpec, K: int) -> PauliPolynomial:
    k = math.isqrt(K)
    if k * k != K or k < 2:
        raise ValueError(f"square clusters must hold k*k >= 4 sites, got {K}")
    w1 = spec.prefactor / (k * (k - 1))
    w2 = spec.prefactor * spec.j2 / (k - 1) ** 2
    out = PauliPolynomial()
    for x in range(k):
        for y in range(k):
            here = x * k + y
            if x + 1 < k:
                out = out + model.heisenberg_bond(here, here + k, w1)
            if y + 1 < k:
                out = out + model.heisenberg_bond(here, here + 1, w1)
            if spec.j2 != 0.0 and x + 1 < k and y + 1 < k:
                out = out + model.heisenberg_bond(here, here + k + 1, w2)
                out = out + model.heisenberg_bond(here + k, here + 1, w2)
    return out


def anderson_bound(spec: ModelSpec, K: int) -> float:
    """Per-spin lower bound from a reweighted K-site open cluster.

    Tiling the periodic lattice with every translate of the cluster and
    dividing each coupling by its window multiplicity reproduces H
    exactly, hence E/N >= lambda_min(cluster).
    """
    if K > spec.n_sites:
        raise ValueError(f"cluster of {K} sites exceeds the {spec.n_sites}-site lattice")
    if spec.lattice.kind == "chain":
        cluster = _chain_cluster(spec, K)
    else:
        cluster = _square_cluster(spec, K)
    energy, _ = ground_state(cluster, K)
    return energy


def decomposition_bound(terms, n_sites: int) -> float:
    """Sum of smallest eigenvalues of the given Hamiltonian terms: the
    crudest cluster bound, with every term bounded independently."""
    if n_sites > DENSE_LIMIT:
        raise ValueError(f"dense term diagonalization capped at {DENSE_LIMIT} sites")
    total = 0.0
    for term in terms:
        evals = np.linalg.eigvalsh(term.to_matrix(n_sites))
        total += float(evals[0])
    return total


def _bloch_descent(bonds, n_sites: int, parity, restarts: int, seed: int) -> float:
    """Minimize sum_b w_b n_i.n_j over unit Bloch vectors.

    Site updates align against the local field, so each pass is exact
    coordinate minimization and the energy is monotone; any fixed point
    evaluates a genuine product state, hence always an upper bound.
    """
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n_sites)]
    for i, j, w in bonds:
        adjacency[i].append((j, w))
        adjacency[j].append((i, w))
    rng = np.random.default_rng(seed)
    best = math.inf
    for trial in range(restarts):
        if trial == 0:
            vecs = np.zeros((n_sites, 3))
            vecs[:, 2] = [1.0 if parity(i) else -1.0 for i in range(n_sites)]
        else:
            vecs = rng.standard_normal((n_sites, 3))
            vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        prev = math.inf
        for _ in range(300):
            for i in range(n_sites):
                field = np.zeros(3)
                for j, w in adjacency[i]:
                    field += w * vecs[j]
                norm = np.linalg.norm(field)
                if norm > 1e-14:
                    vecs[i] = -field / norm
            energy = sum(w * float(vecs[i] @ vecs[j]) for i, j, w in bonds)
            if prev - energy < 1e-13:
                break
            prev = energy
        best = min(best, energy)
    return best


def product_state_upper_bound(spec: ModelSpec, restarts: int = 8, seed: int = 0) -> float:
    """Best product-state energy found: a variational upper bound."""
    lat = spec.lattice

    def parity(site: int) -> bool:
        return sum(lat.coords(site)) % 2 == 0

    return _bloch_descent(model.bond_list(spec), spec.n_sites, parity, restarts, seed)


def product_bound_for_bonds(bonds, n_sites: int, restarts: int = 8, seed: int = 0) -> float:
    """Product-state upper bound for an explicit (i, j, weight) bond list."""
    return _bloch_descent(bonds, n_sites, lambda i: i % 2 == 0, restarts, seed)
