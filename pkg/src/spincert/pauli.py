"""Exact symbolic algebra of multi-site Pauli operators.

A Pauli string is a scalar prefactor i^k (k = 0..3, stored as the exponent,
never as a float) times an ordered product of single-site Pauli factors with
strictly increasing site indices and at most one factor per site.  Products,
adjoints and symmetry actions stay in this normal form, so equality of
operators is equality of the data.  Polynomials are sparse maps from
phase-free strings to complex coefficients.

Sites are 0-based integers throughout; rendering adds the conventional
1-based labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

X, Y, Z = 0, 1, 2
AXES = (X, Y, Z)
AXIS_NAMES = "XYZ"

# sigma^a sigma^b on one site: resulting axis (None = identity) and the
# accumulated power of i.  sigma^x sigma^y = i sigma^z and cyclic; the
# reversed order picks up i^3.
_PROD_AXIS = {
    (X, X): None, (Y, Y): None, (Z, Z): None,
    (X, Y): Z, (Y, Z): X, (Z, X): Y,
    (Y, X): Z, (Z, Y): X, (X, Z): Y,
}
_PROD_PHASE = {
    (X, X): 0, (Y, Y): 0, (Z, Z): 0,
    (X, Y): 1, (Y, Z): 1, (Z, X): 1,
    (Y, X): 3, (Z, Y): 3, (X, Z): 3,
}

PHASE_VALUES = (1 + 0j, 1j, -1 + 0j, -1j)

# named sign substitutions: value[a] is the sign picked up by sigma^a
SIGN_X = (-1, 1, 1)
SIGN_Y = (1, -1, 1)
SIGN_Z = (1, 1, -1)
SIGN_XY = (-1, -1, 1)
SIGN_YZ = (1, -1, -1)
SIGN_ZX = (-1, 1, -1)

_PAULI_MATRICES = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class PauliString:
    """i^phase times an ordered product of single-site Pauli factors."""

    phase: int = 0
    factors: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", self.phase % 4)
        sites = [s for s, _ in self.factors]
        if sites != sorted(set(sites)):
            raise ValueError("factors must have strictly increasing sites")

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)

    def is_identity(self) -> bool:
        return not self.factors

    def monomial(self) -> "PauliString":
        """The phase-free part, used as a moment-variable key."""
        if self.phase == 0:
            return self
        return PauliString(0, self.factors)

    def phase_value(self) -> complex:
        return PHASE_VALUES[self.phase]

    def __str__(self) -> str:
        return render(self)

    def __lt__(self, other: "PauliString") -> bool:
        return (self.factors, self.phase) < (other.factors, other.phase)


def identity() -> PauliString:
    return PauliString(0, ())


def single(site: int, axis: int) -> PauliString:
    return PauliString(0, ((site, axis),))


def from_factors(pairs: Iterable[tuple[int, int]], phase: int = 0) -> PauliString:
    """Build a string from (site, axis) pairs in any order, multiplying
    out repeated sites."""
    out = PauliString(phase % 4, ())
    for site, axis in pairs:
        out = multiply(out, single(site, axis))
    return out


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Operator product a * b in normal form."""
    phase = a.phase + b.phase
    fa, fb = a.factors, b.factors
    ia, ib = 0, 0
    out: list[tuple[int, int]] = []
    while ia < len(fa) and ib < len(fb):
        sa, xa = fa[ia]
        sb, xb = fb[ib]
        if sa < sb:
            out.append(fa[ia])
            ia += 1
        elif sb < sa:
            out.append(fb[ib])
            ib += 1
        else:
            axis = _PROD_AXIS[(xa, xb)]
            phase += _PROD_PHASE[(xa, xb)]
            if axis is not None:
                out.append((sa, axis))
            ia += 1
            ib += 1
    out.extend(fa[ia:])
    out.extend(fb[ib:])
    return PauliString(phase % 4, tuple(out))


def adjoint(a: PauliString) -> PauliString:
    """Hermitian adjoint; factors are self-adjoint and commute across
    distinct sites, so only the prefactor conjugates."""
    return PauliString((-a.phase) % 4, a.factors)


def act_sign(signs: tuple[int, int, int], a: PauliString) -> PauliString:
    """Apply the sign substitution sigma^a -> signs[a] * sigma^a."""
    flips = sum(1 for _, axis in a.factors if signs[axis] < 0)
    return PauliString((a.phase + 2 * (flips % 2)) % 4, a.factors)


def act_axis_permutation(perm: tuple[int, int, int], a: PauliString) -> PauliString:
    """Relabel axes by perm (axis a -> perm[a]); sites are untouched."""
    return PauliString(a.phase, tuple((s, perm[ax]) for s, ax in a.factors))


def permute_sites(site_map: Sequence[int] | Callable[[int], int], a: PauliString) -> PauliString:
    """Relabel sites by a bijection; distinct-site factors commute, so
    re-sorting costs no phase."""
    if callable(site_map):
        moved = [(site_map(s), ax) for s, ax in a.factors]
    else:
        moved = [(site_map[s], ax) for s, ax in a.factors]
    moved.sort()
    return PauliString(a.phase, tuple(moved))


def act_translation(lattice, shift, a: PauliString) -> PauliString:
    return permute_sites(lambda s: lattice.translate_site(s, shift), a)


def act_mirror(lattice, a: PauliString) -> PauliString:
    return permute_sites(lattice.mirror_site, a)


def render(a: PauliString, lattice=None) -> str:
    """Human-readable form like ``(+i) X1 Y3 Z7`` (2D: ``X(1,2)``)."""
    prefix = {0: "(+1)", 1: "(+i)", 2: "(-1)", 3: "(-i)"}[a.phase]
    if a.is_identity():
        return prefix + " I"
    parts = []
    for site, axis in a.factors:
        if lattice is not None and getattr(lattice, "kind", "chain") == "square":
            i, j = lattice.coords(site)
            parts.append(f"{AXIS_NAMES[axis]}({i + 1},{j + 1})")
        else:
            parts.append(f"{AXIS_NAMES[axis]}{site + 1}")
    return prefix + " " + " ".join(parts)


def dense_action(a: PauliString, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrix-free action on the 2^n computational basis (site s = bit s).

    Returns (src, vals) with (A psi)[r] = vals[r] * psi[src[r]].
    """
    if a.factors and a.factors[-1][0] >= n_sites:
        raise ValueError("string touches a site outside the register")
    mask_x = 0
    mask_zy = 0
    n_y = 0
    for site, axis in a.factors:
        if axis in (X, Y):
            mask_x |= 1 << site
        if axis in (Y, Z):
            mask_zy |= 1 << site
        if axis == Y:
            n_y += 1
    dim = 1 << n_sites
    rows = np.arange(dim, dtype=np.uint64)
    src = rows ^ np.uint64(mask_x)
    parity = np.bitwise_count(src & np.uint64(mask_zy)) & np.uint64(1)
    vals = np.where(parity == 1, -1.0 + 0j, 1.0 + 0j)
    vals = vals * PHASE_VALUES[(a.phase + n_y) % 4]
    return src.astype(np.intp), vals


def to_matrix(a: PauliString, n_sites: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix; equals kron(sigma_{n-1}, ..., sigma_0)."""
    src, vals = dense_action(a, n_sites)
    dim = 1 << n_sites
    mat = np.zeros((dim, dim), dtype=complex)
    mat[np.arange(dim), src] = vals
    return mat


class PauliPolynomial:
    """Sparse complex-linear combination of phase-free Pauli strings."""

    tol = 1e-12

    def __init__(self, terms: dict[PauliString, complex] | None = None):
        self.terms: dict[PauliString, complex] = {}
        if terms:
            for key, coef in terms.items():
                self._accumulate(key, coef)

    def _accumulate(self, key: PauliString, coef: complex) -> None:
        coef = complex(coef) * key.phase_value()
        key = key.monomial()
        new = self.terms.get(key, 0j) + coef
        if abs(new) <= self.tol:
            self.terms.pop(key, None)
        else:
            self.terms[key] = new

    @classmethod
    def from_terms(cls, pairs: Iterable[tuple[PauliString, complex]]) -> "PauliPolynomial":
        out = cls()
        for key, coef in pairs:
            out._accumulate(key, coef)
        return out

    def items(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def copy(self) -> "PauliPolynomial":
        out = PauliPolynomial()
        out.terms = dict(self.terms)
        return out

    def __add__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        out = self.copy()
        for key, coef in other.terms.items():
            out._accumulate(key, coef)
        return out

    def __sub__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliPolynomial":
        return (-1.0) * self

    def __mul__(self, scalar: complex) -> "PauliPolynomial":
        out = PauliPolynomial()
        for key, coef in self.terms.items():
            out._accumulate(key, coef * scalar)
        return out

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        out = PauliPolynomial()
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                out._accumulate(multiply(ka, kb), ca * cb)
        return out

    def adjoint(self) -> "PauliPolynomial":
        out = PauliPolynomial()
        for key, coef in self.terms.items():
            out._accumulate(key, np.conj(coef))
        return out

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        # keys are self-adjoint monomials, so hermiticity is realness
        return all(abs(coef.imag) <= tol for coef in self.terms.values())

    def apply(self, action: Callable[[PauliString], PauliString]) -> "PauliPolynomial":
        """Map every monomial through a string action, folding any phase
        the action produces into the coefficient."""
        out = PauliPolynomial()
        for key, coef in self.terms.items():
            out._accumulate(action(key), coef)
        return out

    def allclose(self, other: "PauliPolynomial", tol: float = 1e-10) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(
            abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) <= tol for k in keys
        )

    def to_matrix(self, n_sites: int) -> np.ndarray:
        dim = 1 << n_sites
        mat = np.zeros((dim, dim), dtype=complex)
        rows = np.arange(dim)
        for key, coef in self.terms.items():
            src, vals = dense_action(key, n_sites)
            mat[rows, src] += coef * vals
        return mat

    def matvec(self, psi: np.ndarray, n_sites: int) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for key, coef in self.terms.items():
            src, vals = dense_action(key, n_sites)
            out += (coef * vals) * psi[src]
        return out

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{coef:.6g} * {key}" for key, coef in sorted(self.terms.items(), key=lambda kv: kv[0].factors))
