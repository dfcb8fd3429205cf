"""Monomial bases for the moment-matrix relaxation.

A basis is organised as translation families: each family is the orbit
of a representative monomial under shifts along the blocking axis (the
chain direction, or the first coordinate of the square lattice), listed
slot by slot.  Families are grouped by sign signature so the moment
matrix splits into blocks, and orbits are kept at full length L even
when the pattern is periodic (the repeated slots simply reference the
same moment variables), which keeps every circulant sub-block L x L.

Families whose monomial sets coincide (wrap-around at distance N/2,
small-lattice aliasing of the offset window) are emitted once.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import lattice as _lattice
from .lattice import Lattice, unit_row_shift
from .pauli import (AXES, AXIS_NAMES, PauliString, X, Y, Z, act_translation,
                    from_factors, identity, render)

SIGNATURES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def signature(m: PauliString) -> tuple[int, int]:
    """Character of a monomial under the two-axis sign flips: the pair
    ((-1)^(#x + #y), (-1)^(#y + #z))."""
    nx = sum(1 for _, a in m.factors if a == X)
    ny = sum(1 for _, a in m.factors if a == Y)
    nz = sum(1 for _, a in m.factors if a == Z)
    return ((-1) ** ((nx + ny) % 2), (-1) ** ((ny + nz) % 2))


@dataclass(frozen=True)
class BasisParams:
    r: int = 3                  # max two-body distance (chain) or offset window (square)
    degree_cap: int = 4         # 3 or 4
    variant: str = "standard"   # standard | frustrated | square | square_no_deg4

    def __post_init__(self) -> None:
        if self.degree_cap not in (3, 4):
            raise ValueError("degree_cap must be 3 or 4")
        if self.variant not in ("standard", "frustrated", "square", "square_no_deg4"):
            raise ValueError(f"unknown basis variant {self.variant!r}")
        if self.r < 1:
            raise ValueError("r must be positive")


@dataclass
class BasisFamily:
    signature: tuple[int, int]
    label: str
    slots: list[PauliString]    # T^k rep for k = 0..L-1 along the blocking axis

    @property
    def rep(self) -> PauliString:
        return self.slots[0]


@dataclass
class MonomialBasis:
    lattice: Lattice
    params: BasisParams
    families: list[BasisFamily]
    monomials: list[PauliString] = field(default_factory=list)
    index: dict[PauliString, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.monomials:
            self.monomials.append(identity())
            for fam in self.families:
                for m in fam.slots:
                    if m not in self.index and not m.is_identity():
                        self.index[m] = len(self.monomials)
                        self.monomials.append(m)
            self.index[identity()] = 0

    @property
    def size(self) -> int:
        return len(self.monomials)

    def signature_groups(self) -> dict[tuple[int, int], list[int]]:
        """Family indices per signature, in basis order."""
        groups: dict[tuple[int, int], list[int]] = {s: [] for s in SIGNATURES}
        for idx, fam in enumerate(self.families):
            groups[fam.signature].append(idx)
        return groups

    def family_counts(self) -> dict[tuple[int, int], int]:
        return {s: len(v) for s, v in self.signature_groups().items()}


def _pattern_monomial(lat: Lattice, anchor, offsets, axes) -> PauliString | None:
    """Instantiate a pattern at an anchor; None if sites collide (offset
    aliasing on a small lattice degrades the pattern)."""
    sites = [lat.translate_site(anchor, off) for off in offsets]
    if len(set(sites)) != len(sites):
        return None
    return from_factors(zip(sites, axes))


def _build_families(lat: Lattice, patterns, dedup: bool) -> list[BasisFamily]:
    """Turn (label, anchor, offsets, axes) patterns into orbit families.

    Two families are either disjoint or carry the same monomial set; the
    latter happens at wrap-around distances.  Coinciding families are
    kept (they pad the circulant blocks to a uniform size) unless dedup
    is requested, which the aliasing-prone small square lattices use.
    """
    shift = unit_row_shift(lat)
    L = lat.length
    seen: list[frozenset] = []
    families: list[BasisFamily] = []
    for label, anchor, offsets, axes in patterns:
        rep = _pattern_monomial(lat, anchor, offsets, axes)
        if rep is None:
            continue
        slots = [rep]
        for _ in range(L - 1):
            slots.append(act_translation(lat, shift, slots[-1]))
        mset = frozenset(slots)
        dup = False
        for other in seen:
            if mset == other:
                dup = True
                break
            if mset & other:
                raise AssertionError(f"families partially overlap at {label}")
        if dup and dedup:
            continue
        if not dup:
            seen.append(mset)
        families.append(BasisFamily(signature(rep), label, slots))
    order = {s: k for k, s in enumerate(SIGNATURES)}
    families.sort(key=lambda f: order[f.signature])
    return families


def chain_basis(lat: Lattice, params: BasisParams) -> MonomialBasis:
    """Chain basis: identity, singles, pairs up to distance r, and the
    degree-3/4 contiguous windows (the frustrated variant replaces the
    contiguous triple by the stride-2 triple living on one sublattice)."""
    if lat.kind != "chain":
        raise ValueError("chain_basis needs a chain lattice")
    if params.variant not in ("standard", "frustrated"):
        raise ValueError(f"variant {params.variant!r} is not a chain basis")
    n = lat.length
    if params.r > n // 2:
        raise ValueError(f"r={params.r} exceeds N/2={n // 2}")

    patterns = []
    for a in AXES:
        patterns.append((f"s{('xyz')[a]}", 0, (0,), (a,)))
    for j in range(1, params.r + 1):
        for a, b in itertools.product(AXES, repeat=2):
            patterns.append((f"p{j}", 0, (0, j), (a, b)))
    triple_offsets = (0, 2, 4) if params.variant == "frustrated" else (0, 1, 2)
    for axes in itertools.product(AXES, repeat=3):
        patterns.append(("t", 0, triple_offsets, axes))
    if params.degree_cap == 4:
        for axes in itertools.product(AXES, repeat=4):
            patterns.append(("q", 0, (0, 1, 2, 3), axes))
    return MonomialBasis(lat, params, _build_families(lat, patterns, dedup=False))


_SQUARE_TRIPLES = (
    ((0, 0), (0, 1), (1, 1)),
    ((0, 0), (0, 1), (-1, 1)),
    ((0, 0), (1, 0), (1, 1)),
    ((0, 0), (-1, 0), (-1, 1)),
    ((0, 0), (1, 0), (2, 0)),
    ((0, 0), (0, 1), (0, 2)),
)
_SQUARE_QUAD = ((0, 0), (1, 0), (0, 1), (1, 1))


def square_basis(lat: Lattice, params: BasisParams) -> MonomialBasis:
    """Square-lattice basis: identity, singles, pairs over the offset
    window r1, r2 in {-r..r}, six degree-3 shapes, and the plaquette
    (dropped by the square_no_deg4 variant).

    For L >= 2r + 1 the window never aliases; on smaller lattices
    colliding offsets are skipped and coinciding families deduplicated.
    """
    if lat.kind != "square":
        raise ValueError("square_basis needs a square lattice")
    if params.variant not in ("square", "square_no_deg4"):
        raise ValueError(f"variant {params.variant!r} is not a square basis")
    L = lat.length
    w = params.r

    patterns = []
    for j in range(L):
        anchor = lat.site_at(0, j)
        for a in AXES:
            patterns.append((f"s{('xyz')[a]}", anchor, ((0, 0),), (a,)))
    # positive half of the offset window; (v, a, b) and (-v, b, a) name
    # the same family
    offsets = [
        (r1, r2)
        for r1 in range(-w, w + 1)
        for r2 in range(-w, w + 1)
        if (r1, r2) > (0, 0)
    ]
    for j in range(L):
        anchor = lat.site_at(0, j)
        for v in offsets:
            for a, b in itertools.product(AXES, repeat=2):
                patterns.append((f"p({v[0]},{v[1]})", anchor, ((0, 0), v), (a, b)))
    for j in range(L):
        anchor = lat.site_at(0, j)
        for shape in _SQUARE_TRIPLES:
            for axes in itertools.product(AXES, repeat=3):
                patterns.append(("t", anchor, shape, axes))
    if params.degree_cap == 4 and params.variant == "square":
        for j in range(L):
            anchor = lat.site_at(0, j)
            for axes in itertools.product(AXES, repeat=4):
                patterns.append(("q", anchor, _SQUARE_QUAD, axes))
    return MonomialBasis(lat, params, _build_families(lat, patterns, dedup=True))


def build_basis(lat: Lattice, params: BasisParams) -> MonomialBasis:
    if params.variant in ("standard", "frustrated"):
        return chain_basis(lat, params)
    return square_basis(lat, params)


def dump_basis(b: MonomialBasis, path) -> None:
    """One slot per line in the textual monomial rendering, with the
    family annotations in front; the generator is deterministic, so the
    dump doubles as a stable artifact for audit diffs."""
    p = b.params
    lines = [
        "# basis v1",
        f"lattice {b.lattice.kind} {b.lattice.length}",
        f"params r={p.r} degree_cap={p.degree_cap} variant={p.variant}",
    ]
    for fam in b.families:
        sig = f"{fam.signature[0]:+d}{fam.signature[1]:+d}"
        for k, m in enumerate(fam.slots):
            lines.append(f"{sig} {fam.label} {k} {render(m, b.lattice)}")
    Path(path).write_text("\n".join(lines) + "\n")


_AXIS_BY_NAME = {name: axis for axis, name in enumerate(AXIS_NAMES)}
_FACTOR_1D = re.compile(r"([XYZ])(\d+)$")
_FACTOR_2D = re.compile(r"([XYZ])\((\d+),(\d+)\)$")


def _parse_rendered(text: str, lat: Lattice) -> PauliString:
    phase, *parts = text.split()
    if phase != "(+1)":
        raise ValueError(f"basis monomials are phase-free, got {text!r}")
    if parts == ["I"]:
        return identity()
    factors = []
    for part in parts:
        if lat.kind == "square":
            m = _FACTOR_2D.match(part)
            site = lat.site_at(int(m.group(2)) - 1, int(m.group(3)) - 1)
        else:
            m = _FACTOR_1D.match(part)
            site = int(m.group(2)) - 1
        factors.append((site, _AXIS_BY_NAME[m.group(1)]))
    return from_factors(factors)


def load_basis(path) -> MonomialBasis:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "# basis v1":
        raise ValueError("not a basis dump")
    kind, length = lines[1].split()[1:]
    lat = _lattice.chain(int(length)) if kind == "chain" else _lattice.square(int(length))
    fields = dict(kv.split("=") for kv in lines[2].split()[1:])
    params = BasisParams(r=int(fields["r"]), degree_cap=int(fields["degree_cap"]),
                         variant=fields["variant"])
    families: list[BasisFamily] = []
    for line in lines[3:]:
        sig_text, label, slot, rest = line.split(" ", 3)
        sig = (int(sig_text[:2]), int(sig_text[2:]))
        m = _parse_rendered(rest, lat)
        if int(slot) == 0:
            families.append(BasisFamily(sig, label, [m]))
        else:
            families[-1].slots.append(m)
    return MonomialBasis(lat, params, families)


def all_monomials(n_sites: int, degree_cap: int) -> list[PauliString]:
    """Every monomial of degree <= degree_cap on n_sites, identity first.
    Used for unstructured models where no lattice symmetry applies."""
    out = [identity()]
    for deg in range(1, degree_cap + 1):
        for sites in itertools.combinations(range(n_sites), deg):
            for axes in itertools.product(AXES, repeat=deg):
                out.append(from_factors(zip(sites, axes)))
    return out
