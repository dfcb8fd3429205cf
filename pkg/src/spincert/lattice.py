"""Periodic chain and square-lattice geometry.

Sites are 0-based linear indices.  The square lattice stores site (i, j)
at index i * L + j (row-major); labels in rendered output are 1-based.
All boundaries are periodic.  Open boundaries appear only inside the
cluster Hamiltonians used for rigorous finite-size bounds (see exact.py).
"""

from __future__ import annotations

from dataclasses import dataclass

SiteId = int


@dataclass(frozen=True)
class Lattice:
    kind: str          # "chain" | "square"
    length: int        # N for the chain, L for the square lattice

    def __post_init__(self) -> None:
        if self.kind not in ("chain", "square"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if self.length < 2:
            raise ValueError("lattice length must be at least 2")

    @property
    def n_sites(self) -> int:
        return self.length if self.kind == "chain" else self.length ** 2

    def coords(self, site: SiteId) -> tuple[int, ...]:
        if self.kind == "chain":
            return (site,)
        return divmod(site, self.length)

    def site_at(self, *coords: int) -> SiteId:
        L = self.length
        if self.kind == "chain":
            return coords[0] % L
        i, j = coords
        return (i % L) * L + (j % L)

    def translate_site(self, site: SiteId, shift) -> SiteId:
        """Shift a site by a lattice vector (int for the chain, pair for
        the square lattice), wrapping periodically."""
        if self.kind == "chain":
            return (site + shift) % self.length
        i, j = self.coords(site)
        di, dj = shift
        return self.site_at(i + di, j + dj)

    def mirror_site(self, site: SiteId) -> SiteId:
        """Reflection across the main diagonal, (i, j) -> (j, i)."""
        if self.kind != "square":
            raise ValueError("mirror symmetry is defined for the square lattice only")
        i, j = self.coords(site)
        return self.site_at(j, i)

    def zero_shift(self):
        return 0 if self.kind == "chain" else (0, 0)


def chain(n: int) -> Lattice:
    return Lattice("chain", n)


def square(length: int) -> Lattice:
    return Lattice("square", length)


def translations(lat: Lattice) -> list:
    """The full translation group (identity included): N shifts for the
    chain, all L x L shifts for the square lattice."""
    if lat.kind == "chain":
        return list(range(lat.length))
    L = lat.length
    return [(di, dj) for di in range(L) for dj in range(L)]


def row_translations(lat: Lattice) -> list:
    """Shifts along the single axis used for circulant blocking: all N
    for the chain, the L first-coordinate shifts for the square."""
    if lat.kind == "chain":
        return list(range(lat.length))
    return [(di, 0) for di in range(lat.length)]


def unit_row_shift(lat: Lattice):
    return 1 if lat.kind == "chain" else (1, 0)


def neighbor_pairs(lat: Lattice, which: str) -> list[tuple[SiteId, SiteId]]:
    """Ordered coupling list as emitted by the literal Hamiltonian sums.

    Every site contributes its forward bonds, so small lattices can list
    the same undirected edge twice (chain N=2 first neighbours, square
    L=2); the doubled coupling is intentional and is summed, not
    deduplicated, when the Hamiltonian is built.
    """
    if which not in ("first", "second"):
        raise ValueError(f"unknown neighbor class {which!r}")
    pairs: list[tuple[SiteId, SiteId]] = []
    if lat.kind == "chain":
        step = 1 if which == "first" else 2
        for i in range(lat.length):
            pairs.append((i, lat.translate_site(i, step)))
    else:
        shifts = [(1, 0), (0, 1)] if which == "first" else [(1, 1), (1, -1)]
        for site in range(lat.n_sites):
            for shift in shifts:
                pairs.append((site, lat.translate_site(site, shift)))
    return pairs
