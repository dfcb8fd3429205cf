"""Symbolic moment-matrix relaxations with exact symmetry reduction.

The moment matrix over a monomial list B has entries [M]_{vw} = <v† w>,
is PSD for every quantum state, and min tr(H_M M) over PSD completions
lower-bounds the ground energy.  Each entry reduces to a single phase
times a phase-free Pauli monomial, so the matrix is linear in a real
moment vector x with |x_i| <= 1.

Reductions applied here, each exact for Hamiltonians with the matching
invariance (verified before use):

* sign blocks: the pi-rotation group about the three axes splits B into
  four signature sectors with vanishing cross moments;
* zero variant: rotations plus time reversal force <m> = 0 unless the
  per-axis Pauli counts are all even (a strictly larger kill set);
* translations: monomial families are orbits under the blocking-axis
  shift, padded to full length, making sub-blocks circulant; conjugating
  by the unitary DFT splits each sector into L frequency blocks;
* axis permutations and the square-lattice mirror identify variables via
  a canonical orbit representative (lexicographically smallest image).

Products of a Hermitian observable with the resulting moment variables
stay linear, so an energy window E_lo <= <H> <= E_hi enters as two
scalar blocks and certified two-sided observable bounds come from the
same machinery.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import product as iter_product

import numpy as np

from . import pauli
from .basis import SIGNATURES, BasisFamily, MonomialBasis, signature
from .lattice import Lattice
from .lattice import translations as lattice_translations
from .model import ModelSpec, build_hamiltonian
from .pauli import PauliPolynomial, PauliString

IDENT = -2
ZERO = -1

_AXIS_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
_ROT_X = pauli.SIGN_YZ      # pi rotation about x negates sigma^y, sigma^z
_ROT_Y = pauli.SIGN_ZX
_ROT_Z = pauli.SIGN_XY


class InvalidReductionError(ValueError):
    """A requested reduction does not hold for the model at hand."""


@dataclass(frozen=True)
class ReductionOptions:
    sign_blocks: bool = True
    zero_variant: bool = True
    translations: str = "blocks"        # "off" | "identify" | "blocks"
    axis_permutations: bool = True
    mirror: bool = True
    validate_circulant: bool = False

    def __post_init__(self) -> None:
        if self.translations not in ("off", "identify", "blocks"):
            raise ValueError(f"unknown translations mode {self.translations!r}")

    @classmethod
    def all_off(cls) -> "ReductionOptions":
        return cls(sign_blocks=False, zero_variant=False, translations="off",
                   axis_permutations=False, mirror=False)


class MomentIndex:
    """Canonical variable table for phase-free Pauli monomials.

    resolve() maps any monomial to IDENT, to ZERO (forced to vanish by
    the enabled sign rules), or to the variable id of its orbit
    representative under the enabled symmetry group.  The zero flag wins
    over orbit identification: a variant monomial never gets an id.
    """

    def __init__(self, n_sites: int, lattice: Lattice | None,
                 opts: ReductionOptions):
        self.n_sites = n_sites
        self.lattice = lattice
        self.opts = opts
        self.var_reps: list[PauliString] = []
        self._table: dict[tuple, int] = {}
        self._memo: dict[tuple, object] = {}
        self._site_maps = self._build_site_maps()
        self._perms = _AXIS_PERMS if opts.axis_permutations else (_AXIS_PERMS[0],)

    def _build_site_maps(self) -> list[tuple[int, ...]]:
        lat, opts = self.lattice, self.opts
        ident = tuple(range(self.n_sites))
        maps = [ident]
        if lat is not None and opts.translations != "off":
            maps = []
            for shift in lattice_translations(lat):
                maps.append(tuple(lat.translate_site(s, shift)
                                  for s in range(self.n_sites)))
        if lat is not None and lat.kind == "square" and opts.mirror:
            mirror = tuple(lat.mirror_site(s) for s in range(self.n_sites))
            maps = maps + [tuple(mirror[s] for s in smap) for smap in maps]
        return maps

    @property
    def n_vars(self) -> int:
        return len(self.var_reps)

    def _zero_flagged(self, factors: tuple) -> bool:
        counts = [0, 0, 0]
        for _, a in factors:
            counts[a] += 1
        if self.opts.zero_variant:
            return bool(counts[0] % 2 or counts[1] % 2 or counts[2] % 2)
        if self.opts.sign_blocks:
            return ((-1) ** (counts[0] + counts[1]),
                    (-1) ** (counts[1] + counts[2])) != (1, 1)
        return False

    def _canonical(self, factors: tuple) -> tuple | None:
        cached = self._memo.get(factors, 0)
        if cached != 0:
            return cached
        if self._zero_flagged(factors):
            self._memo[factors] = None
            return None
        best = None
        for smap in self._site_maps:
            moved = sorted((smap[s], a) for s, a in factors)
            for perm in self._perms:
                cand = tuple((s, perm[a]) for s, a in moved)
                if best is None or cand < best:
                    best = cand
        self._memo[factors] = best
        return best

    def resolve(self, u: PauliString, create: bool = True) -> tuple[int, complex]:
        """Return (code, coefficient) with code in {IDENT, ZERO, var id}
        such that <u> = coefficient * (1 | 0 | x_code)."""
        if not u.factors:
            return IDENT, u.phase_value()
        rep = self._canonical(u.factors)
        if rep is None:
            return ZERO, 0.0
        vid = self._table.get(rep)
        if vid is None:
            if not create:
                raise InvalidReductionError(
                    f"monomial {pauli.render(u.monomial())} has no moment variable")
            vid = len(self.var_reps)
            self._table[rep] = vid
            self.var_reps.append(PauliString(0, rep))
        return vid, u.phase_value()

    def linear_form(self, poly: PauliPolynomial, create: bool = False
                    ) -> tuple[float, dict[int, float]]:
        """<poly> as const + sum_i h_i x_i; requires real coefficients."""
        const = 0.0
        lin: dict[int, float] = {}
        for m, c in poly.items():
            code, coef = self.resolve(m, create=create)
            val = complex(c) * coef
            if abs(val.imag) > 1e-10:
                raise ValueError("linear form of a non-Hermitian polynomial")
            if code == ZERO:
                continue
            if code == IDENT:
                const += val.real
            else:
                lin[code] = lin.get(code, 0.0) + val.real
        return const, lin


@dataclass
class SymbolicBlock:
    """One Hermitian PSD block, entries stored for the upper triangle as
    parallel (row, col, var, coef) lists; var -1 marks a constant."""
    dim: int
    label: str
    kind: str                       # "moment" | "rdm" | "window"
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vars: list[int] = field(default_factory=list)
    coefs: list[complex] = field(default_factory=list)

    def add(self, r: int, c: int, var: int, coef: complex) -> None:
        if coef == 0:
            return
        if r > c:
            raise ValueError("store upper-triangle entries only")
        self.rows.append(r)
        self.cols.append(c)
        self.vars.append(var)
        self.coefs.append(coef)

    def add_resolved(self, r: int, c: int, code: int, coef: complex) -> None:
        if code == ZERO:
            return
        self.add(r, c, -1 if code == IDENT else code, coef)


@dataclass
class MatrixPart:
    label: str
    signature: tuple[int, int] | None
    rows: list[PauliString] | None            # flat row monomials
    families: list[BasisFamily] | None        # orbit structure (padded layout)
    has_identity: bool
    block: SymbolicBlock | None


@dataclass
class SymbolicMomentMatrix:
    index: MomentIndex
    parts: list[MatrixPart]
    lattice: Lattice | None
    stage: str                                # "full" | "sign_split" | "frequency"


def _flat_block(rows: list[PauliString], index: MomentIndex, label: str) -> SymbolicBlock:
    blk = SymbolicBlock(len(rows), label, "moment")
    for r, v in enumerate(rows):
        for c in range(r, len(rows)):
            prod = pauli.multiply(v, rows[c])
            code, coef = index.resolve(prod)
            if r == c and code != IDENT:
                raise AssertionError("diagonal moment entry is not <1>")
            blk.add_resolved(r, c, code, coef)
    return blk


def _signature_sorted(rows: list[PauliString]) -> bool:
    seen: list[tuple[int, int]] = []
    for m in rows:
        if m.is_identity():
            continue
        sig = signature(m)
        if seen and seen[-1] == sig:
            continue
        if sig in seen:
            return False
        seen.append(sig)
    return True


def build_moment_matrix(basis, model=None, opts: ReductionOptions | None = None,
                        index: MomentIndex | None = None, layout: str = "flat",
                        materialize: bool = True) -> SymbolicMomentMatrix:
    """Single-part symbolic moment matrix over a basis.

    ``basis`` is a MonomialBasis or a plain monomial list; ``layout``
    selects flat (deduplicated) or padded (orbit slots, circulant-ready)
    rows.  Entries are computed via exact Pauli multiplication with
    moment replacement and symmetry identification per ``opts``.
    """
    lattice = None
    if isinstance(basis, MonomialBasis):
        lattice = basis.lattice
    elif isinstance(model, ModelSpec):
        lattice = model.lattice
    if opts is None:
        opts = ReductionOptions() if lattice is not None else ReductionOptions.all_off()
    n_sites = lattice.n_sites if lattice is not None else _max_site(basis, model) + 1
    if index is None:
        index = MomentIndex(n_sites, lattice, opts)

    families = None
    if layout == "padded":
        if not isinstance(basis, MonomialBasis):
            raise ValueError("padded layout needs a structured MonomialBasis")
        families = basis.families
        rows = [pauli.identity()]
        for fam in families:
            rows.extend(fam.slots)
    elif layout == "flat":
        if isinstance(basis, MonomialBasis):
            rows = list(basis.monomials)
        else:
            order = {s: k for k, s in enumerate(SIGNATURES)}
            rest = sorted((m for m in basis if not m.is_identity()),
                          key=lambda m: (order[signature(m)], m.factors))
            rows = [pauli.identity()] + rest
    else:
        raise ValueError(f"unknown layout {layout!r}")

    block = _flat_block(rows, index, "moment") if materialize else None
    part = MatrixPart("full", None, rows, families, True, block)
    return SymbolicMomentMatrix(index, [part], lattice, "full")


def _max_site(basis, model) -> int:
    hi = 0
    items = basis.monomials if isinstance(basis, MonomialBasis) else basis
    for m in items:
        if m.factors:
            hi = max(hi, m.sites[-1])
    if isinstance(model, PauliPolynomial):
        for m, _ in model.items():
            if m.factors:
                hi = max(hi, m.sites[-1])
    return hi


def split_sign_blocks(M: SymbolicMomentMatrix) -> SymbolicMomentMatrix:
    """Split into one part per signature; cross entries must be absent
    (their moments are sign-variant and resolve to zero)."""
    if M.stage != "full" or len(M.parts) != 1:
        raise ValueError("split_sign_blocks expects an unsplit matrix")
    src = M.parts[0]
    parts: list[MatrixPart] = []
    if src.families is not None and src.block is None:
        for sig in SIGNATURES:
            fams = [f for f in src.families if f.signature == sig]
            if not fams:
                continue
            parts.append(MatrixPart(_sig_label(sig), sig, None, fams,
                                    sig == (1, 1), None))
    else:
        rows = src.rows
        if not _signature_sorted(rows):
            raise InvalidReductionError("basis rows are not signature-sorted")
        of_sig = {s: [] for s in SIGNATURES}
        for i, m in enumerate(rows):
            of_sig[(1, 1) if m.is_identity() else signature(m)].append(i)
        row_part = {}
        for sig in SIGNATURES:
            for local, i in enumerate(of_sig[sig]):
                row_part[i] = (sig, local)
        blocks = {s: SymbolicBlock(len(of_sig[s]), _sig_label(s), "moment")
                  for s in SIGNATURES if of_sig[s]}
        for r, c, v, z in zip(src.block.rows, src.block.cols,
                              src.block.vars, src.block.coefs):
            (sr, lr), (sc, lc) = row_part[r], row_part[c]
            if sr != sc:
                raise InvalidReductionError(
                    f"nonzero cross-signature entry at ({r}, {c})")
            blocks[sr].add(lr, lc, v, z)
        for sig in SIGNATURES:
            if of_sig[sig]:
                parts.append(MatrixPart(_sig_label(sig), sig,
                                        [rows[i] for i in of_sig[sig]],
                                        None, 0 in of_sig[sig], blocks[sig]))
    return SymbolicMomentMatrix(M.index, parts, M.lattice, "sign_split")


def _sig_label(sig: tuple[int, int]) -> str:
    return f"sig({sig[0]:+d},{sig[1]:+d})"


def _first_row(index: MomentIndex, fam_p: BasisFamily, fam_q: BasisFamily
               ) -> list[tuple[int, int]]:
    """(code, phase exponent) of <rep_p . T^d rep_q> for d = 0..L-1."""
    out = []
    for slot in fam_q.slots:
        prod = pauli.multiply(fam_p.rep, slot)
        code, _ = index.resolve(prod)
        out.append((code, prod.phase))
    return out


def _validate_circulant(index: MomentIndex, fams: list[BasisFamily],
                        first: dict) -> None:
    L = len(fams[0].slots)
    for p in range(len(fams)):
        for q in range(p, len(fams)):
            for i in range(L):
                for j in range(L):
                    prod = pauli.multiply(fams[p].slots[i], fams[q].slots[j])
                    code, _ = index.resolve(prod)
                    exp_code, exp_phase = first[(p, q)][(j - i) % L]
                    if (code, prod.phase) != (exp_code, exp_phase):
                        raise InvalidReductionError(
                            f"sub-block ({fams[p].label}, {fams[q].label}) is "
                            f"not circulant at offset ({i}, {j})")


def _frequency_blocks(index: MomentIndex, fams: list[BasisFamily],
                      include_identity: bool, prefix: str,
                      validate: bool) -> list[SymbolicBlock]:
    """Conjugate a padded signature sector by diag(1, P, ..., P) where
    P is the unitary DFT; frequency k keeps sum_d omega^{kd} c_d with
    omega = exp(-2 pi i / L), and the identity row lands in k = 0 with
    weight sqrt(L)."""
    F = len(fams)
    L = len(fams[0].slots)
    first = {}
    for p in range(F):
        for q in range(p, F):
            first[(p, q)] = _first_row(index, fams[p], fams[q])
    if validate:
        _validate_circulant(index, fams, first)

    omega = np.exp(-2j * np.pi * np.arange(L) / L)
    blocks = []
    for k in range(L):
        with_id = include_identity and k == 0
        off = 1 if with_id else 0
        blk = SymbolicBlock(F + off, f"{prefix}/k{k}", "moment")
        if with_id:
            blk.add(0, 0, -1, 1.0)
            for q in range(F):
                code, coef = index.resolve(fams[q].rep)
                blk.add_resolved(0, off + q, code, coef * math.sqrt(L))
        wk = omega ** k
        for p in range(F):
            for q in range(p, F):
                acc: dict[int, complex] = {}
                for d, (code, phase) in enumerate(first[(p, q)]):
                    if code == ZERO:
                        continue
                    key = -1 if code == IDENT else code
                    acc[key] = acc.get(key, 0.0) + (1j ** phase) * wk[d]
                for key, cf in acc.items():
                    if p == q:
                        if abs(cf.imag) > 1e-9:
                            raise AssertionError(
                                "frequency-block diagonal is not real")
                        cf = cf.real
                    blk.add(off + p, off + q, key, cf)
        blocks.append(blk)
    return blocks


def block_diagonalize_translation(M: SymbolicMomentMatrix,
                                  lattice: Lattice | None = None
                                  ) -> SymbolicMomentMatrix:
    """Replace every padded part by its L frequency blocks."""
    lattice = lattice or M.lattice
    if lattice is None:
        raise InvalidReductionError("translation blocking needs a lattice")
    parts: list[MatrixPart] = []
    for part in M.parts:
        if part.families is None:
            raise InvalidReductionError(
                "translation blocking needs orbit (padded) structure")
        blocks = _frequency_blocks(M.index, part.families, part.has_identity,
                                   part.label, M.index.opts.validate_circulant)
        for blk in blocks:
            parts.append(MatrixPart(blk.label, part.signature, None, None,
                                    False, blk))
    return SymbolicMomentMatrix(M.index, parts, lattice, "frequency")


@dataclass
class RelaxationProblem:
    index: MomentIndex
    blocks: list[SymbolicBlock]
    objective: np.ndarray
    obj_const: float
    sense: int                       # +1: objective is the target; -1: negated (max)
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.index.n_vars

    def census(self) -> dict[int, int]:
        return dict(Counter(b.dim for b in self.blocks))

    def report(self) -> dict:
        return {
            "n_vars": self.index.n_vars,
            "n_blocks": len(self.blocks),
            "census": {str(d): c for d, c in sorted(self.census().items())},
            "blocks": [{"label": b.label, "dim": b.dim, "kind": b.kind}
                       for b in self.blocks],
            "toggles": asdict(self.index.opts),
            "obj_const": self.obj_const,
            "sense": self.sense,
            **self.meta,
        }

    def to_conic(self):
        from . import sdp
        obj = np.zeros(self.index.n_vars)
        obj[:len(self.objective)] = self.objective
        return sdp.complex_to_real(self.blocks, obj, self.obj_const,
                                   unit_box=True, meta=self.report())


def _theta_image(poly: PauliPolynomial) -> PauliPolynomial:
    # time reversal: sigma -> -sigma on every site, antiunitary
    return PauliPolynomial.from_terms(
        ((m, (-1) ** m.degree * complex(c).conjugate()) for m, c in poly.items()))


def _verify_symmetries(H: PauliPolynomial, lattice: Lattice | None,
                       opts: ReductionOptions) -> None:
    def require(ok: bool, what: str) -> None:
        if not ok:
            raise InvalidReductionError(
                f"Hamiltonian is not invariant under {what}")

    if opts.translations != "off":
        if lattice is None:
            raise InvalidReductionError("translation reduction needs a lattice")
        shifts = [1] if lattice.kind == "chain" else [(1, 0), (0, 1)]
        for sh in shifts:
            img = H.apply(lambda m: pauli.act_translation(lattice, sh, m))
            require(img.allclose(H), f"translation by {sh}")
    if opts.mirror and lattice is not None and lattice.kind == "square":
        img = H.apply(lambda m: pauli.act_mirror(lattice, m))
        require(img.allclose(H), "the diagonal mirror")
    if opts.axis_permutations:
        for perm in ((1, 0, 2), (1, 2, 0)):
            img = H.apply(lambda m: pauli.act_axis_permutation(perm, m))
            require(img.allclose(H), f"axis permutation {perm}")
    if opts.sign_blocks or opts.zero_variant:
        for name, rot in (("x", _ROT_X), ("y", _ROT_Y)):
            img = H.apply(lambda m: pauli.act_sign(rot, m))
            require(img.allclose(H), f"the pi rotation about {name}")
    if opts.zero_variant:
        require(_theta_image(H).allclose(H), "time reversal")


def _model_parts(model) -> tuple[PauliPolynomial, Lattice | None, dict]:
    if isinstance(model, ModelSpec):
        H = build_hamiltonian(model)
        meta = {"model": {"kind": model.lattice.kind,
                          "length": model.lattice.length,
                          "n_sites": model.lattice.n_sites,
                          "j2": model.j2}}
        return H, model.lattice, meta
    if isinstance(model, PauliPolynomial):
        return model, None, {"model": {"kind": "custom"}}
    raise TypeError("model must be a ModelSpec or a PauliPolynomial")


def _moment_blocks(model, basis, opts: ReductionOptions,
                   index: MomentIndex) -> list[SymbolicBlock]:
    if opts.translations == "blocks":
        M = build_moment_matrix(basis, model, opts, index=index,
                                layout="padded", materialize=False)
        M = split_sign_blocks(M) if opts.sign_blocks else _merge_padded(M)
        M = block_diagonalize_translation(M)
    else:
        M = build_moment_matrix(basis, model, opts, index=index)
        if opts.sign_blocks:
            M = split_sign_blocks(M)
    return [p.block for p in M.parts]


def _merge_padded(M: SymbolicMomentMatrix) -> SymbolicMomentMatrix:
    # keep the single all-signatures part, marked split so blocking accepts it
    return SymbolicMomentMatrix(M.index, M.parts, M.lattice, "sign_split")


def assemble_energy_problem(model, basis, opts: ReductionOptions | None = None
                            ) -> RelaxationProblem:
    """min <H> over the reduced moment relaxation; a ground-energy lower
    bound.  Every Hamiltonian term must resolve to a moment variable that
    the matrix actually constrains."""
    H, lattice, meta = _model_parts(model)
    if opts is None:
        opts = ReductionOptions() if lattice is not None else ReductionOptions.all_off()
    _verify_symmetries(H, lattice, opts)
    n_sites = lattice.n_sites if lattice is not None else _max_site(basis, H) + 1
    index = MomentIndex(n_sites, lattice, opts)
    blocks = _moment_blocks(model, basis, opts, index)
    try:
        const, lin = index.linear_form(H, create=False)
    except InvalidReductionError as err:
        raise InvalidReductionError(
            f"Hamiltonian term not representable: {err}") from err
    objective = np.zeros(index.n_vars)
    for vid, w in lin.items():
        objective[vid] = w
    meta["objective"] = "energy"
    return RelaxationProblem(index, blocks, objective, const, +1, meta)


def assemble_observable_problem(model, basis, obs, window, direction: str,
                                opts: ReductionOptions | None = None
                                ) -> RelaxationProblem:
    """Bound <obs> over relaxation states whose energy lies in a
    certified window: direction "min" gives a lower bound, "max" an
    upper bound (solved as min of the negated objective).

    The certified quantity is the expectation in the symmetry-averaged
    ground state, which for degenerate ground spaces equals the
    projector-averaged expectation.
    """
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    lo, hi = _window_bounds(window)
    if lo > hi:
        raise ValueError(f"energy window is inverted: [{lo}, {hi}]")
    H, lattice, meta = _model_parts(model)
    if opts is None:
        opts = ReductionOptions() if lattice is not None else ReductionOptions.all_off()
    _verify_symmetries(H, lattice, opts)
    n_sites = lattice.n_sites if lattice is not None else _max_site(basis, H) + 1
    index = MomentIndex(n_sites, lattice, opts)
    blocks = _moment_blocks(model, basis, opts, index)

    poly = obs.poly if hasattr(obs, "poly") else obs
    h_const, h_lin = index.linear_form(H, create=False)
    o_const, o_lin = index.linear_form(poly, create=False)

    lo_blk = SymbolicBlock(1, "window_lo", "window")
    lo_blk.add(0, 0, -1, h_const - lo)
    hi_blk = SymbolicBlock(1, "window_hi", "window")
    hi_blk.add(0, 0, -1, hi - h_const)
    for vid, w in h_lin.items():
        lo_blk.add(0, 0, vid, w)
        hi_blk.add(0, 0, vid, -w)
    blocks = blocks + [lo_blk, hi_blk]

    sense = +1 if direction == "min" else -1
    objective = np.zeros(index.n_vars)
    for vid, w in o_lin.items():
        objective[vid] = sense * w
    meta["objective"] = getattr(obs, "label", "observable")
    meta["direction"] = direction
    meta["window"] = [lo, hi]
    return RelaxationProblem(index, blocks, objective, sense * o_const, sense, meta)


def _window_bounds(window) -> tuple[float, float]:
    if hasattr(window, "lower") and hasattr(window, "upper"):
        return float(window.lower), float(window.upper)
    lo, hi = window
    return float(lo), float(hi)


def add_rdm_positivity(problem: RelaxationProblem, k: int) -> RelaxationProblem:
    """Append the 2^k x 2^k block rho_[k] = 2^{-k} sum_P <P> P >= 0 over k
    contiguous sites; Pauli strings absent from the moment matrix get
    fresh variables (still unit-box moments)."""
    if not 1 <= k <= 10:
        raise ValueError("k must be between 1 and 10 (block is 2^k x 2^k)")
    index = problem.index
    if k > index.n_sites:
        raise ValueError(f"k={k} exceeds the {index.n_sites}-site system")
    lat = index.lattice
    if lat is not None and lat.kind == "square":
        if k > lat.length:
            raise ValueError("RDM window exceeds one lattice row")
        sites = [lat.site_at(0, j) for j in range(k)]
    else:
        sites = list(range(k))

    dim = 1 << k
    scale = 1.0 / dim
    acc: dict[tuple[int, int, int], complex] = {}
    for axes in iter_product(range(4), repeat=k):
        local = tuple((s, ax - 1) for s, ax in enumerate(axes) if ax)
        global_m = PauliString(0, tuple((sites[s], a) for s, a in local))
        code, _ = index.resolve(global_m)
        if code == ZERO:
            continue
        key = -1 if code == IDENT else code
        src, vals = pauli.dense_action(PauliString(0, local), k)
        for r in range(dim):
            c = int(src[r])
            if r > c:
                continue
            key3 = (r, c, key)
            acc[key3] = acc.get(key3, 0.0) + vals[r] * scale
    blk = SymbolicBlock(dim, f"rdm{k}", "rdm")
    for (r, c, key), cf in sorted(acc.items()):
        if r == c:
            if abs(cf.imag) > 1e-12:
                raise AssertionError("RDM diagonal is not real")
            cf = cf.real
        blk.add(r, c, key, cf)
    meta = dict(problem.meta)
    meta["rdm_blocks"] = list(meta.get("rdm_blocks", ())) + [k]
    return RelaxationProblem(index, problem.blocks + [blk], problem.objective,
                             problem.obj_const, problem.sense, meta)
