"""Real conic problems, a first-order SDP solver, and bound certificates.

The container encodes linear matrix inequalities

    minimize  c . x + const   subject to   mat(a0 + A x) in every block PSD

over stacked, fully-stored real symmetric blocks.  Complex Hermitian
blocks enter through the standard doubling H = A + iB -> [[A, -B], [B, A]],
which preserves the feasible set and doubles eigenvalue multiplicities.

The solver is an ADMM splitting over the PSD product cone with diagonal
(column-norm) preconditioning, over-relaxation and residual-balanced
step-size adaptation.  It can split either the form above ("primal", one
linear solve per variable) or its conic dual ("dual", the
sum-of-squares side, which carries fewer linear constraints and is the
default).  Both sides produce a primal point x, an exactly-PSD dual
matrix Y, and matched objective values; everything is deterministic.

A bound valid up to eigenvalue-computation error is extracted from any
dual iterate: project Y onto the affine dual-feasibility set, then pay
for the PSD violation with lambda_min(Y) times the known trace of the
moment matrix and for the (tiny) remaining linear residual with the
unit box |x_i| <= 1 that every Pauli moment satisfies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass
class ConicProblem:
    block_dims: list[int]
    a0: np.ndarray                 # stacked full matrices, length sum(d^2)
    A: sp.csr_matrix               # (sum(d^2), n_vars)
    c: np.ndarray                  # (n_vars,)
    obj_const: float = 0.0
    unit_box: bool = False         # |x_i| <= 1 holds for every feasible x
    trace_budget: float | None = None   # trace of mat(a0 + A x), when constant
    block_kinds: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    def block_offsets(self) -> list[int]:
        offs = [0]
        for d in self.block_dims:
            offs.append(offs[-1] + d * d)
        return offs


@dataclass
class SolveOptions:
    eps_primal: float = 1e-8
    eps_dual: float = 1e-8
    eps_gap: float = 1e-8
    max_iter: int = 200_000
    solve_side: str = "dual"       # "dual" | "primal"
    rho: float = 1.0
    alpha: float = 1.6             # over-relaxation
    check_every: int = 25
    adapt_every: int = 100
    verbose: bool = False


@dataclass
class SolveResult:
    status: str                    # optimal | near_optimal | max_iter | infeasible
    primal_objective: float
    dual_objective: float
    certified_bound: float
    x: np.ndarray
    y: np.ndarray                  # stacked dual matrix, PSD up to eigh error
    iterations: int
    r_primal: float
    r_dual: float
    gap: float
    wall_time: float
    solve_side: str


def _entries_to_conic(block_dims, block_kinds, coo_pos, coo_var, coo_val,
                      c, obj_const, meta) -> ConicProblem:
    """Common assembly funnel so that direct construction and re-import
    produce identical canonical arrays."""
    total = sum(d * d for d in block_dims)
    n_vars = len(c)
    pos = np.asarray(coo_pos, dtype=np.int64)
    var = np.asarray(coo_var, dtype=np.int64)
    val = np.asarray(coo_val, dtype=float)
    const_mask = var < 0
    a0 = np.zeros(total)
    np.add.at(a0, pos[const_mask], val[const_mask])
    Am = sp.coo_matrix(
        (val[~const_mask], (pos[~const_mask], var[~const_mask])),
        shape=(total, n_vars),
    ).tocsr()
    Am.sum_duplicates()
    Am.sort_indices()
    prob = ConicProblem(
        block_dims=list(block_dims),
        a0=a0,
        A=Am,
        c=np.asarray(c, dtype=float).copy(),
        obj_const=float(obj_const),
        block_kinds=list(block_kinds),
        meta=dict(meta or {}),
    )
    _attach_trace_budget(prob)
    return prob


def _diag_positions(block_dims) -> np.ndarray:
    idx = []
    off = 0
    for d in block_dims:
        idx.extend(off + k * d + k for k in range(d))
        off += d * d
    return np.asarray(idx, dtype=np.int64)


def _attach_trace_budget(prob: ConicProblem) -> None:
    """tr mat(a0 + A x) is constant when every A_i is traceless in total
    (moment blocks are; the two energy-window rows cancel pairwise)."""
    diag = _diag_positions(prob.block_dims)
    tr_coef = np.asarray(prob.A[diag, :].sum(axis=0)).ravel()
    if tr_coef.size == 0 or np.max(np.abs(tr_coef), initial=0.0) < 1e-9:
        prob.trace_budget = float(prob.a0[diag].sum())
    else:
        prob.trace_budget = None


def complex_to_real(blocks, objective, obj_const=0.0, unit_box=True, meta=None) -> ConicProblem:
    """Embed complex Hermitian symbolic blocks into a real SDP.

    ``blocks`` iterates objects with ``dim``, ``kind`` and upper-triangle
    entry arrays ``rows, cols, vars, coefs`` (var -1 marks a constant).
    Every block doubles, including real 1x1 scalars ([a] -> diag(a, a)).
    """
    dims = []
    kinds = []
    pos_list, var_list, val_list = [], [], []
    off = 0
    for blk in blocks:
        d = blk.dim
        D = 2 * d
        dims.append(D)
        kinds.append(blk.kind)

        def emit(rr, cc, v, x):
            if x != 0.0:
                pos_list.append(off + rr * D + cc)
                var_list.append(v)
                val_list.append(x)

        for r, c_, v, z in zip(blk.rows, blk.cols, blk.vars, blk.coefs):
            if r > c_:
                raise ValueError("symbolic blocks must store the upper triangle")
            z = complex(z)
            re, im = z.real, z.imag
            if r == c_:
                if abs(im) > 1e-9:
                    raise ValueError("diagonal coefficient is not real")
                emit(r, r, v, re)
                emit(r + d, r + d, v, re)
                continue
            # upper entry (r, c) = z and its mirror (c, r) = conj(z)
            emit(r, c_, v, re)
            emit(c_, r, v, re)
            emit(r + d, c_ + d, v, re)
            emit(c_ + d, r + d, v, re)
            emit(r, c_ + d, v, -im)
            emit(c_ + d, r, v, -im)
            emit(r + d, c_, v, im)
            emit(c_, r + d, v, im)
        off += D * D
    prob = _entries_to_conic(dims, kinds, pos_list, var_list, val_list,
                             objective, obj_const, meta)
    prob.unit_box = unit_box
    return prob


class _BlockOps:
    """Batched projection and eigenvalue helpers over the stacked blocks."""

    def __init__(self, block_dims):
        self.block_dims = list(block_dims)
        offs = [0]
        for d in block_dims:
            offs.append(offs[-1] + d * d)
        self.total = offs[-1]
        groups: dict[int, list[int]] = {}
        for b, d in enumerate(block_dims):
            groups.setdefault(d, []).append(offs[b])
        self.groups = [
            (d, np.asarray(starts)[:, None] + np.arange(d * d)[None, :])
            for d, starts in sorted(groups.items())
        ]

    def proj_psd(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for d, idx in self.groups:
            W = v[idx].reshape(-1, d, d)
            W = 0.5 * (W + W.transpose(0, 2, 1))
            if d == 1:
                R = np.clip(W, 0.0, None)
            else:
                w, Q = np.linalg.eigh(W)
                np.clip(w, 0.0, None, out=w)
                R = Q @ (w[:, :, None] * Q.transpose(0, 2, 1))
            out[idx] = R.reshape(idx.shape)
        return out

    def min_eig(self, v: np.ndarray) -> float:
        lo = np.inf
        for d, idx in self.groups:
            W = v[idx].reshape(-1, d, d)
            W = 0.5 * (W + W.transpose(0, 2, 1))
            if d == 1:
                lo = min(lo, float(W.min()))
            else:
                w = np.linalg.eigvalsh(W)
                lo = min(lo, float(w[:, 0].min()))
        return lo


def _scaling(prob: ConicProblem) -> np.ndarray:
    d = np.sqrt(np.asarray(prob.A.multiply(prob.A).sum(axis=0)).ravel())
    if np.any(d == 0):
        raise ValueError("a variable does not appear in any constraint entry")
    return d


def solve(prob: ConicProblem, opts: SolveOptions | None = None) -> SolveResult:
    """Run the operator-splitting solver; deterministic for fixed options."""
    opts = opts or SolveOptions()
    if opts.solve_side not in ("primal", "dual"):
        raise ValueError(f"unknown solve_side {opts.solve_side!r}")
    t0 = time.perf_counter()

    ops = _BlockOps(prob.block_dims)
    d_scale = _scaling(prob)
    At = (prob.A @ sp.diags(1.0 / d_scale)).tocsr()   # column-equilibrated
    AtT = At.T.tocsr()
    ct = prob.c / d_scale
    a0 = prob.a0
    gram = (AtT @ At).tocsc()
    lu = spla.splu(gram)

    rho = opts.rho
    alpha = opts.alpha
    n = prob.n_vars
    norm_c = 1.0 + np.linalg.norm(prob.c)
    norm_a0 = np.linalg.norm(a0)

    xt = np.zeros(n)
    s = ops.proj_psd(a0.copy())
    u = np.zeros(ops.total)        # scaled multiplier
    yv = np.zeros(ops.total)

    status = "max_iter"
    it = 0
    r_pri = r_dua = gap = np.inf
    obj_p = obj_d = np.nan
    stall = _GapStall()

    if opts.solve_side == "dual":
        # splitting on: min <a0, Y> s.t. At^T Y = ct, Y PSD
        y2 = np.zeros(ops.total)
        for it in range(1, opts.max_iter + 1):
            v = y2 - u - a0 / rho
            mult = lu.solve(AtT @ v - ct)
            yv = v - At @ mult
            xt = rho * mult
            yhat = alpha * yv + (1.0 - alpha) * y2
            y2 = ops.proj_psd(yhat + u)
            u = u + yhat - y2
            if it % opts.check_every == 0 or it == opts.max_iter:
                svec = -rho * u
                x = xt / d_scale
                obj_p = float(prob.c @ x) + prob.obj_const
                obj_d = -float(a0 @ y2) + prob.obj_const
                r_pri = np.linalg.norm(a0 + prob.A @ x - svec) / (1.0 + norm_a0)
                r_dua = np.linalg.norm(AtT @ y2 - ct) / (1.0 + np.linalg.norm(ct))
                gap = abs(obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
                if opts.verbose:
                    print(f"  it {it} obj {obj_p:.9f} r_pri {r_pri:.2e} "
                          f"r_dua {r_dua:.2e} gap {gap:.2e}", flush=True)
                if (r_pri < opts.eps_primal and r_dua < opts.eps_dual
                        and gap < opts.eps_gap):
                    status = "optimal"
                    break
                if stall.update(r_pri < opts.eps_primal and r_dua < opts.eps_dual, gap):
                    status = "near_optimal"
                    break
                if not np.isfinite(obj_p) or np.linalg.norm(y2) > 1e14:
                    status = "infeasible"
                    break
            if it % opts.adapt_every == 0:
                # splitting residual roles are swapped on this side
                new_rho = _clamp_rho(rho * _adapt_rho(r_dua, r_pri))
                if new_rho != rho:
                    u *= rho / new_rho
                    rho = new_rho
        yfin = y2
    else:
        # splitting on: min ct . xt s.t. a0 + At xt = S, S PSD
        w = np.zeros(ops.total)
        for it in range(1, opts.max_iter + 1):
            rhs = AtT @ (s - w - a0) - ct / rho
            xt = lu.solve(rhs)
            fx = a0 + At @ xt
            t = alpha * fx + (1.0 - alpha) * s
            s = ops.proj_psd(t + w)
            w = w + t - s
            if it % opts.check_every == 0 or it == opts.max_iter:
                yv = -rho * w
                x = xt / d_scale
                obj_p = float(prob.c @ x) + prob.obj_const
                obj_d = -float(a0 @ yv) + prob.obj_const
                r_pri = np.linalg.norm(a0 + prob.A @ x - s) / (1.0 + norm_a0)
                r_dua = np.linalg.norm(AtT @ yv - ct) / (1.0 + np.linalg.norm(ct))
                gap = abs(obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
                if opts.verbose:
                    print(f"  it {it} obj {obj_p:.9f} r_pri {r_pri:.2e} "
                          f"r_dua {r_dua:.2e} gap {gap:.2e}", flush=True)
                if (r_pri < opts.eps_primal and r_dua < opts.eps_dual
                        and gap < opts.eps_gap):
                    status = "optimal"
                    break
                if stall.update(r_pri < opts.eps_primal and r_dua < opts.eps_dual, gap):
                    status = "near_optimal"
                    break
                if not np.isfinite(obj_p) or np.linalg.norm(xt) > 1e14:
                    status = "infeasible"
                    break
            if it % opts.adapt_every == 0:
                new_rho = _clamp_rho(rho * _adapt_rho(r_pri, r_dua))
                if new_rho != rho:
                    w *= rho / new_rho
                    rho = new_rho
        yfin = -rho * w

    if status == "max_iter" and max(r_pri, r_dua, gap) < 100 * max(
            opts.eps_primal, opts.eps_dual, opts.eps_gap):
        status = "near_optimal"

    x = xt / d_scale
    result = SolveResult(
        status=status,
        primal_objective=float(obj_p),
        dual_objective=float(obj_d),
        certified_bound=np.nan,
        x=x,
        y=yfin,
        iterations=it,
        r_primal=float(r_pri),
        r_dual=float(r_dua),
        gap=float(gap),
        wall_time=time.perf_counter() - t0,
        solve_side=opts.solve_side,
    )
    try:
        result.certified_bound = certify_bound(prob, result)
    except ValueError:
        result.certified_bound = np.nan
    return result


class _GapStall:
    """Detects a duality-gap floor: residual tolerances hold but the gap
    has stopped improving, which happens on near-degenerate problems
    (e.g. very tight energy windows).  Grinding on would not certify a
    better bound, so the solver may stop with status near_optimal."""

    def __init__(self, patience: int = 40):
        self.patience = patience
        self.best = np.inf
        self.flat = 0

    def update(self, residuals_ok: bool, gap: float) -> bool:
        if not residuals_ok or not np.isfinite(gap):
            self.flat = 0
            return False
        if gap < 0.9 * self.best:
            self.best = gap
            self.flat = 0
            return False
        self.flat += 1
        return self.flat >= self.patience


def _clamp_rho(rho: float) -> float:
    return min(max(rho, 1e-6), 1e6)


def _adapt_rho(r_pri: float, r_dua: float) -> float:
    if not np.isfinite(r_pri) or not np.isfinite(r_dua):
        return 1.0
    if r_pri > 10.0 * r_dua:
        return 2.0
    if r_dua > 10.0 * r_pri:
        return 0.5
    return 1.0


def certify_bound(prob: ConicProblem, result: SolveResult,
                  repair_iters: int = 30) -> float:
    """Turn the dual iterate into a bound that holds for every feasible
    point of the exact problem (so in particular for the quantum state).

    Two certificate forms are valid for any feasible x:
      * Y PSD exactly: c.x >= -<a0, Y> - ||A^T Y - c||_1, charging the
        linear residual against the unit box |x_i| <= 1;
      * A^T Y = c exactly: c.x = <Y, a0 + A x> - <a0, Y> >=
        lambda_min(Y) * trace_budget - <a0, Y>, when the trace of the
        constrained matrix is a known constant.
    Alternating projections onto the PSD cone and the affine set shrink
    both residuals; the best valid candidate along the way is returned.
    """
    ops = _BlockOps(prob.block_dims)
    gram = (prob.A.T @ prob.A).tocsc()
    lu = spla.splu(gram)
    norm_c = 1.0 + np.linalg.norm(prob.c)

    y = result.y.copy()
    best = -np.inf
    for _ in range(max(1, repair_iters)):
        y = ops.proj_psd(y)
        slack = float(np.abs(prob.A.T @ y - prob.c).sum())
        if prob.unit_box or slack <= 1e-12 * norm_c:
            best = max(best, -float(prob.a0 @ y) + prob.obj_const - slack)
        y = y - prob.A @ lu.solve(prob.A.T @ y - prob.c)
        lam = min(0.0, ops.min_eig(y))
        cand = -float(prob.a0 @ y) + prob.obj_const
        if lam < 0.0:
            if prob.trace_budget is None:
                continue
            cand += lam * prob.trace_budget
        best = max(best, cand)
    if not np.isfinite(best):
        raise ValueError(
            "no valid certificate: need the unit box or a constant trace")
    return best


# ---------------------------------------------------------------------------
# solver-interchange format (SDPA sparse)

def export_interchange(prob: ConicProblem, path: str) -> None:
    """Write the problem in the SDPA sparse format:

    line 1: number of variables, line 2: number of blocks, line 3: block
    sizes (negated when a block is diagonal), line 4: the objective
    vector, then one ``matno blkno i j value`` entry per line with
    matno 0 holding the constant matrix and only upper triangles stored.
    Metadata that the format cannot carry rides in comment lines, so a
    round-trip restores the container exactly.
    """
    offs = prob.block_offsets()
    dims = prob.block_dims
    nb = len(dims)

    def locate(flat):
        b = np.searchsorted(offs, flat, side="right") - 1
        rc = flat - offs[b]
        return b, rc // dims[b], rc % dims[b]

    Acoo = prob.A.tocoo()
    diag_block = [True] * nb
    for flat in np.concatenate([np.nonzero(prob.a0)[0], Acoo.row]):
        b, r, c = locate(int(flat))
        if r != c:
            diag_block[b] = False

    lines = []
    lines.append("*meta obj_const " + repr(prob.obj_const))
    lines.append("*meta unit_box " + ("1" if prob.unit_box else "0"))
    lines.append("*meta kinds " + ",".join(prob.block_kinds or ["psd"] * nb))
    lines.append(str(prob.n_vars))
    lines.append(str(nb))
    lines.append(" ".join(str(-d if diag_block[b] else d) for b, d in enumerate(dims)))
    lines.append(" ".join(repr(float(v)) for v in prob.c))

    def entry_lines(matno, flats, vals):
        out = []
        for flat, v in zip(flats, vals):
            b, r, c = locate(int(flat))
            if r > c:
                continue
            out.append(f"{matno} {b + 1} {r + 1} {c + 1} {float(v)!r}")
        return out

    flats = np.nonzero(prob.a0)[0]
    lines.extend(entry_lines(0, flats, -prob.a0[flats]))
    order = np.lexsort((Acoo.row, Acoo.col))
    for k in order:
        lines.extend(entry_lines(int(Acoo.col[k]) + 1,
                                 [int(Acoo.row[k])], [float(Acoo.data[k])]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def import_interchange(path: str) -> ConicProblem:
    obj_const = 0.0
    unit_box = False
    kinds: list[str] | None = None
    header: list[str] = []
    entries: list[tuple[int, int, int, int, float]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line[0] in "*\"#":
                if line.startswith("*meta obj_const"):
                    obj_const = float(line.split()[-1])
                elif line.startswith("*meta unit_box"):
                    unit_box = line.split()[-1] == "1"
                elif line.startswith("*meta kinds"):
                    kinds = line.split()[-1].split(",")
                continue
            if len(header) < 3:
                header.append(line)
                continue
            if len(header) == 3:
                header.append(line)
                cvec = [float(tok) for tok in line.replace(",", " ").split()]
                continue
            matno, blk, i, j, val = line.replace(",", " ").split()
            entries.append((int(matno), int(blk), int(i), int(j), float(val)))

    n_vars = int(header[0].split()[0])
    nb = int(header[1].split()[0])
    raw_dims = [int(tok) for tok in header[2].replace(",", " ").split()]
    dims = [abs(d) for d in raw_dims]
    if len(dims) != nb or len(cvec) != n_vars:
        raise ValueError("inconsistent interchange header")

    offs = [0]
    for d in dims:
        offs.append(offs[-1] + d * d)
    pos, var, val = [], [], []
    for matno, blk, i, j, v in entries:
        b = blk - 1
        r, c = i - 1, j - 1
        v_id = matno - 1           # -1 is the constant matrix F0 = -a0
        sign = -1.0 if matno == 0 else 1.0
        pos.append(offs[b] + r * dims[b] + c)
        var.append(v_id)
        val.append(sign * v)
        if r != c:
            pos.append(offs[b] + c * dims[b] + r)
            var.append(v_id)
            val.append(sign * v)
    prob = _entries_to_conic(dims, kinds or ["psd"] * nb, pos, var, val,
                             cvec, obj_const, {})
    prob.unit_box = unit_box
    return prob
