"""Config-driven experiment runner.

A config file holds one run (a JSON object) or a batch (a JSON array of
objects).  Each run writes a JSON report and appends fixed-schema CSV
rows; schemas are versioned through the leading column so golden files
diff cleanly.  Apart from the wall-time column, rows are reproducible
bit for bit (the solver is deterministic for fixed options).

Exit codes: 0 success, 2 config error, 3 solver did not reach an
acceptable status, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import basis, exact, lattice, model, pauli, relaxation, sdp
from .model import ModelSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INTERNAL = 4

TASKS = ("energy", "observable", "anderson", "exact", "export")
ACCEPTED_STATUSES = ("optimal", "near_optimal")

SCHEMA_TAG = {
    "energy": "energy-v1",
    "observable": "observable-v1",
    "anderson": "anderson-v1",
    "exact": "exact-v1",
}

CSV_COLUMNS = {
    "energy": [
        "schema", "label", "config", "kind", "n_sites", "j2", "r",
        "degree_cap", "variant", "rdm_k", "toggles", "e_sdp_per_spin",
        "certified_per_spin", "e_exact_per_spin", "relative_gap", "census",
        "iterations", "status", "wall_time_s",
    ],
    "observable": [
        "schema", "label", "config", "kind", "n_sites", "j2", "observable",
        "lower", "target", "upper", "window_lower", "window_upper",
        "iterations", "status", "wall_time_s",
    ],
    "anderson": [
        "schema", "label", "config", "kind", "n_sites", "j2",
        "cluster_sites", "bound_per_spin", "e_exact_per_spin", "wall_time_s",
    ],
    "exact": [
        "schema", "label", "config", "kind", "n_sites", "j2", "quantity",
        "value", "wall_time_s",
    ],
}

_AXES = {"x": pauli.X, "y": pauli.Y, "z": pauli.Z}

_TOP_KEYS = {
    "task", "label", "out", "model", "basis", "toggles", "solver",
    "observable", "window", "cluster_sites", "expectations",
}


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def config_hash(entry: dict) -> str:
    blob = json.dumps(entry, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _load_configs(path: str) -> list[dict]:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    entries = raw if isinstance(raw, list) else [raw]
    if not entries or not all(isinstance(e, dict) for e in entries):
        raise ConfigError("config must be an object or a non-empty array of objects")
    return entries


def _validate_entry(task: str, entry: dict) -> None:
    unknown = set(entry) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    stated = entry.get("task")
    if stated is not None and stated != task:
        raise ConfigError(f"config task {stated!r} does not match subcommand {task!r}")
    if "model" not in entry:
        raise ConfigError("config needs a 'model' block")
    if task == "observable" and "observable" not in entry:
        raise ConfigError("observable task needs an 'observable' block")
    if task == "anderson" and "cluster_sites" not in entry:
        raise ConfigError("anderson task needs 'cluster_sites'")


def _validate_static(task: str, entry: dict) -> None:
    """Everything checkable without running a solve.  Rejecting configs
    here keeps bad batches from producing any output files."""
    _validate_entry(task, entry)
    spec = _model_from(entry)
    if task in ("energy", "observable", "export"):
        _basis_from(entry, spec)
        _toggles_from(entry)
        _solver_from(entry)
    if task == "observable":
        _observable_from(entry, spec)
        window = entry.get("window", "auto")
        if window != "auto":
            _explicit_window(window)
    elif task == "anderson":
        if not isinstance(entry["cluster_sites"], int):
            raise ConfigError("cluster_sites must be an integer")
    elif task == "exact":
        if spec.n_sites > exact.ITERATIVE_LIMIT:
            raise ConfigError(
                f"exact task supports up to {exact.ITERATIVE_LIMIT} sites")
        expectations = entry.get("expectations", [])
        if not isinstance(expectations, list):
            raise ConfigError("expectations must be a list of observable blocks")
        for spec_obs in expectations:
            _observable_from({"observable": spec_obs}, spec)


def _model_from(entry: dict) -> ModelSpec:
    cfg = dict(entry["model"])
    kind = cfg.pop("kind", None)
    j2 = float(cfg.pop("j2", 0.0))
    try:
        if kind == "chain":
            lat = lattice.chain(int(cfg.pop("N")))
        elif kind == "square":
            lat = lattice.square(int(cfg.pop("L")))
        else:
            raise ConfigError(f"model kind must be 'chain' or 'square', got {kind!r}")
        if cfg:
            raise ConfigError(f"unknown model keys: {sorted(cfg)}")
        return ModelSpec(lat, j2=j2)
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"bad model block: {err}") from err


def _basis_from(entry: dict, spec: ModelSpec):
    cfg = dict(entry.get("basis", {}))
    rdm_k = cfg.pop("rdm_k", None)
    if spec.lattice.kind == "square":
        cfg.setdefault("variant", "square")
    try:
        params = basis.BasisParams(**cfg)
        built = basis.build_basis(spec.lattice, params)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad basis block: {err}") from err
    chain_variants = ("standard", "frustrated")
    if (spec.lattice.kind == "chain") != (params.variant in chain_variants):
        raise ConfigError(
            f"basis variant {params.variant!r} does not fit a {spec.lattice.kind} lattice")
    if rdm_k is None:
        rdm = []
    elif isinstance(rdm_k, int):
        rdm = [rdm_k]
    elif isinstance(rdm_k, list) and all(isinstance(k, int) for k in rdm_k):
        rdm = sorted(rdm_k)
    else:
        raise ConfigError("rdm_k must be an integer or a list of integers")
    return params, built, rdm


def _toggles_from(entry: dict) -> relaxation.ReductionOptions:
    cfg = entry.get("toggles", {})
    known = {f.name for f in dataclasses.fields(relaxation.ReductionOptions)}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown toggle keys: {sorted(unknown)}")
    try:
        return dataclasses.replace(relaxation.ReductionOptions(), **cfg)
    except ValueError as err:
        raise ConfigError(f"bad toggles: {err}") from err


def _solver_from(entry: dict) -> sdp.SolveOptions:
    cfg = entry.get("solver", {})
    known = {f.name for f in dataclasses.fields(sdp.SolveOptions)}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    try:
        return dataclasses.replace(sdp.SolveOptions(), **cfg)
    except ValueError as err:
        raise ConfigError(f"bad solver options: {err}") from err


def _observable_from(entry: dict, spec: ModelSpec) -> model.Observable:
    cfg = dict(entry["observable"])
    kind = cfg.pop("kind", "correlation")
    try:
        if kind == "correlation":
            disp = cfg.pop("displacement")
            if isinstance(disp, list):
                disp = tuple(disp)
            axis = _AXES[cfg.pop("axis", "x")]
            obs = model.correlation_observable(spec, disp, axis)
        elif kind == "hterm":
            obs = model.hamiltonian_term_observable(spec, cfg.pop("which"))
        else:
            raise ConfigError(f"unknown observable kind {kind!r}")
        if cfg:
            raise ConfigError(f"unknown observable keys: {sorted(cfg)}")
        return obs
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"bad observable block: {err}") from err


def _toggle_str(opts: relaxation.ReductionOptions) -> str:
    return (f"sign={int(opts.sign_blocks)},zero={int(opts.zero_variant)},"
            f"trans={opts.translations},perms={int(opts.axis_permutations)},"
            f"mirror={int(opts.mirror)}")


def _census_str(census: dict[int, int]) -> str:
    return ";".join(f"{d}:{c}" for d, c in sorted(census.items(), reverse=True))


def _exact_energy(spec: ModelSpec):
    if spec.n_sites > exact.ITERATIVE_LIMIT:
        return None, None
    H = model.build_hamiltonian(spec)
    energy, state = exact.ground_state(H, spec.n_sites)
    return energy, state


def _build_energy_problem(entry: dict, spec: ModelSpec):
    params, built, rdm = _basis_from(entry, spec)
    toggles = _toggles_from(entry)
    problem = relaxation.assemble_energy_problem(spec, built, toggles)
    for k in rdm:
        problem = relaxation.add_rdm_positivity(problem, k)
    return params, built, rdm, toggles, problem


def _window_from(entry: dict, spec: ModelSpec, solver: sdp.SolveOptions,
                 built, toggles, rdm) -> exact.EnergyWindow:
    cfg = entry.get("window", "auto")
    if cfg == "auto":
        if spec.n_sites > exact.ITERATIVE_LIMIT:
            raise ConfigError(
                "window 'auto' needs exact diagonalization; give explicit bounds")
        problem = relaxation.assemble_energy_problem(spec, built, toggles)
        for k in rdm:
            problem = relaxation.add_rdm_positivity(problem, k)
        res = sdp.solve(problem.to_conic(), solver)
        if res.status not in ACCEPTED_STATUSES:
            raise RuntimeError(f"window energy solve ended with {res.status}")
        e_exact, _ = _exact_energy(spec)
        return exact.EnergyWindow(res.certified_bound, e_exact + 1e-9,
                                  "certified relaxation", "exact diagonalization")
    return _explicit_window(cfg)


def _explicit_window(cfg) -> exact.EnergyWindow:
    if isinstance(cfg, dict):
        lo, hi = cfg.get("lower"), cfg.get("upper")
    elif isinstance(cfg, list) and len(cfg) == 2:
        lo, hi = cfg
    else:
        raise ConfigError("window must be 'auto', [lower, upper], or {lower, upper}")
    try:
        return exact.EnergyWindow(float(lo), float(hi), "config", "config")
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad window: {err}") from err


def run_energy(entry: dict, seed: int) -> dict:
    spec = _model_from(entry)
    solver = _solver_from(entry)
    params, built, rdm, toggles, problem = _build_energy_problem(entry, spec)
    census = problem.census()
    result = sdp.solve(problem.to_conic(), solver)
    n = spec.n_sites
    e_exact, _ = _exact_energy(spec)
    gap = (abs(result.primal_objective / n - e_exact / n) / abs(e_exact / n)
           if e_exact is not None else None)
    row = {
        "schema": SCHEMA_TAG["energy"],
        "label": entry.get("label", ""),
        "config": config_hash(entry),
        "kind": spec.lattice.kind,
        "n_sites": n,
        "j2": repr(float(spec.j2)),
        "r": params.r,
        "degree_cap": params.degree_cap,
        "variant": params.variant,
        "rdm_k": ";".join(map(str, rdm)),
        "toggles": _toggle_str(toggles),
        "e_sdp_per_spin": repr(result.primal_objective / n),
        "certified_per_spin": repr(result.certified_bound / n),
        "e_exact_per_spin": "" if e_exact is None else repr(e_exact / n),
        "relative_gap": "" if gap is None else f"{gap:.6f}",
        "census": _census_str(census),
        "iterations": result.iterations,
        "status": result.status,
        "wall_time_s": f"{result.wall_time:.3f}",
    }
    code = EXIT_OK if result.status in ACCEPTED_STATUSES else EXIT_SOLVER
    report = {
        "task": "energy",
        "config": entry,
        "config_hash": config_hash(entry),
        "problem": problem.report(),
        "status": result.status,
        "iterations": result.iterations,
        "objective": result.primal_objective,
        "certified_bound": result.certified_bound,
        "per_spin": {
            "sdp": result.primal_objective / n,
            "certified": result.certified_bound / n,
            "exact": None if e_exact is None else e_exact / n,
        },
        "wall_time_s": result.wall_time,
    }
    return {"rows": [row], "report": report, "code": code}


def run_observable(entry: dict, seed: int) -> dict:
    spec = _model_from(entry)
    solver = _solver_from(entry)
    params, built, rdm = _basis_from(entry, spec)
    toggles = _toggles_from(entry)
    obs = _observable_from(entry, spec)
    window = _window_from(entry, spec, solver, built, toggles, rdm)

    results = {}
    for direction in ("min", "max"):
        problem = relaxation.assemble_observable_problem(
            spec, built, obs, window, direction, toggles)
        for k in rdm:
            problem = relaxation.add_rdm_positivity(problem, k)
        results[direction] = sdp.solve(problem.to_conic(), solver)
    lower = results["min"].certified_bound
    upper = -results["max"].certified_bound

    target = None
    e_exact, state = _exact_energy(spec)
    if state is not None:
        target = exact.expectation(state, obs.poly)

    code = EXIT_OK
    if any(r.status not in ACCEPTED_STATUSES for r in results.values()):
        code = EXIT_SOLVER
    elif lower > upper + 1e-12 or (
            target is not None and not lower - 1e-9 <= target <= upper + 1e-9):
        code = EXIT_INTERNAL

    row = {
        "schema": SCHEMA_TAG["observable"],
        "label": entry.get("label", ""),
        "config": config_hash(entry),
        "kind": spec.lattice.kind,
        "n_sites": spec.n_sites,
        "j2": repr(float(spec.j2)),
        "observable": obs.label,
        "lower": repr(lower),
        "target": "" if target is None else repr(target),
        "upper": repr(upper),
        "window_lower": repr(window.lower),
        "window_upper": repr(window.upper),
        "iterations": results["min"].iterations + results["max"].iterations,
        "status": ";".join(results[d].status for d in ("min", "max")),
        "wall_time_s": f"{results['min'].wall_time + results['max'].wall_time:.3f}",
    }
    report = {
        "task": "observable",
        "config": entry,
        "config_hash": config_hash(entry),
        "observable": obs.label,
        "window": [window.lower, window.upper],
        "lower": lower,
        "upper": upper,
        "target": target,
        "statuses": {d: results[d].status for d in results},
        "iterations": {d: results[d].iterations for d in results},
        "wall_time_s": results["min"].wall_time + results["max"].wall_time,
    }
    return {"rows": [row], "report": report, "code": code}


def run_anderson(entry: dict, seed: int) -> dict:
    spec = _model_from(entry)
    K = entry["cluster_sites"]
    if not isinstance(K, int):
        raise ConfigError("cluster_sites must be an integer")
    try:
        bound = exact.anderson_bound(spec, K)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    e_exact, _ = _exact_energy(spec)
    row = {
        "schema": SCHEMA_TAG["anderson"],
        "label": entry.get("label", ""),
        "config": config_hash(entry),
        "kind": spec.lattice.kind,
        "n_sites": spec.n_sites,
        "j2": repr(float(spec.j2)),
        "cluster_sites": K,
        "bound_per_spin": repr(bound),
        "e_exact_per_spin": "" if e_exact is None else repr(e_exact / spec.n_sites),
        "wall_time_s": "0.000",
    }
    report = {
        "task": "anderson",
        "config": entry,
        "config_hash": config_hash(entry),
        "cluster_sites": K,
        "bound_per_spin": bound,
        "e_exact_per_spin": None if e_exact is None else e_exact / spec.n_sites,
    }
    return {"rows": [row], "report": report, "code": EXIT_OK}


def run_exact(entry: dict, seed: int) -> dict:
    spec = _model_from(entry)
    n = spec.n_sites
    if n > exact.ITERATIVE_LIMIT:
        raise ConfigError(f"exact task supports up to {exact.ITERATIVE_LIMIT} sites")
    H = model.build_hamiltonian(spec)
    energy, state = exact.ground_state(H, n)
    product = exact.product_state_upper_bound(spec, seed=seed)
    quantities = [
        ("energy", energy),
        ("energy_per_spin", energy / n),
        ("degeneracy", float(state.degeneracy)),
        ("product_upper_per_spin", product / n),
    ]
    for spec_obs in entry.get("expectations", []):
        obs = _observable_from({"observable": spec_obs}, spec)
        quantities.append((obs.label, exact.expectation(state, obs.poly)))
    rows = [
        {
            "schema": SCHEMA_TAG["exact"],
            "label": entry.get("label", ""),
            "config": config_hash(entry),
            "kind": spec.lattice.kind,
            "n_sites": n,
            "j2": repr(float(spec.j2)),
            "quantity": name,
            "value": repr(float(value)),
            "wall_time_s": "0.000",
        }
        for name, value in quantities
    ]
    report = {
        "task": "exact",
        "config": entry,
        "config_hash": config_hash(entry),
        "quantities": {name: float(value) for name, value in quantities},
    }
    return {"rows": rows, "report": report, "code": EXIT_OK}


def run_export(entry: dict, seed: int, out_dir: Path) -> dict:
    spec = _model_from(entry)
    _, _, _, _, problem = _build_energy_problem(entry, spec)
    conic = problem.to_conic()
    name = entry.get("label") or config_hash(entry)
    path = out_dir / f"{name}.sdpa"
    sdp.export_interchange(conic, str(path))
    report = {
        "task": "export",
        "config": entry,
        "config_hash": config_hash(entry),
        "path": str(path),
        "census": {str(d): c for d, c in sorted(problem.census().items())},
        "n_vars": problem.n_vars,
    }
    return {"rows": [], "report": report, "code": EXIT_OK}


def _execute(task: str, entry: dict, seed: int, out_dir: str) -> dict:
    try:
        if task == "energy":
            return run_energy(entry, seed)
        if task == "observable":
            return run_observable(entry, seed)
        if task == "anderson":
            return run_anderson(entry, seed)
        if task == "exact":
            return run_exact(entry, seed)
        return run_export(entry, seed, Path(out_dir))
    except ConfigError as err:
        return {"rows": [], "report": {"task": task, "config": entry,
                                       "error": str(err)}, "code": EXIT_CONFIG}
    except relaxation.InvalidReductionError as err:
        return {"rows": [], "report": {"task": task, "config": entry,
                                       "error": str(err)}, "code": EXIT_INTERNAL}
    except (AssertionError, RuntimeError) as err:
        return {"rows": [], "report": {"task": task, "config": entry,
                                       "error": str(err)}, "code": EXIT_INTERNAL}


def _write_outputs(task: str, outcomes: list[dict], entries: list[dict],
                   out_dir: Path) -> None:
    # config-error outcomes leave no trace beyond the stderr message
    kept = [(e, o) for e, o in zip(entries, outcomes)
            if o["code"] != EXIT_CONFIG]
    if not kept:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry, outcome in kept:
        name = entry.get("label") or config_hash(entry)
        path = out_dir / f"{name}.{task}.json"
        path.write_text(json.dumps(outcome["report"], indent=2, sort_keys=True,
                                   default=str) + "\n")
    if task == "export":
        return
    rows = [row for _, outcome in kept for row in outcome["rows"]]
    with open(out_dir / f"{task}.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS[task],
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spincert",
        description="certified energy and observable bounds for spin lattices")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", required=True, help="JSON run or batch file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        entries = _load_configs(args.config)
        for entry in entries:
            _validate_static(args.task, entry)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out or entries[0].get("out") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.workers > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_execute, args.task, e, args.seed, str(out_dir))
                       for e in entries]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_execute(args.task, e, args.seed, str(out_dir))
                    for e in entries]

    _write_outputs(args.task, outcomes, entries, out_dir)

    code = EXIT_OK
    for entry, outcome in zip(entries, outcomes):
        name = entry.get("label") or config_hash(entry)
        if outcome["code"] == EXIT_OK:
            key = {"energy": "certified_bound", "observable": "lower",
                   "anderson": "bound_per_spin", "export": "path"}.get(args.task)
            detail = outcome["report"].get(key, "done")
            print(f"{args.task} {name}: ok ({key}={detail})"
                  if key else f"{args.task} {name}: ok")
        else:
            detail = outcome["report"].get("error", outcome["report"].get("status", ""))
            print(f"{args.task} {name}: failed with code {outcome['code']}: {detail}",
                  file=sys.stderr)
            code = max(code, outcome["code"])
    return code


if __name__ == "__main__":
    sys.exit(main())
