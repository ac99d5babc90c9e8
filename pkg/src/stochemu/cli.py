"""Command-line front end: simulate, fit, query, validate, and run studies.

All commands are deterministic for fixed flags and seed; every random
stream is derived from the single --seed (or the study config seed) through
documented substreams. Exit codes: 0 success, 2 input or configuration
error, 3 numerical stage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .dist import INFERENCE_OPTIONS
from .emulator import (
    StochasticEmulator,
    compress_trajectories,
    emulator_from_compression,
    fit_emulator,
)
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateDataError,
    DomainError,
    FitError,
    IntegrationError,
    SchemaError,
    StageError,
    StochemuError,
)
from .metrics import evaluate_emulator, lower_bound_band, _sub_seed
from .pce import FitConfig
from .testbeds import TrajectorySet, generate_dataset, get_benchmark, make_validation_set

_INPUT_ERRORS = (ConfigurationError, DomainError, DataError, SchemaError)
_NUMERICAL_ERRORS = (FitError, DegenerateDataError, IntegrationError, StageError)

OPTION_NAMES = {name: number for number, name in INFERENCE_OPTIONS.items()}


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _read_points_csv(path, dims: int) -> np.ndarray:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty points file")
    start = 1 if any(not _is_float(c) for c in rows[0]) else 0
    data = []
    for row in rows[start:]:
        if not row:
            continue
        if len(row) < dims:
            raise SchemaError(f"{path}: expected at least {dims} columns per row")
        data.append([float(c) for c in row[:dims]])
    if not data:
        raise SchemaError(f"{path}: no data rows")
    return np.array(data)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _fit_config(args) -> FitConfig:
    return FitConfig(
        max_degree=args.pmax,
        q_candidates=_float_list(args.qnorms),
        degree_candidates=_int_list(args.degrees) if args.degrees else None,
        solver=args.solver,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    benchmark = get_benchmark(args.benchmark, steps=args.steps)
    data = generate_dataset(benchmark, args.n, args.r, args.seed)
    data.save(args.out)
    print(
        f"benchmark={args.benchmark} d={data.input_model.dims} "
        f"N={args.n} R={args.r} -> {args.out}"
    )
    return 0


def cmd_fit(args) -> int:
    data = TrajectorySet.from_dict(_load_json(args.data))
    option = OPTION_NAMES[args.option]
    t0 = time.perf_counter()
    emulator = fit_emulator(
        data, _fit_config(args), epsilon=args.epsilon, inference_option=option, seed=args.seed
    )
    total = time.perf_counter() - t0
    emulator.save(args.out)
    report = emulator.fit_report
    eig = ", ".join(f"{v:.6g}" for v in report["eigenvalues"])
    print(f"K={report['n_modes']} eigenvalues=[{eig}]")
    print(f"explained_fraction={report['explained_fraction']:.6f} P={report['n_regressors']}")
    timing = " ".join(f"{k}={v:.2f}s" for k, v in report["timings_s"].items())
    print(f"timings: {timing} total={total:.2f}s")
    print(f"emulator -> {args.out}")
    return 0


def cmd_sample(args) -> int:
    emulator = StochasticEmulator.from_json(Path(args.emulator).read_text())
    grid = _read_points_csv(args.at_grid, emulator.input_model.dims)
    trajectories = emulator.sample_trajectories(args.n, args.seed)
    values = np.array([t.predict(grid) for t in trajectories])
    header = [f"p{j}" for j in range(grid.shape[0])]
    _write_csv(args.out, header, [[float(v) for v in row] for row in values])
    print(f"{args.n} trajectories x {grid.shape[0]} grid points -> {args.out}")
    return 0


def cmd_predict_marginal(args) -> int:
    emulator = StochasticEmulator.from_json(Path(args.emulator).read_text())
    x = np.array(_float_list(args.at))
    if x.size != emulator.input_model.dims:
        raise ConfigurationError(
            f"--at needs {emulator.input_model.dims} comma-separated coordinates"
        )
    samples = emulator.marginal_samples(x, args.n, args.seed)
    _write_csv(args.out, ["value"], [[float(v)] for v in samples])
    print(f"{args.n} marginal samples at {args.at} -> {args.out}")
    return 0


def cmd_covariance(args) -> int:
    emulator = StochasticEmulator.from_json(Path(args.emulator).read_text())
    points = _read_points_csv(args.points, emulator.input_model.dims)
    cov = emulator.covariance(points)
    asym = float(np.abs(cov - cov.T).max())
    header = [f"p{j}" for j in range(points.shape[0])]
    _write_csv(args.out, header, [[float(v) for v in row] for row in cov])
    print(f"{points.shape[0]}x{points.shape[0]} covariance (max asymmetry {asym:.2e}) -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    emulator = StochasticEmulator.from_json(Path(args.emulator).read_text())
    benchmark = get_benchmark(args.benchmark, steps=args.steps)
    validation = make_validation_set(benchmark, args.n_val, args.r_val, _sub_seed(args.seed, 7001))
    report = evaluate_emulator(emulator, validation, n_emu=args.n_emu, seed=_sub_seed(args.seed, 7002))
    _write_csv(
        args.out,
        ["eps_marg", "eps_cov", "n_points", "n_points_skipped"],
        [[report.eps_marg, report.eps_cov, validation.n_points, report.skipped_points]],
    )
    print(f"eps_marg={report.eps_marg:.6g} eps_cov={report.eps_cov:.6g} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

_STUDY_DEFAULTS = {
    "repetitions": 10,
    "options": ["parametric"],
    "epsilon": 0.001,
    "q_candidates": [0.5, 0.75, 1.0],
    "degree_candidates": None,
    "n_val": 200,
    "r_val": 2000,
    "n_emu": None,
    "band_pairs": 20,
    "heston_steps": 1000,
}

_STUDY_REQUIRED = ("benchmark", "n_list", "r_list", "p_max", "seed")

CONVERGENCE_HEADER = [
    "benchmark",
    "n",
    "r",
    "option",
    "repetition",
    "eps_marg",
    "eps_cov",
    "k_modes",
    "lambda1",
    "explained_fraction",
    "status",
]


def load_study_config(path) -> dict:
    config = dict(_STUDY_DEFAULTS)
    config.update(_load_json(path))
    missing = [k for k in _STUDY_REQUIRED if k not in config]
    if missing:
        raise ConfigurationError(f"study config missing fields: {missing}")
    for key in ("n_list", "r_list", "options"):
        if not config[key]:
            raise ConfigurationError(f"study config field {key} must be non-empty")
    for name in config["options"]:
        if name not in OPTION_NAMES:
            raise ConfigurationError(f"unknown inference option {name!r}")
    return config


def _cell_params(config: dict, n: int, r: int, option: str, rep: int, cell_seed: int) -> dict:
    return {
        "benchmark": config["benchmark"],
        "n": n,
        "r": r,
        "option": option,
        "repetition": rep,
        "epsilon": config["epsilon"],
        "p_max": config["p_max"],
        "q_candidates": list(config["q_candidates"]),
        "degree_candidates": config["degree_candidates"],
        "heston_steps": config["heston_steps"],
        "n_val": config["n_val"],
        "r_val": config["r_val"],
        "n_emu": config["n_emu"],
        "seed": cell_seed,
    }


def _cell_key(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _run_study_group(group_args) -> list[dict]:
    """Fit one dataset and evaluate every inference option on it."""
    config, n, r, rep, options, validation = group_args
    benchmark = get_benchmark(config["benchmark"], steps=config["heston_steps"])
    cell_seed = _sub_seed(config["seed"], rep * 1_000_003 + r * 1009 + n)
    cfg = FitConfig(
        max_degree=config["p_max"],
        q_candidates=tuple(config["q_candidates"]),
        degree_candidates=tuple(config["degree_candidates"]) if config["degree_candidates"] else None,
    )
    rows = []
    try:
        data = generate_dataset(benchmark, n, r, cell_seed)
        compression = compress_trajectories(data, cfg, config["epsilon"])
    except StochemuError as exc:
        for option in options:
            rows.append(_error_row(config, n, r, option, rep, exc))
        return rows
    n_emu = config["n_emu"] or config["r_val"]
    for option in options:
        try:
            emulator = emulator_from_compression(compression, OPTION_NAMES[option], cell_seed)
            report = evaluate_emulator(
                emulator, validation, n_emu=n_emu, seed=_sub_seed(cell_seed, 1)
            )
            rows.append(
                {
                    "benchmark": config["benchmark"],
                    "n": n,
                    "r": r,
                    "option": option,
                    "repetition": rep,
                    "eps_marg": float(report.eps_marg),
                    "eps_cov": float(report.eps_cov),
                    "k_modes": emulator.n_modes,
                    "lambda1": float(emulator.kle.eigenvalues[0]),
                    "explained_fraction": float(emulator.kle.explained_fraction),
                    "status": "ok",
                }
            )
        except StochemuError as exc:
            rows.append(_error_row(config, n, r, option, rep, exc))
    return rows


def _error_row(config, n, r, option, rep, exc) -> dict:
    return {
        "benchmark": config["benchmark"],
        "n": n,
        "r": r,
        "option": option,
        "repetition": rep,
        "eps_marg": float("nan"),
        "eps_cov": float("nan"),
        "k_modes": 0,
        "lambda1": float("nan"),
        "explained_fraction": float("nan"),
        "status": f"error:{type(exc).__name__}",
    }


def run_study(config: dict, out_dir) -> tuple[Path, Path]:
    """Execute the full N x R x option x repetition grid; resumable per cell.

    Cell results are cached as JSON files keyed by a hash of the cell
    parameters, so an interrupted study continues where it stopped and the
    merged CSV is byte-identical across reruns.
    """
    out_dir = Path(out_dir)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    benchmark = get_benchmark(config["benchmark"], steps=config["heston_steps"])

    validation = make_validation_set(
        benchmark, config["n_val"], config["r_val"], _sub_seed(config["seed"], 900_001)
    )

    groups = []  # (n, r, rep) -> options missing a cached cell
    cached_rows = []
    for n, r, rep in itertools.product(
        config["n_list"], config["r_list"], range(config["repetitions"])
    ):
        cell_seed = _sub_seed(config["seed"], rep * 1_000_003 + r * 1009 + n)
        pending = []
        for option in config["options"]:
            key = _cell_key(_cell_params(config, n, r, option, rep, cell_seed))
            path = cells_dir / f"{key}.json"
            if path.exists():
                cached_rows.append(json.loads(path.read_text()))
            else:
                pending.append(option)
        if pending:
            groups.append((config, n, r, rep, pending, validation))

    workers = _worker_count()
    fresh_rows = []
    if groups:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(_run_study_group, groups):
                    fresh_rows.extend(rows)
        else:
            for group in groups:
                fresh_rows.extend(_run_study_group(group))
    for row in fresh_rows:
        cell_seed = _sub_seed(config["seed"], row["repetition"] * 1_000_003 + row["r"] * 1009 + row["n"])
        key = _cell_key(
            _cell_params(config, row["n"], row["r"], row["option"], row["repetition"], cell_seed)
        )
        (cells_dir / f"{key}.json").write_text(json.dumps(row, sort_keys=True))

    all_rows = cached_rows + fresh_rows
    option_order = {name: i for i, name in enumerate(config["options"])}
    all_rows.sort(key=lambda d: (d["n"], d["r"], option_order[d["option"]], d["repetition"]))
    conv_path = out_dir / "convergence.csv"
    _write_csv(
        conv_path,
        CONVERGENCE_HEADER,
        [[row[k] for k in CONVERGENCE_HEADER] for row in all_rows],
    )

    band = lower_bound_band(
        benchmark,
        config["n_val"],
        config["r_val"],
        pairs=config["band_pairs"],
        seed=_sub_seed(config["seed"], 900_002),
    )
    band_path = out_dir / "band.csv"
    _write_csv(
        band_path,
        ["median", "q25", "q75", "q05", "q95", "pairs"],
        [[band.median, band.q25, band.q75, band.q05, band.q95, config["band_pairs"]]],
    )
    return conv_path, band_path


def cmd_study(args) -> int:
    config = load_study_config(args.config)
    out_dir = args.out_dir or config.get("out_dir")
    if not out_dir:
        raise ConfigurationError("study needs --out-dir or an out_dir config field")
    conv_path, band_path = run_study(config, out_dir)
    print(f"convergence table -> {conv_path}")
    print(f"lower-bound band  -> {band_path}")
    return 0


def _worker_count() -> int:
    raw = os.environ.get("STOCHEMU_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochemu",
        description="Spectral stochastic emulator: fit, query, and validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a trajectory dataset from a benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--n", type=int, required=True, help="design points per trajectory")
    p.add_argument("--r", type=int, required=True, help="number of trajectories")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--steps", type=int, default=None, help="Heston time steps (dt = 1/steps)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a stochastic emulator to a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--option", choices=sorted(OPTION_NAMES), default="parametric")
    p.add_argument("--epsilon", type=float, default=0.001)
    p.add_argument("--pmax", type=int, required=True)
    p.add_argument("--qnorms", default="0.5,0.75,1.0")
    p.add_argument("--degrees", default=None, help="comma-separated degree candidates")
    p.add_argument("--solver", choices=("lars-hybrid", "ols"), default="lars-hybrid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="resample trajectories on a grid")
    p.add_argument("--emulator", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--at-grid", required=True, help="CSV of points (columns x1..xd)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("predict-marginal", help="response samples at one input point")
    p.add_argument("--emulator", required=True)
    p.add_argument("--at", required=True, help="comma-separated coordinates")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_marginal)

    p = sub.add_parser("covariance", help="Mercer covariance matrix on points")
    p.add_argument("--emulator", required=True)
    p.add_argument("--points", required=True, help="CSV of points (columns x1..xd)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("validate", help="marginal and covariance errors against a benchmark")
    p.add_argument("--emulator", required=True)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--n-val", type=int, default=200)
    p.add_argument("--r-val", type=int, default=2000)
    p.add_argument("--n-emu", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("study", help="run a convergence-study grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        return _fail(str(exc), 3)
    except _INPUT_ERRORS as exc:
        return _fail(str(exc), 2)
    except FileNotFoundError as exc:
        return _fail(str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
