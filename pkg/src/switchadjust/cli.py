"""Batch command-line front end.

Subcommands:
    simulate  write R replicate datasets for one scenario
    adjust    run one adjustment method on a dataset CSV
    sweep     run the scenario factorial, emit metrics/estimates/
              recommendations CSVs and one forest-plot SVG per true HR
    report    re-render recommendations and plots from an existing metrics.csv

Exit codes: 0 success, 2 config error, 3 data error, 4 method
non-convergence, 5 sweep completed with failed cells.  Every run writes a
manifest.json listing outputs with content hashes; timestamps are omitted
unless --timestamps is given, so identical invocations produce byte-identical
artifacts.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import (
    methods_from_config,
    parse_config,
    scenarios_from_config,
    single_scenario_from_config,
)
from .data import load_dataset, write_dataset
from .errors import (
    CalibrationFailure,
    ConfigError,
    DataError,
    DegenerateRiskSet,
    EmptyArmAfterExclusion,
    EmptyInput,
    FeatureMismatch,
    InsufficientTraining,
    LevelCountExceeded,
    MissingLevelParameter,
    NoEventsAfterRecoding,
    NonConvergence,
    NoSolutionInRange,
    PerfectPrediction,
    SchemaError,
)
from .evaluate import SWEEP_METHODS, MetricsRow, recommend, run_factorial
from .forest import ForestConfig
from .manifest import RunManifest
from .methods import ADJUSTERS
from .methods.ipcw import IpcwConfig
from .methods.ipe import IpeConfig
from .methods.rpsftm import GEstimationConfig
from .plots import forest_svg
from .results import Method
from .simulate import generate

_CONFIG_ERRORS = (ConfigError, CalibrationFailure)
_DATA_ERRORS = (
    SchemaError,
    DataError,
    EmptyInput,
    EmptyArmAfterExclusion,
    NoEventsAfterRecoding,
    MissingLevelParameter,
    LevelCountExceeded,
    InsufficientTraining,
    FeatureMismatch,
)
_METHOD_ERRORS = (NonConvergence, NoSolutionInRange, PerfectPrediction, DegenerateRiskSet)

METRICS_COLUMNS = [
    "method",
    "true_hr",
    "target_censor",
    "target_switch",
    "bias",
    "mse",
    "coverage",
    "n_reps_used",
    "n_failures",
    "mc_se_bias",
    "mc_se_mse",
    "mean_hr",
    "mean_ci_lo",
    "mean_ci_hi",
]
ESTIMATES_COLUMNS = [
    "true_hr",
    "target_censor",
    "target_switch",
    "replicate",
    "fingerprint",
    "method",
    "hr",
    "ci_lo",
    "ci_hi",
    "error",
]
RECOMMENDATION_COLUMNS = ["true_hr", "target_censor", "target_switch", "recommended"]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _jsonable(obj):
    if isinstance(obj, Method):
        return obj.value
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Method):
        return value.value
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _start_manifest(command: str, config: dict, seed, args) -> RunManifest:
    manifest = RunManifest(command=command, config=_jsonable(config), seed=seed)
    if args.timestamps:
        manifest.started = _now()
    return manifest


def _finish_manifest(manifest: RunManifest, out: Path, args) -> None:
    if args.timestamps:
        manifest.finished = _now()
    manifest.write(out / "manifest.json")


def cmd_simulate(args) -> int:
    raw = parse_config(args.config)
    scenario = single_scenario_from_config(raw, args.seed)
    reps = args.reps if args.reps is not None else int(raw.get("reps", 1))
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(
        "simulate", {**raw, "reps": reps, "effective_seed": scenario.seed}, scenario.seed, args
    )
    for rep in range(reps):
        dataset = generate(scenario, rep)
        path = out / f"replicate_{rep:04d}.csv"
        write_dataset(dataset, path)
        manifest.add_output(path, out)
    _finish_manifest(manifest, out, args)
    print(f"wrote {reps} dataset(s) to {out}")
    return 0


def _method_config(args, method: Method, dataset):
    """Build the per-method config from CLI flags; None means library default."""
    if method in (Method.RPSFTM, Method.STRAT_RPSFTM, Method.IPE):
        g_keys = (args.psi_min, args.psi_max, args.grid_step)
        if method is Method.IPE:
            if args.tol is None and args.max_iter is None and not args.no_recensor:
                return None
            kwargs = {}
            if args.tol is not None:
                kwargs["tol"] = args.tol
            if args.max_iter is not None:
                kwargs["max_iter"] = args.max_iter
            if args.no_recensor:
                kwargs["recensor"] = False
            return IpeConfig(**kwargs)
        if all(v is None for v in g_keys) and not args.no_recensor and not args.collapse_levels:
            return None
        kwargs = {"recensor": not args.no_recensor, "collapse_levels": args.collapse_levels}
        if args.psi_min is not None:
            kwargs["psi_min"] = args.psi_min
        if args.psi_max is not None:
            kwargs["psi_max"] = args.psi_max
        if args.grid_step is not None:
            kwargs["grid_step"] = args.grid_step
        if method is Method.STRAT_RPSFTM:
            kwargs["k_levels"] = max(dataset.k_levels - 1, 0)
        return GEstimationConfig(**kwargs)
    if method is Method.IPCW:
        if (
            args.interval_days is None
            and args.truncation_quantile is None
            and args.covariates is None
            and not args.unstabilized
        ):
            return None
        kwargs = {"stabilized": not args.unstabilized}
        if args.interval_days is not None:
            kwargs["interval_days"] = args.interval_days
        if args.truncation_quantile is not None:
            kwargs["truncation_quantile"] = args.truncation_quantile
        if args.covariates is not None:
            kwargs["covariate_set"] = tuple(
                c.strip() for c in args.covariates.split(",") if c.strip()
            )
        return IpcwConfig(**kwargs)
    if method is Method.RF:
        flags = (args.n_trees, args.min_leaf, args.mtry, args.max_depth, args.seed)
        if all(v is None for v in flags) and not args.include_censored_training:
            return None
        kwargs = {"include_censored_training": args.include_censored_training}
        if args.n_trees is not None:
            kwargs["n_trees"] = args.n_trees
        if args.min_leaf is not None:
            kwargs["min_leaf"] = args.min_leaf
        if args.mtry is not None:
            kwargs["mtry"] = args.mtry
        if args.max_depth is not None:
            kwargs["max_depth"] = args.max_depth
        if args.seed is not None:
            kwargs["seed"] = args.seed
        return ForestConfig(**kwargs)
    return None


def cmd_adjust(args) -> int:
    dataset = load_dataset(args.data)
    method = Method(args.method)
    if method is Method.STRAT_RPSFTM and dataset.k_levels == 0:
        raise DataError(
            "stratified method requires switch levels; this dataset has no switchers"
        )
    cfg = _method_config(args, method, dataset)
    adjuster = ADJUSTERS[method]
    result = adjuster(dataset) if cfg is None else adjuster(dataset, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row = result.as_row()
    result_path = out / "result.csv"
    _write_csv(result_path, list(row), [list(row.values())])
    diag_path = out / "diagnostics.json"
    diag_path.write_text(
        json.dumps(_jsonable(result.diagnostics), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    manifest = _start_manifest(
        "adjust", {"data": str(args.data), "method": method.value}, args.seed, args
    )
    manifest.add_output(result_path, out)
    manifest.add_output(diag_path, out)
    _finish_manifest(manifest, out, args)
    print(
        f"method={method.value} hr={result.hr:.6g} "
        f"ci95=({result.ci95[0]:.6g}, {result.ci95[1]:.6g})"
    )
    if result.diagnostics.get("converged") is False:
        print("warning: fit did not converge; see diagnostics.json", file=sys.stderr)
        return 4
    return 0


def _metrics_rows(metrics) -> list[list]:
    return [
        [
            r.method,
            r.true_hr,
            r.target_censor,
            r.target_switch,
            r.bias,
            r.mse,
            r.coverage,
            r.n_reps_used,
            r.n_failures,
            r.mc_se_bias,
            r.mc_se_mse,
            r.mean_hr,
            r.mean_ci_lo,
            r.mean_ci_hi,
        ]
        for r in metrics
    ]


def _emit_report_outputs(metrics, out: Path, manifest: RunManifest) -> None:
    """recommendations.csv plus one forest SVG per true HR, from MetricsRows."""
    cells = sorted({(r.true_hr, r.target_censor, r.target_switch) for r in metrics})
    rec_rows = []
    for cell in cells:
        rows = [
            r
            for r in metrics
            if (r.true_hr, r.target_censor, r.target_switch) == cell
        ]
        try:
            label = recommend(rows).value
        except ConfigError:
            label = ""
            manifest.failures.append(
                {"cell": list(cell), "problem": "recommendation unavailable (missing methods)"}
            )
        rec_rows.append([cell[0], cell[1], cell[2], label])
    rec_path = out / "recommendations.csv"
    _write_csv(rec_path, RECOMMENDATION_COLUMNS, rec_rows)
    manifest.add_output(rec_path, out)

    for hr in sorted({r.true_hr for r in metrics}):
        svg_path = out / f"forest_hr_{hr:g}.svg"
        svg_path.write_text(forest_svg(metrics, hr), encoding="utf-8")
        manifest.add_output(svg_path, out)


def cmd_sweep(args) -> int:
    raw = parse_config(args.config)
    scenarios = scenarios_from_config(raw, args.seed)
    methods = methods_from_config(raw) or SWEEP_METHODS
    reps = args.reps if args.reps is not None else int(raw.get("reps", 500))
    jobs = args.jobs if args.jobs is not None else int(raw.get("jobs", 1))
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(
        "sweep", {**raw, "reps": reps, "jobs": jobs}, args.seed, args
    )

    metrics, estimates = run_factorial(
        scenarios, methods, R=reps, parallelism=jobs, return_estimates=True
    )

    metrics_path = out / "metrics.csv"
    _write_csv(metrics_path, METRICS_COLUMNS, _metrics_rows(metrics))
    manifest.add_output(metrics_path, out)
    estimates_path = out / "estimates.csv"
    _write_csv(
        estimates_path,
        ESTIMATES_COLUMNS,
        [
            [
                e.true_hr,
                e.target_censor,
                e.target_switch,
                e.replicate,
                e.fingerprint,
                e.method,
                e.hr,
                e.ci_lo,
                e.ci_hi,
                e.error,
            ]
            for e in estimates
        ],
    )
    manifest.add_output(estimates_path, out)

    for row in metrics:
        if row.n_failures > 0:
            manifest.failures.append(
                {
                    "cell": [row.true_hr, row.target_censor, row.target_switch],
                    "method": row.method.value,
                    "n_failures": row.n_failures,
                }
            )
    seen = {(r.true_hr, r.target_censor, r.target_switch, r.method) for r in metrics}
    for s in scenarios:
        for method in methods:
            if (s.true_hr, s.target_censor, s.target_switch, method) not in seen:
                manifest.failures.append(
                    {
                        "cell": [s.true_hr, s.target_censor, s.target_switch],
                        "method": method.value,
                        "problem": "all replicates failed",
                    }
                )

    _emit_report_outputs(metrics, out, manifest)
    _finish_manifest(manifest, out, args)
    n_cells = len(scenarios) * len(methods)
    print(f"sweep complete: {len(metrics)}/{n_cells} cells, R = {reps}, out = {out}")
    if manifest.failures:
        print(f"{len(manifest.failures)} cell(s) had failures; see manifest.json", file=sys.stderr)
        return 5
    return 0


def _read_metrics_csv(path: Path) -> list[MetricsRow]:
    if not path.exists():
        raise DataError(f"metrics file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_COLUMNS:
            raise SchemaError(f"{path}: header does not match the metrics.csv schema")
        out = []
        for idx, rec in enumerate(reader, start=2):
            try:
                out.append(
                    MetricsRow(
                        method=Method(rec["method"]),
                        true_hr=float(rec["true_hr"]),
                        target_censor=float(rec["target_censor"]),
                        target_switch=float(rec["target_switch"]),
                        bias=float(rec["bias"]),
                        mse=float(rec["mse"]),
                        coverage=float(rec["coverage"]),
                        n_reps_used=int(rec["n_reps_used"]),
                        n_failures=int(rec["n_failures"]),
                        mc_se_bias=float(rec["mc_se_bias"]),
                        mc_se_mse=float(rec["mc_se_mse"]),
                        mean_hr=float(rec["mean_hr"]),
                        mean_ci_lo=float(rec["mean_ci_lo"]),
                        mean_ci_hi=float(rec["mean_ci_hi"]),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path} line {idx}: {exc}") from None
    if not out:
        raise DataError(f"{path}: no metric rows")
    return out


def cmd_report(args) -> int:
    metrics = _read_metrics_csv(Path(args.metrics))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest("report", {"metrics": str(args.metrics)}, args.seed, args)
    _emit_report_outputs(metrics, out, manifest)
    _finish_manifest(manifest, out, args)
    print(f"report written to {out}")
    return 0


def _add_shared(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument(
        "--jobs", type=int, default=None, help="parallel worker processes (used by sweep)"
    )
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument(
        "--timestamps",
        action="store_true",
        help="record start/end timestamps in the manifest (off by default for "
        "byte-identical re-runs)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchadjust",
        description="Treatment-switching adjustment: simulation, estimation, and sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write replicate datasets for one scenario")
    p_sim.add_argument("--config", required=True, help="scenario config file")
    p_sim.add_argument("--reps", type=int, default=None, help="replicate count")
    _add_shared(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_adj = sub.add_parser("adjust", help="run one adjustment method on a dataset")
    p_adj.add_argument("--data", required=True, help="dataset CSV")
    p_adj.add_argument(
        "--method",
        required=True,
        choices=[m.value for m in Method],
        help="adjustment method",
    )
    p_adj.add_argument("--psi-min", type=float, default=None)
    p_adj.add_argument("--psi-max", type=float, default=None)
    p_adj.add_argument("--grid-step", type=float, default=None)
    p_adj.add_argument("--no-recensor", action="store_true")
    p_adj.add_argument("--collapse-levels", action="store_true")
    p_adj.add_argument("--tol", type=float, default=None, help="IPE convergence tolerance")
    p_adj.add_argument("--max-iter", type=int, default=None, help="IPE iteration cap")
    p_adj.add_argument("--interval-days", type=float, default=None)
    p_adj.add_argument("--truncation-quantile", type=float, default=None)
    p_adj.add_argument("--unstabilized", action="store_true")
    p_adj.add_argument("--covariates", default=None, help="comma-separated IPCW covariates")
    p_adj.add_argument("--n-trees", type=int, default=None)
    p_adj.add_argument("--min-leaf", type=int, default=None)
    p_adj.add_argument("--mtry", type=int, default=None)
    p_adj.add_argument("--max-depth", type=int, default=None)
    p_adj.add_argument(
        "--include-censored-training",
        action="store_true",
        help="keep censored control non-switchers in the forest training set",
    )
    _add_shared(p_adj)
    p_adj.set_defaults(func=cmd_adjust)

    p_swp = sub.add_parser("sweep", help="run the scenario factorial")
    p_swp.add_argument("--config", required=True, help="factorial config file")
    p_swp.add_argument("--reps", type=int, default=None, help="replicates per scenario")
    _add_shared(p_swp)
    p_swp.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="re-render outputs from a metrics.csv")
    p_rep.add_argument("--metrics", required=True, help="metrics.csv from a sweep")
    _add_shared(p_rep)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _METHOD_ERRORS as exc:
        print(f"method failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
