"""Command line front end.

Subcommands:

* ``simulate``: synthesize a dataset directory from a scenario config.
* ``run``: run one filter variant over a dataset, write the estimate,
  per-correction diagnostics and, when truth is present, a report.
* ``compare``: run several variants on one dataset and write a combined
  report, summary table and figures.
* ``sweep``: vary one parameter of one variant and tabulate the metrics.

Relative ``--out`` paths are resolved against ``ROVERNAV_OUT_DIR`` when
that environment variable is set. Reports embed ``runtime_s`` as 0.0
unless ``--timing`` is given, so repeated runs on the same inputs are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    TRUTH_HEADER,
    _RUN_KEYS,
    _SIM_KEYS,
    check_known_keys,
    load_config_file,
    merge_overrides,
    read_dataset,
    run_config_from_mapping,
    with_method,
    write_dataset,
    _write_rows,
)
from .errors import ConfigurationError, RovernavError
from .metrics import error_series, to_enu
from .nav_model import METHODS
from .pipeline import (
    compare_methods,
    run_filter,
    simulate_from_mapping,
    sweep_parameter,
)
from . import plots

__all__ = ["main"]

_DIAG_FIXED = ["epoch", "time", "dz0", "dz1", "dz2", "dz3", "deweighted", "zupt"]


def _out_dir(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get("ROVERNAV_OUT_DIR")
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _mapping_from_args(args) -> dict[str, str]:
    mapping: dict[str, str] = {}
    if getattr(args, "config", None):
        mapping.update(load_config_file(args.config))
    mapping = merge_overrides(mapping, getattr(args, "set", None) or [])
    return mapping


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_estimate(path: Path, run) -> None:
    rows = np.column_stack(
        [run.times, run.lat, run.lon, run.height, run.vel[:, 0], run.vel[:, 1], run.vel[:, 2]]
    )
    _write_rows(path, TRUTH_HEADER, rows)


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_diagnostics(path: Path, diagnostics: list[dict]) -> None:
    extra = sorted(
        {k for row in diagnostics for k in row} - set(_DIAG_FIXED) - {"innovation"}
    )
    header = _DIAG_FIXED + extra
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in diagnostics:
            dz = row.get("innovation")
            flat = dict(row)
            for i in range(4):
                flat[f"dz{i}"] = float(dz[i]) if dz is not None else ""
            writer.writerow([_format_cell(flat.get(k, "")) for k in header])


def _truth_enu(bundle):
    truth = bundle.truth
    return to_enu(
        [s.time for s in truth],
        [s.lat for s in truth],
        [s.lon for s in truth],
        [s.height for s in truth],
        bundle.origin,
    )


def cmd_simulate(args) -> int:
    mapping = _mapping_from_args(args)
    if args.seed is not None:
        mapping["sim.seed"] = str(args.seed)
    check_known_keys(mapping, _RUN_KEYS | _SIM_KEYS)
    imu, odom, truth, slip, meta = simulate_from_mapping(mapping)
    out = _out_dir(args.out)
    write_dataset(out, imu, odom, truth, slip, meta)
    print(f"wrote dataset with {len(imu)} IMU and {len(odom)} odometry samples to {out}")
    return 0


def cmd_run(args) -> int:
    mapping = _mapping_from_args(args)
    if args.method is not None:
        mapping["method"] = args.method
    config = run_config_from_mapping(mapping)
    bundle = read_dataset(args.dataset)
    run = run_filter(bundle, config)
    out = _out_dir(args.out)
    _write_estimate(out / "estimate.csv", run)
    _write_diagnostics(out / "diagnostics.csv", run.diagnostics)
    if bundle.truth is not None:
        report, results = compare_methods(
            bundle, config, [config.method], with_timing=args.timing
        )
        _write_json(out / "report.json", report)
        if not args.no_plots:
            truth_enu = _truth_enu(bundle)
            est = {m: r.enu(bundle.origin) for m, r in results.items()}
            plots.plot_ground_track(out / "ground_track.png", truth_enu, est)
    entry = f"method={config.method} epochs={run.n_epochs} gated={run.n_gated}"
    print(f"run complete: {entry}; outputs in {out}")
    return 0


def _summary_rows(report: dict) -> list[list]:
    rows = []
    for e in report["results"]:
        rows.append(
            [e["method"], e["rms_m"], e["max_norm_m"]]
            + e["quartiles_norm"]
            + [e["n_epochs"], e["n_gated"], e["runtime_s"]]
        )
    return rows


_SUMMARY_HEADER = [
    "method", "rms_m", "max_norm_m",
    "q0_norm", "q1_norm", "q2_norm", "q3_norm", "q4_norm",
    "n_epochs", "n_gated", "runtime_s",
]


def cmd_compare(args) -> int:
    mapping = _mapping_from_args(args)
    config = run_config_from_mapping(mapping)
    methods = [m.strip().lower() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}; choose from {METHODS}")
    bundle = read_dataset(args.dataset)
    report, results = compare_methods(bundle, config, methods, with_timing=args.timing)
    out = _out_dir(args.out)
    _write_json(out / "report.json", report)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_HEADER)
        for row in _summary_rows(report):
            writer.writerow([_format_cell(v) if not isinstance(v, str) else v for v in row])
    for m, run in results.items():
        _write_estimate(out / f"estimate_{m}.csv", run)
    if not args.no_plots:
        truth_enu = _truth_enu(bundle)
        est = {m: r.enu(bundle.origin) for m, r in results.items()}
        plots.plot_ground_track(out / "ground_track.png", truth_enu, est)
        errors = {}
        for m, run in results.items():
            _, norm, _ = error_series(est[m], truth_enu)
            errors[m] = norm
        plots.plot_error_box(out / "error_box.png", errors)
    best = min(report["results"], key=lambda e: e["rms_m"])
    print(f"compared {len(methods)} methods; best rms {best['rms_m']:.3f} m ({best['method']}); outputs in {out}")
    return 0


def cmd_sweep(args) -> int:
    mapping = _mapping_from_args(args)
    config = run_config_from_mapping(mapping)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--values must be comma separated numbers, got {args.values!r}") from None
    if not values:
        raise ConfigurationError("--values is empty")
    bundle = read_dataset(args.dataset)
    report = sweep_parameter(
        bundle, config, args.method.lower(), args.param, values, with_timing=args.timing
    )
    out = _out_dir(args.out)
    _write_json(out / "sweep.json", report)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "rms_m", "max_norm_m", "n_gated", "runtime_s"])
        for row in report["rows"]:
            writer.writerow(
                [_format_cell(row[k]) for k in ("value", "rms_m", "max_norm_m", "n_gated", "runtime_s")]
            )
    if not args.no_plots:
        plots.plot_sweep(out / "sweep.png", args.method.lower(), args.param, report["rows"])
    print(f"swept {args.method}.{args.param} over {len(values)} values; outputs in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rovernav",
        description="Wheel-inertial rover odometry with robust measurement updates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset directory")
            p.add_argument("--timing", action="store_true",
                           help="embed wall-clock runtimes in reports")
            p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_sim = sub.add_parser("simulate", help="synthesize a dataset")
    common(p_sim, dataset=False)
    p_sim.add_argument("--seed", type=int, help="override sim.seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_run = sub.add_parser("run", help="run one filter variant")
    common(p_run)
    p_run.add_argument("--method", choices=METHODS, help="update rule (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several variants and summarize")
    common(p_cmp)
    p_cmp.add_argument("--methods", required=True,
                       help="comma separated method names, e.g. none,hkf,cskf")
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", help="vary one parameter of one variant")
    common(p_swp)
    p_swp.add_argument("--method", required=True, choices=METHODS)
    p_swp.add_argument("--param", required=True, help="parameter name, e.g. delta or s")
    p_swp.add_argument("--values", required=True, help="comma separated values")
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RovernavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
