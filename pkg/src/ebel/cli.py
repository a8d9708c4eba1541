"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Settings come from an optional JSON file (``--config``) overridden by
explicit flags; the resolved settings are written as ``#`` comment lines at
the top of every CSV so the file can be regenerated exactly.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .bel_classic import bel_ci_mean, select_block
from .blocking import BlockScheme, WeightFn
from .errors import EBELError
from .experiments import (CoverageReport, ExperimentAborted, coverage_experiment, parse_method,
                          power_csv, power_curve)
from .inference import EbelConfig, ebel_ci_mean
from .limit_law import QuantileTable, estimate_quantiles
from .processes import INNOVATIONS, parse_process

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(Exception):
    pass


DEFAULTS: Dict[str, Dict[str, object]] = {
    "quantiles": {"scheme": "ebel1", "weight": "constant", "d": 1, "levels": "0.9",
                  "reps": 50000, "grid": 1000, "seed": None, "discretization": "auto",
                  "out": None, "overwrite": False, "threads": None},
    "ci": {"input": None, "method": "ebel1", "weight": "constant", "block": None, "level": 0.9,
           "calibration": None, "calibration_table": None},
    "coverage": {"process": None, "innovation": "centered_chisq1", "burn_in": 1000, "n": None,
                 "methods": "ebel1-constant", "level": 0.9, "reps": 1000, "seed": None,
                 "mode": "interval", "calibration_table": None, "out": None, "overwrite": False,
                 "threads": None},
    "power": {"process": None, "innovation": "centered_chisq1", "burn_in": 1000, "n": None,
              "methods": "ebel1-constant", "level": 0.9, "reps": 1000, "seed": None,
              "mode": "interval", "c_grid": "0:5:0.25", "calibration_table": None, "out": None,
              "overwrite": False, "threads": None},
    "select-block": {"input": None, "rule": "ftk"},
}
MONTE_CARLO = ("quantiles", "coverage", "power")


def _add_common_mc(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (required)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--overwrite", action="store_true", default=None,
                   help="replace an existing output file")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")


def _add_experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--process", help="e.g. 'MA(2) 0.4,-0.6', 'ar:0.9', 'arma:0.9/-0.6,-0.3', ma1star")
    p.add_argument("--innovation", choices=INNOVATIONS)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--n", type=int, help="series length")
    p.add_argument("--methods", help="comma list, e.g. ebel1-constant,ebel2-linear,bel-ftk,bel-5")
    p.add_argument("--level", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--mode", choices=("interval", "membership"))
    p.add_argument("--calibration-table", dest="calibration_table",
                   help="quantile CSV written by the quantiles command")
    _add_common_mc(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebel", description="Expansive block empirical likelihood")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantiles", help="simulate quantiles of the limit law")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--scheme", choices=("ebel1", "ebel2"), type=str.lower)
    p.add_argument("--weight", help="constant, linear, cosine_bell")
    p.add_argument("--d", type=int)
    p.add_argument("--levels", help="comma-separated probabilities")
    p.add_argument("--reps", type=int)
    p.add_argument("--grid", type=int, help="grid size m")
    p.add_argument("--discretization", choices=("auto", "bridge", "riemann"))
    _add_common_mc(p)

    p = sub.add_parser("ci", help="confidence interval for the mean of one series")
    p.add_argument("--config")
    p.add_argument("--input", help="single-column CSV (optional header)")
    p.add_argument("--method", choices=("ebel1", "ebel2", "bel"), type=str.lower)
    p.add_argument("--weight")
    p.add_argument("--block", help="BEL block length or rule: integer, ftk, aar")
    p.add_argument("--level", type=float)
    p.add_argument("--calibration", type=float, help="critical value for EBEL")
    p.add_argument("--calibration-table", dest="calibration_table")

    p = sub.add_parser("coverage", help="coverage experiment")
    p.add_argument("--config")
    _add_experiment(p)

    p = sub.add_parser("power", help="power curves along local alternatives")
    p.add_argument("--config")
    p.add_argument("--c-grid", dest="c_grid", help="'start:stop:step' or comma list")
    _add_experiment(p)

    p = sub.add_parser("select-block", help="data-driven BEL block length")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--rule", choices=("ftk", "aar"), type=str.lower)
    return parser


def resolve(args: argparse.Namespace):
    """Merge defaults, config file and explicit flags (in increasing precedence)."""
    cmd = args.command
    settings = dict(DEFAULTS[cmd])
    file_cfg: Dict[str, object] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}")
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - set(settings))
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {', '.join(unknown)}")
        settings.update(file_cfg)
    flags = {k: v for k, v in vars(args).items()
             if k in settings and v is not None}
    settings.update(flags)
    if cmd in MONTE_CARLO and settings.get("seed") is None:
        raise ConfigError(f"{cmd} needs an explicit --seed")
    return settings, file_cfg, flags


# settings that do not affect results stay out of the header, so the same
# run written to two paths or with two thread counts gives identical bytes
_NOT_RECORDED = ("out", "overwrite", "threads")


def _header(cmd: str, settings, file_cfg, flags) -> str:
    def dump(d):
        return json.dumps({k: v for k, v in d.items() if k not in _NOT_RECORDED}, sort_keys=True)

    lines = [f"# ebel {__version__} {cmd}",
             "# run_config: " + dump(settings),
             "# config_file: " + dump(file_cfg),
             "# flags: " + dump(flags)]
    return "\n".join(lines) + "\n"


def _check_out(settings) -> Optional[str]:
    out = settings.get("out")
    if out and os.path.exists(out) and not settings.get("overwrite"):
        raise ConfigError(f"{out} exists; pass --overwrite to replace it")
    return out


def _write(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def read_series(path: str) -> np.ndarray:
    """Single-column numeric CSV; a non-numeric first row is taken as a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    values: List[float] = []
    for k, row in enumerate(rows):
        if len(row) != 1:
            raise ConfigError(f"{path}: line {k + 1} has {len(row)} columns, expected 1")
        try:
            v = float(row[0])
        except ValueError:
            if k == 0:
                continue
            raise ConfigError(f"{path}: line {k + 1} is not numeric: {row[0]!r}")
        if not math.isfinite(v):
            raise ConfigError(f"{path}: line {k + 1} is not finite")
        values.append(v)
    if len(values) < 2:
        raise ConfigError(f"{path}: need at least two observations")
    return np.array(values)


def _floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}")


def parse_c_grid(text) -> List[float]:
    if isinstance(text, str) and ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"c grid must be 'start:stop:step', got {text!r}")
        if step <= 0 or stop < start:
            raise ConfigError("c grid needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return _floats(text)


def _load_tables(path) -> List[QuantileTable]:
    if not path:
        return []
    try:
        with open(path) as fh:
            return QuantileTable.from_csv(fh.read())
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read calibration table {path}: {exc}")


def _pick_table(tables, scheme: str, weight: str):
    for t in tables:
        if t.matches(scheme, weight, 1):
            return t
    return None


def cmd_quantiles(s, header) -> int:
    out = _check_out(s)
    try:
        w = WeightFn.from_name(str(s["weight"]))
        w.validate()
        scheme = BlockScheme.parse(str(s["scheme"]))
        levels = _floats(s["levels"])
        table = estimate_quantiles(scheme, w, int(s["d"]), levels, int(s["reps"]), int(s["grid"]),
                                   int(s["seed"]), str(s["discretization"]), s["threads"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc))
    _write(out, header + table.to_csv())
    for lv, q, se in zip(table.levels, table.quantiles, table.mc_stderr):
        print(f"{table.scheme} {table.weight} d={table.d} level={lv:.6g} "
              f"quantile={q:.6g} stderr={se:.6g}")
    if table.hull_failures:
        print(f"hull failures counted as +inf: {table.hull_failures}")
    return EXIT_OK


def cmd_ci(s, header) -> int:
    if not s.get("input"):
        raise ConfigError("ci needs --input")
    x = read_series(str(s["input"]))
    level = float(s["level"])
    method = str(s["method"]).lower()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if method == "bel":
                if s.get("block") is None:
                    raise ConfigError("bel needs --block (integer, ftk or aar)")
                block = str(s["block"])
                rule = int(block) if block.isdigit() else block
                sel = select_block(x, rule) if len(np.unique(x)) > 1 else None
                b = sel.chosen_b if sel else (rule if isinstance(rule, int) else 1)
                ci = bel_ci_mean(x, b, level)
                extra = {"chosen_b": b, "rule": sel.rule if sel else "fixed"}
                if sel:
                    extra.update({k: f"{v:.6g}" for k, v in sel.diagnostics.items()})
            else:
                weight = WeightFn.from_name(str(s["weight"]))
                cal = s.get("calibration")
                if cal is None and s.get("calibration_table"):
                    cal = _pick_table(_load_tables(s["calibration_table"]), method.upper(),
                                      weight.kind)
                ci = ebel_ci_mean(x, EbelConfig(BlockScheme.parse(method), weight, level, cal))
                extra = {}
        except ValueError as exc:
            raise ConfigError(str(exc))
    for wmsg in caught:
        print(f"warning: {wmsg.message}", file=sys.stderr)
    print(f"method: {ci.method}")
    print(f"level: {ci.level:.6g}")
    print(f"lower: {ci.lower:.10g}")
    print(f"upper: {ci.upper:.10g}")
    print(f"degenerate: {str(ci.degenerate).lower()}")
    for k, v in extra.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _experiment_setup(s):
    if s.get("process") is None or s.get("n") is None:
        raise ConfigError("--process and --n are required")
    try:
        process = parse_process(str(s["process"]), str(s["innovation"]), int(s["burn_in"]))
        tables = _load_tables(s.get("calibration_table"))
        methods = []
        for text in str(s["methods"]).split(","):
            m = parse_method(text)
            if m.scheme != "BEL" and tables:
                m = parse_method(text, _pick_table(tables, m.scheme, m.weight.kind))
            methods.append(m)
        for m in methods:
            if m.scheme != "BEL":
                m.ebel_config(float(s["level"])).critical_value(1)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return process, methods


def cmd_coverage(s, header) -> int:
    out = _check_out(s)
    process, methods = _experiment_setup(s)
    try:
        report = coverage_experiment(process, int(s["n"]), methods, float(s["level"]),
                                     int(s["reps"]), int(s["seed"]), str(s["mode"]),
                                     threads=s["threads"])
    except ExperimentAborted as exc:
        _write(out, header + f"# partial: aborted at replicate {exc.replicate}\n"
               + exc.partial.to_csv())
        raise
    _write(out, header + report.to_csv())
    _print_coverage(report)
    return EXIT_OK


def _print_coverage(report: CoverageReport) -> None:
    for r in report.rows:
        print(f"{r.process} n={r.n} {r.method}: coverage={r.coverage:.1f} "
              f"stderr={r.stderr:.2f} ({r.replicates} reps)")


def cmd_power(s, header) -> int:
    out = _check_out(s)
    process, methods = _experiment_setup(s)
    grid = parse_c_grid(s["c_grid"])
    try:
        curves = power_curve(process, int(s["n"]), grid, methods, float(s["level"]),
                             int(s["reps"]), int(s["seed"]), str(s["mode"]),
                             threads=s["threads"])
    except ExperimentAborted as exc:
        _write(out, header + f"# partial: aborted at replicate {exc.replicate}\n"
               + power_csv(exc.partial))
        raise
    except ValueError as exc:
        raise ConfigError(str(exc))
    _write(out, header + power_csv(curves))
    for cv in curves:
        print(f"{cv.process} n={cv.n} {cv.method}: size={cv.size:.1f}")
    return EXIT_OK


def cmd_select_block(s, header) -> int:
    if not s.get("input"):
        raise ConfigError("select-block needs --input")
    x = read_series(str(s["input"]))
    try:
        sel = select_block(x, str(s["rule"]))
    except ValueError as exc:
        raise ConfigError(str(exc))
    print(f"rule: {sel.rule}")
    print(f"chosen_b: {sel.chosen_b}")
    for k, v in sel.diagnostics.items():
        print(f"{k}: {v:.6g}")
    return EXIT_OK


COMMANDS = {"quantiles": cmd_quantiles, "ci": cmd_ci, "coverage": cmd_coverage,
            "power": cmd_power, "select-block": cmd_select_block}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings, file_cfg, flags = resolve(args)
        header = _header(args.command, settings, file_cfg, flags)
        return COMMANDS[args.command](settings, header)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EBELError as exc:
        if isinstance(exc, ValueError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
