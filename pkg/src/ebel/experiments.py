"""Monte Carlo coverage and power experiments.

Replicate ``i`` of an experiment draws its series from the stream
``replicate_rng(seed, i)`` and every method is applied to the same series,
so a coverage run and a power run with the same seed see identical data
and the power at ``c = 0`` is exactly one minus the coverage.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ._intervals import ConfidenceInterval
from .bel_classic import bel_ci_mean, bel_statistic, chi2_quantile, select_block
from .blocking import BlockScheme, WeightFn
from .errors import DegenerateSample, EBELError
from .inference import EbelConfig, ebel_ci_mean, ebel_statistic
from .limit_law import QuantileTable, replicate_rng
from .processes import ProcessSpec, long_run_variance, simulate

__all__ = [
    "Method",
    "parse_method",
    "CoverageRow",
    "CoverageReport",
    "PowerCurve",
    "ExperimentAborted",
    "coverage_experiment",
    "power_curve",
]

MODES = ("interval", "membership")


@dataclass(frozen=True)
class Method:
    """An inference method for the mean of a univariate series.

    ``scheme`` is ``EBEL1``, ``EBEL2`` or ``BEL``; for ``BEL`` the ``block``
    is an integer or one of the selection rules ``"ftk"``/``"aar"``.
    """

    scheme: str
    weight: WeightFn = field(default_factory=WeightFn.constant)
    block: Union[int, str, None] = None
    calibration: Union[QuantileTable, float, None] = None

    def __post_init__(self):
        tag = self.scheme.upper()
        object.__setattr__(self, "scheme", tag)
        if tag not in ("EBEL1", "EBEL2", "BEL"):
            raise ValueError(f"unknown method scheme {self.scheme!r}")
        if tag == "BEL":
            if self.block is None:
                raise ValueError("BEL needs a block length or a selection rule")
            if isinstance(self.block, str) and self.block.lower() not in ("ftk", "aar"):
                raise ValueError(f"unknown block rule {self.block!r}")
        elif self.block is not None:
            raise ValueError(f"{tag} does not take a block length")

    @property
    def label(self) -> str:
        if self.scheme == "BEL":
            b = self.block
            return f"BEL-{b.upper()}" if isinstance(b, str) else f"BEL({b})"
        return f"{self.scheme}-{self.weight.kind}"

    def ebel_config(self, level: float) -> EbelConfig:
        return EbelConfig(BlockScheme(self.scheme), self.weight, level, self.calibration)

    def block_length(self, x: np.ndarray) -> int:
        return select_block(x, self.block).chosen_b

    def interval(self, x: np.ndarray, level: float) -> ConfidenceInterval:
        if self.scheme == "BEL":
            return bel_ci_mean(x, self.block_length(x), level)
        return ebel_ci_mean(x, self.ebel_config(level))

    def accepts(self, x: np.ndarray, mu: float, level: float) -> bool:
        """Whether ``mu`` lies in the region (no interval search)."""
        if self.scheme == "BEL":
            return bool(bel_statistic(x, mu, self.block_length(x)) <= chi2_quantile(level, 1))
        cfg = self.ebel_config(level)
        return bool(ebel_statistic(x, mu, cfg) <= cfg.critical_value(1))


def parse_method(text: str, calibration: Union[QuantileTable, float, None] = None) -> Method:
    """``ebel1-constant``, ``ebel2-linear``, ``bel-ftk``, ``bel-aar`` or ``bel-5``."""
    head, _, tail = text.strip().lower().partition("-")
    if head in ("ebel1", "ebel2"):
        weight = WeightFn.from_name(tail or "constant")
        return Method(head, weight, None, calibration)
    if head == "bel":
        if tail in ("ftk", "aar"):
            return Method("bel", block=tail)
        if tail.isdigit():
            return Method("bel", block=int(tail))
    raise ValueError(f"cannot parse method {text!r}")


class ExperimentAborted(EBELError):
    """A replicate failed numerically; ``partial`` holds the completed replicates."""

    def __init__(self, message, partial=None, replicate: Optional[int] = None):
        super().__init__(message)
        self.partial = partial
        self.replicate = replicate


def _run_replicates(fn, replicates: int, threads: Optional[int]):
    """Evaluate ``fn(i)`` for every replicate; returns (results, first failure)."""
    threads = threads or os.cpu_count() or 1
    results: List = [None] * replicates
    failure = None

    def task(i):
        try:
            return i, fn(i), None
        except EBELError as exc:
            return i, None, exc

    if threads == 1:
        outcomes = map(task, range(replicates))
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        outcomes = pool.map(task, range(replicates))
    for i, res, exc in outcomes:
        if exc is not None:
            failure = (i, exc)
            break
        results[i] = res
    if threads != 1:
        pool.shutdown(cancel_futures=True)
    return results, failure


@dataclass(frozen=True)
class CoverageRow:
    process: str
    n: int
    method: str
    coverage: float
    stderr: float
    replicates: int
    level: float
    median_width: float

    def as_dict(self) -> Dict[str, str]:
        return {
            "process": self.process, "n": str(self.n), "method": self.method,
            "coverage": f"{self.coverage:.6g}", "stderr": f"{self.stderr:.6g}",
            "replicates": str(self.replicates), "level": f"{self.level:.6g}",
            "median_width": f"{self.median_width:.6g}",
            "coverage_full": repr(self.coverage), "stderr_full": repr(self.stderr),
        }


@dataclass
class CoverageReport:
    """Coverage percentages with binomial standard errors (both in percent)."""

    rows: List[CoverageRow]
    settings: Dict[str, object]
    covered: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    COLUMNS = ("process", "n", "method", "coverage", "stderr", "replicates", "level",
               "median_width", "coverage_full", "stderr_full")

    def row(self, method: str) -> CoverageRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow(r.as_dict())
        return buf.getvalue()


def _binomial(hits: np.ndarray):
    k = hits.size
    p = float(hits.mean()) if k else float("nan")
    se = math.sqrt(p * (1 - p) / k) if k else float("nan")
    return 100.0 * p, 100.0 * se


def _coverage_report(process_label, n, methods, level, mode, seed, outcomes) -> CoverageReport:
    done = [o for o in outcomes if o is not None]
    rows, covered = [], {}
    for j, m in enumerate(methods):
        hits = np.array([o[j][0] for o in done], dtype=bool)
        widths = np.array([o[j][1] for o in done], dtype=float)
        cov, se = _binomial(hits)
        width = float(np.median(widths)) if widths.size and mode == "interval" else float("nan")
        rows.append(CoverageRow(process_label, n, m.label, cov, se, int(hits.size), level, width))
        covered[m.label] = hits
    settings = {"process": process_label, "n": n, "methods": [m.label for m in methods],
                "level": level, "mode": mode, "seed": seed, "replicates_done": len(done)}
    return CoverageReport(rows, settings, covered)


def _label(process: ProcessSpec) -> str:
    return process.label


def coverage_experiment(process: ProcessSpec, n: int, methods: Sequence[Method], level: float = 0.9,
                        replicates: int = 1000, seed: int = 0, mode: str = "interval",
                        true_mean: float = 0.0, threads: Optional[int] = None) -> CoverageReport:
    """Empirical coverage of each method's region for the true mean.

    ``mode="interval"`` builds the confidence interval and checks that it
    contains the mean. ``mode="membership"`` evaluates the statistic at the
    mean only; it agrees with the interval check whenever the region is an
    interval (always the case for BEL) and is much cheaper.

    Raises
    ------
    ExperimentAborted
        On a numerical failure, with the completed replicates attached.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    methods = list(methods)

    def one(i):
        x = simulate(process, n, replicate_rng(seed, i))
        out = []
        for m in methods:
            if mode == "interval":
                ci = m.interval(x, level)
                out.append((true_mean in ci, ci.width))
            else:
                out.append((m.accepts(x, true_mean, level), float("nan")))
        return out

    outcomes, failure = _run_replicates(one, replicates, threads)
    report = _coverage_report(_label(process), n, methods, level, mode, seed, outcomes)
    if failure is not None:
        i, exc = failure
        raise ExperimentAborted(f"replicate {i} failed: {exc}", partial=report, replicate=i)
    return report


@dataclass
class PowerCurve:
    """Rejection rates (percent) along ``mu_c = mu_0 + c sqrt(Sigma / n)``.

    ``adjusted`` is the raw curve shifted vertically so that its value at
    ``c = 0`` equals the nominal size.
    """

    process: str
    n: int
    method: str
    level: float
    c: List[float]
    raw: List[float]
    adjusted: List[float]
    replicates: int

    COLUMNS = ("process", "n", "method", "c", "power", "adjusted_power", "replicates",
               "power_full", "adjusted_full")

    @property
    def size(self) -> float:
        return self.raw[self.c.index(0.0)] if 0.0 in self.c else float("nan")

    def to_rows(self):
        for c, r, a in zip(self.c, self.raw, self.adjusted):
            yield {"process": self.process, "n": str(self.n), "method": self.method,
                   "c": f"{c:.6g}", "power": f"{r:.6g}", "adjusted_power": f"{a:.6g}",
                   "replicates": str(self.replicates), "power_full": repr(r),
                   "adjusted_full": repr(a)}


def power_csv(curves: Sequence[PowerCurve]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PowerCurve.COLUMNS, lineterminator="\n")
    writer.writeheader()
    for curve in curves:
        writer.writerows(curve.to_rows())
    return buf.getvalue()


def _curves(process_label, n, methods, level, c_grid, outcomes) -> List[PowerCurve]:
    done = [o for o in outcomes if o is not None]
    R = len(done)
    nominal = 100.0 * round(1.0 - level, 12)
    i0 = c_grid.index(0.0) if 0.0 in c_grid else None
    curves = []
    for j, m in enumerate(methods):
        counts = np.array([sum(o[j][k] for o in done) for k in range(len(c_grid))], dtype=float)
        raw = (100.0 * counts / R).tolist() if R else [float("nan")] * len(c_grid)
        if i0 is None or not R:
            adjusted = [float("nan")] * len(c_grid)
        else:
            # shift by (nominal - empirical size), computed from counts so
            # that the value at c = 0 is the nominal size exactly
            adjusted = [float(nominal + 100.0 * (cnt - counts[i0]) / R) for cnt in counts]
        curves.append(PowerCurve(process_label, n, m.label, level, list(c_grid), raw, adjusted, R))
    return curves


def power_curve(process: ProcessSpec, n: int, c_grid: Sequence[float], methods: Sequence[Method],
                level: float = 0.9, replicates: int = 1000, seed: int = 0,
                mode: str = "interval", true_mean: float = 0.0,
                threads: Optional[int] = None) -> List[PowerCurve]:
    """Raw and size-adjusted power curves, one per method.

    The test at ``c`` rejects when ``mu_0 + c sqrt(Sigma / n)`` is outside
    the region, ``Sigma`` being the analytic long-run variance.

    Raises
    ------
    DegenerateSample
        If the process has zero long-run variance.
    ExperimentAborted
        On a numerical failure, with the completed replicates attached.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sigma2 = long_run_variance(process)
    if not sigma2 > 0:
        raise DegenerateSample(f"{_label(process)} has zero long-run variance")
    c_grid = [float(c) for c in c_grid]
    methods = list(methods)
    targets = [true_mean + c * math.sqrt(sigma2 / n) for c in c_grid]

    def one(i):
        x = simulate(process, n, replicate_rng(seed, i))
        out = []
        for m in methods:
            if mode == "interval":
                ci = m.interval(x, level)
                out.append([t not in ci for t in targets])
            else:
                out.append([not m.accepts(x, t, level) for t in targets])
        return out

    outcomes, failure = _run_replicates(one, replicates, threads)
    curves = _curves(_label(process), n, methods, level, c_grid, outcomes)
    if failure is not None:
        i, exc = failure
        raise ExperimentAborted(f"replicate {i} failed: {exc}", partial=curves, replicate=i)
    return curves
