"""Monte Carlo simulation of the Brownian-functional limit laws.

The limit of ``-(1/n) log R_n(mu_0)`` is ``-g_d(Y_d)`` where
``g_d(a) = -int_0^1 log(1 + a' f(t)) dt``, ``f(t) = w(t) B(t)``, is minimised
over ``{a : 1 + a' f(t) >= 0 for all t}``. The forward/backward scheme
adds the integral over ``w(t) [B(1) - B(1 - t)]``.

Two discretisations of a draw are available:

``riemann``
    Evaluate ``f`` at ``t_i = i/m`` and solve the finite EL program on those
    points. This has exactly the law of the EBEL statistic computed on an
    i.i.d. Gaussian series of length ``m``; when the hull condition fails
    the draw is ``+inf``.
``bridge`` (``d = 1`` only)
    Same Riemann sum for the integral, but the feasible interval for ``a``
    is taken from the exact extremes of the Brownian bridge inside every
    grid cell. The coarse grid otherwise misses the path's extremes, which
    set the constraint, and at ``m = 1000`` the two treatments of hull
    failure bracket the continuum quantile by roughly +/-0.2.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .blocking import EBEL1, BlockScheme, WeightFn
from .el_core import DEFAULT_TOL, log_el_ratio, weighted_dual

__all__ = [
    "BrownianPath",
    "QuantileTable",
    "REFERENCE_90TH",
    "replicate_rng",
    "simulate_brownian_path",
    "limit_draw",
    "limit_draw_local_alternative",
    "simulate_limit_draws",
    "estimate_quantiles",
    "bootstrap_quantile_stderr",
]

# 90th percentiles of the d = 1 limit laws as tabulated in the literature;
# usable as a calibration when no simulated table is at hand
REFERENCE_90TH = {
    ("EBEL1", "constant"): 2.51,
    ("EBEL1", "linear"): 5.64,
    ("EBEL1", "cosine_bell"): 7.00,
    ("EBEL2", "constant"): 2.50,
    ("EBEL2", "linear"): 4.37,
    ("EBEL2", "cosine_bell"): 3.42,
}

DISCRETIZATIONS = ("auto", "bridge", "riemann")
_MAX_ITER = 200
_BOOTSTRAP_TAG = 0xB0075


def replicate_rng(seed: int, index: int, *extra: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` under master ``seed``."""
    return np.random.default_rng([int(seed), int(index), *map(int, extra)])


@dataclass(frozen=True)
class BrownianPath:
    """``d``-dimensional standard Brownian motion on the grid ``i/m``, ``i = 1..m``."""

    grid_size: int
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.grid_size + 1) / self.grid_size

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0, prepend=np.zeros((1, self.values.shape[1])))


def simulate_brownian_path(m: int, d: int, rng: np.random.Generator) -> BrownianPath:
    if m < 2 or d < 1:
        raise ValueError(f"need m >= 2 and d >= 1, got m={m}, d={d}")
    steps = rng.standard_normal((m, d)) / np.sqrt(m)
    return BrownianPath(m, np.cumsum(steps, axis=0))


def _resolve_discretization(discretization: str, d: int) -> str:
    if discretization not in DISCRETIZATIONS:
        raise ValueError(f"discretization must be one of {DISCRETIZATIONS}")
    if discretization == "auto":
        return "bridge" if d == 1 else "riemann"
    if discretization == "bridge" and d != 1:
        raise ValueError("bridge discretisation is only implemented for d = 1")
    return discretization


def _scheme(scheme) -> BlockScheme:
    if isinstance(scheme, str):
        scheme = BlockScheme.parse(scheme)
    if scheme.tag not in ("EBEL1", "EBEL2"):
        raise ValueError(f"limit law is defined for EBEL1/EBEL2, not {scheme}")
    return scheme


def _riemann_points(X: np.ndarray, wt: np.ndarray, backward: bool) -> np.ndarray:
    f = wt[:, None] * X
    if not backward:
        return f
    m = X.shape[0]
    Xfull = np.vstack([np.zeros((1, X.shape[1])), X])
    fb = wt[:, None] * (Xfull[m] - Xfull[m - 1::-1])
    return np.vstack([f, fb])


def _riemann_draw(points: np.ndarray, m: int) -> float:
    return -log_el_ratio(points, DEFAULT_TOL, _MAX_ITER) / m


def _bridge_bounds(X: np.ndarray, w: WeightFn, backward: bool, rng: np.random.Generator):
    """Lower/upper extremes of the weighted path(s) over ``[0, 1]``."""
    m = X.shape[0]
    x = X[:, 0]
    prev = np.concatenate([[0.0], x[:-1]])
    dt = 1.0 / m
    # 1 - U lies in (0, 1], so the logs are finite
    expo = -2.0 * dt * np.log1p(-rng.random((2, m)))
    jump2 = (x - prev) ** 2
    lo = 0.5 * (prev + x - np.sqrt(jump2 + expo[0]))
    hi = 0.5 * (prev + x + np.sqrt(jump2 + expo[1]))
    grid = np.arange(m + 1) / m
    wg = w.shape(grid)
    wmax = np.maximum(wg[:-1], wg[1:])
    wmin = np.minimum(wg[:-1], wg[1:])

    def extremes(low, high):
        fmin = np.where(low < 0, wmax * low, wmin * low)
        fmax = np.where(high > 0, wmax * high, wmin * high)
        return fmin.min(), fmax.max()

    fmin, fmax = extremes(lo, hi)
    if backward:
        end = x[-1]
        bmin, bmax = extremes(end - hi[::-1], end - lo[::-1])
        fmin, fmax = min(fmin, bmin), max(fmax, bmax)
    return fmin, fmax


def _bridge_draw(points: np.ndarray, fmin: float, fmax: float, m: int) -> float:
    P = points[:, 0]
    lower = -1.0 / fmax
    upper = -1.0 / fmin

    def deriv(a):
        return -np.sum(P / (1.0 + a * P))

    def value(a):
        return -np.sum(np.log1p(a * P))

    if deriv(upper) <= 0:
        a = upper
    elif deriv(lower) >= 0:
        a = lower
    else:
        lam, v = weighted_dual(points, np.ones(P.shape[0]), DEFAULT_TOL, _MAX_ITER)
        return -v / m
    return -value(a) / m


def _draw(scheme: BlockScheme, w: WeightFn, d: int, m: int, rng, shift, discretization) -> float:
    if m < 100:
        raise ValueError("grid size m must be at least 100")
    method = _resolve_discretization(discretization, d)
    path = simulate_brownian_path(m, d, rng)
    X = path.values
    if shift is not None:
        shift = np.atleast_1d(np.asarray(shift, dtype=float))
        if shift.shape != (d,):
            raise ValueError(f"shift must have shape ({d},)")
        X = X + path.times[:, None] * shift
    wt = w.shape(path.times)
    backward = scheme.tag == "EBEL2"
    points = _riemann_points(X, wt, backward)
    if method == "riemann":
        return _riemann_draw(points, m)
    fmin, fmax = _bridge_bounds(X, w, backward, rng)
    return _bridge_draw(points, fmin, fmax, m)


def limit_draw(scheme, w: WeightFn, d: int, m: int, rng: np.random.Generator,
               discretization: str = "auto") -> float:
    """One draw of the approximated limit variable ``-g_d(Y_d)`` (or its EBEL2 analogue).

    Returns ``+inf`` only for the ``riemann`` discretisation when the grid
    points fail the hull condition.
    """
    return _draw(_scheme(scheme), w, d, m, rng, None, discretization)


def limit_draw_local_alternative(w: WeightFn, d: int, m: int, shift, rng: np.random.Generator,
                                 scheme=EBEL1, discretization: str = "auto") -> float:
    """Draw under a local alternative: the path is ``B(t) + t * shift``.

    ``shift`` plays the role of ``Sigma^{-1/2} c``. A zero shift reproduces
    :func:`limit_draw` for the same stream.
    """
    return _draw(_scheme(scheme), w, d, m, rng, shift, discretization)


def _run_chunk(args):
    scheme, w, d, m, seed, start, stop, shift, discretization = args
    out = np.empty(stop - start)
    for k, idx in enumerate(range(start, stop)):
        out[k] = _draw(scheme, w, d, m, replicate_rng(seed, idx), shift, discretization)
    return start, out


def simulate_limit_draws(scheme, w: WeightFn, d: int, m: int, replicates: int, seed: int,
                         shift=None, discretization: str = "auto",
                         threads: Optional[int] = None) -> np.ndarray:
    """``replicates`` independent draws; draw ``i`` uses stream ``(seed, i)``.

    The result does not depend on ``threads``.
    """
    scheme = _scheme(scheme)
    _resolve_discretization(discretization, d)
    threads = threads or os.cpu_count() or 1
    chunk = max(1, min(2000, -(-replicates // threads)))
    jobs = [(scheme, w, d, m, seed, s, min(s + chunk, replicates), shift, discretization)
            for s in range(0, replicates, chunk)]
    draws = np.empty(replicates)
    if threads == 1 or len(jobs) == 1:
        results = map(_run_chunk, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(_run_chunk, jobs)
    for start, out in results:
        draws[start:start + out.size] = out
    if threads != 1 and len(jobs) != 1:
        pool.shutdown()
    return draws


def sample_quantiles(draws: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    """Empirical quantiles by inverting the ECDF (well defined with ``+inf`` draws)."""
    return np.quantile(np.asarray(draws, dtype=float), levels, method="inverted_cdf")


def bootstrap_quantile_stderr(draws: np.ndarray, levels: Sequence[float], resamples: int = 200,
                              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Bootstrap standard error of each empirical quantile."""
    rng = np.random.default_rng() if rng is None else rng
    draws = np.asarray(draws, dtype=float)
    n = draws.size
    boot = np.empty((resamples, len(levels)))
    for r in range(resamples):
        boot[r] = sample_quantiles(draws[rng.integers(0, n, n)], levels)
    with np.errstate(invalid="ignore"):
        return boot.std(axis=0, ddof=1)


@dataclass
class QuantileTable:
    """Simulated quantiles of a limit law with Monte Carlo standard errors."""

    scheme: str
    weight: str
    d: int
    levels: List[float]
    quantiles: List[float]
    mc_stderr: List[float]
    replicates: int
    grid_size: int
    seed: int
    discretization: str = "bridge"
    hull_failures: int = 0
    draws: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    COLUMNS = ("scheme", "weight", "d", "level", "quantile", "stderr", "replicates", "grid",
               "seed", "quantile_full", "stderr_full", "discretization")

    def quantile(self, level: float) -> float:
        for lv, q in zip(self.levels, self.quantiles):
            if abs(lv - level) < 1e-12:
                return q
        raise KeyError(f"level {level} not tabulated (have {self.levels})")

    def matches(self, scheme: str, weight: str, d: int) -> bool:
        return (self.scheme == str(scheme).upper() and self.weight == weight and self.d == d)

    def rows(self):
        for lv, q, se in zip(self.levels, self.quantiles, self.mc_stderr):
            yield {
                "scheme": self.scheme, "weight": self.weight, "d": self.d,
                "level": f"{lv:.6g}", "quantile": f"{q:.6g}", "stderr": f"{se:.6g}",
                "replicates": self.replicates, "grid": self.grid_size, "seed": self.seed,
                "quantile_full": repr(float(q)), "stderr_full": repr(float(se)),
                "discretization": self.discretization,
            }

    def to_csv(self, handle=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        text = buf.getvalue()
        if handle is not None:
            handle.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> List["QuantileTable"]:
        """Parse one or more tables from CSV text (``#`` comment lines ignored)."""
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        tables = {}
        for row in csv.DictReader(lines):
            key = (row["scheme"], row["weight"], int(row["d"]), int(row["replicates"]),
                   int(row["grid"]), int(row["seed"]), row.get("discretization") or "bridge")
            t = tables.get(key)
            if t is None:
                t = tables[key] = cls(key[0], key[1], key[2], [], [], [], key[3], key[4], key[5],
                                      key[6])
            t.levels.append(float(row["level"]))
            t.quantiles.append(float(row.get("quantile_full") or row["quantile"]))
            t.mc_stderr.append(float(row.get("stderr_full") or row["stderr"]))
        return list(tables.values())


def estimate_quantiles(scheme, w: WeightFn, d: int, levels: Sequence[float],
                       replicates: int = 50_000, m: int = 1000, seed: int = 0,
                       discretization: str = "auto", threads: Optional[int] = None,
                       bootstrap_resamples: int = 200) -> QuantileTable:
    """Tabulate quantiles of the limit law at ``levels``.

    Standard errors come from ``bootstrap_resamples`` bootstrap resamples
    of the pooled draws.
    """
    if replicates < 1000:
        raise ValueError("need at least 1000 replicates")
    levels = [float(lv) for lv in levels]
    if any(not 0 < lv < 1 for lv in levels):
        raise ValueError("levels must lie in (0, 1)")
    scheme = _scheme(scheme)
    method = _resolve_discretization(discretization, d)
    draws = simulate_limit_draws(scheme, w, d, m, replicates, seed, None, method, threads)
    q = sample_quantiles(draws, levels)
    se = bootstrap_quantile_stderr(draws, levels, bootstrap_resamples,
                                   replicate_rng(seed, replicates, _BOOTSTRAP_TAG))
    return QuantileTable(scheme.tag, w.kind, d, levels, q.tolist(), se.tolist(), replicates, m,
                         seed, method, int(np.sum(~np.isfinite(draws))), draws)
