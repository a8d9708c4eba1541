"""Expansive block EL statistics, regions and profile statistics.

For a sample ``X_1..X_n`` and candidate mean ``mu`` the statistic is
``-(1/n) log R_n(mu)`` with ``R_n`` the EL ratio of the EBEL1 (forward) or
EBEL2 (forward and backward) block sums. The same ``1/n`` normalisation is
used for EBEL2 even though it has ``2n`` points. Regions are
``{mu : statistic(mu) <= a}`` with ``a`` a quantile of the limit law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize

from ._intervals import ConfidenceInterval, degenerate_or_raise, is_constant, search_endpoint
from .blocking import EBEL1, BlockScheme, WeightFn, as_series, scheme_block_sums
from .el_core import log_el_ratio
from .errors import DimensionMismatch, HullViolation, ProfileNonConvergence
from .limit_law import REFERENCE_90TH, QuantileTable

__all__ = [
    "EbelConfig",
    "SmoothFunctionModel",
    "EstimatingFunction",
    "ebel_statistic",
    "ebel_ci_mean",
    "ebel_region_member",
    "ebel_statistic_smooth",
    "ebel_statistic_ef",
]

Calibration = Union[QuantileTable, float, None]
_INFEASIBLE = 1e30
# fallback scan for a feasible profile start, in units of sd / sqrt(n)
_SCAN_RADIUS = 8
_SCAN_POINTS = 400


@dataclass(frozen=True)
class EbelConfig:
    """Scheme, weight and calibration of an EBEL procedure.

    ``calibration`` may be a :class:`QuantileTable` (checked against scheme,
    weight kind and dimension), a fixed critical value, or ``None`` to fall
    back to the tabulated 90th percentiles for ``d = 1``.
    """

    scheme: BlockScheme = EBEL1
    weight: WeightFn = field(default_factory=WeightFn.constant)
    level: float = 0.9
    calibration: Calibration = None

    def __post_init__(self):
        scheme = self.scheme
        if isinstance(scheme, str):
            scheme = BlockScheme.parse(scheme)
            object.__setattr__(self, "scheme", scheme)
        if scheme.tag not in ("EBEL1", "EBEL2"):
            raise ValueError(f"EbelConfig needs EBEL1 or EBEL2, got {scheme}")
        if isinstance(self.weight, str):
            object.__setattr__(self, "weight", WeightFn.from_name(self.weight))
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        self.weight.validate()

    @property
    def label(self) -> str:
        return f"{self.scheme.tag}-{self.weight.kind}"

    def critical_value(self, d: int = 1) -> float:
        cal = self.calibration
        if isinstance(cal, QuantileTable):
            if not cal.matches(self.scheme.tag, self.weight.kind, d):
                raise ValueError(
                    f"calibration table is for ({cal.scheme}, {cal.weight}, d={cal.d}), "
                    f"not ({self.scheme.tag}, {self.weight.kind}, d={d})")
            return float(cal.quantile(self.level))
        if cal is not None:
            return float(cal)
        key = (self.scheme.tag, self.weight.kind)
        if d == 1 and abs(self.level - 0.9) < 1e-12 and key in REFERENCE_90TH:
            return REFERENCE_90TH[key]
        raise ValueError(f"no calibration available for {self.label}, d={d}, level={self.level}")


def _cfg(cfg: Optional[EbelConfig]) -> EbelConfig:
    return EbelConfig() if cfg is None else cfg


def _statistic_from_sums(T: np.ndarray, n: int) -> float:
    return -log_el_ratio(T) / n


def ebel_statistic(X, mu, cfg: Optional[EbelConfig] = None) -> float:
    """``-(1/n) log R_n(mu)``; ``+inf`` when the hull condition fails."""
    cfg = _cfg(cfg)
    X = as_series(X)
    T = scheme_block_sums(X, mu, cfg.scheme, cfg.weight)
    return _statistic_from_sums(T, X.shape[0])


def ebel_region_member(X, mu, cfg: Optional[EbelConfig] = None) -> bool:
    cfg = _cfg(cfg)
    X = as_series(X)
    return bool(ebel_statistic(X, mu, cfg) <= cfg.critical_value(X.shape[1]))


def ebel_ci_mean(X, cfg: Optional[EbelConfig] = None, strict: bool = False) -> ConfidenceInterval:
    """Interval ``{mu : statistic(mu) <= a}`` for a univariate series.

    Endpoints are bracketed by stepping outward from the sample mean in
    units of ``s / sqrt(n)`` and bisected to ``1e-8 s`` (``s`` the sample
    standard deviation), so the interval is the connected piece of the
    region containing the sample mean.
    """
    cfg = _cfg(cfg)
    x = as_series(X)
    if x.shape[1] != 1:
        raise DimensionMismatch("ebel_ci_mean needs a univariate series")
    x = x[:, 0]
    if is_constant(x):
        return degenerate_or_raise(x, cfg.level, cfg.label, strict)
    a = cfg.critical_value(1)
    n = x.size
    center = float(x.mean())
    sd = float(x.std(ddof=1))

    def stat(mu):
        return ebel_statistic(x, mu, cfg)

    lo = search_endpoint(stat, center, -sd / math.sqrt(n), a, 1e-8 * sd)
    hi = search_endpoint(stat, center, sd / math.sqrt(n), a, 1e-8 * sd)
    return ConfidenceInterval(lo, hi, cfg.level, cfg.label)


class SmoothFunctionModel:
    """``theta = H(mu)`` with ``H : R^d -> R^p``, ``p <= d``.

    Parameters
    ----------
    H : callable
        Maps a length-``d`` array to a length-``p`` array (or scalar).
    jacobian : callable, optional
        Returns the ``(p, d)`` Jacobian; central differences otherwise.
    """

    RANK_TOL = 1e-8

    def __init__(self, H: Callable, jacobian: Optional[Callable] = None):
        self.H = H
        self._jacobian = jacobian

    def value(self, mu) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.H(np.asarray(mu, dtype=float)), dtype=float))

    def jacobian(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if self._jacobian is not None:
            J = np.asarray(self._jacobian(mu), dtype=float)
            return J.reshape(-1, mu.size)
        J = np.empty((self.value(mu).size, mu.size))
        for k in range(mu.size):
            h = 1e-6 * max(1.0, abs(mu[k]))
            e = np.zeros(mu.size)
            e[k] = h
            J[:, k] = (self.value(mu + e) - self.value(mu - e)) / (2 * h)
        return J

    def check_rank(self, mu) -> np.ndarray:
        J = self.jacobian(mu)
        p, d = J.shape
        if p > d:
            raise DimensionMismatch(f"H maps R^{d} to R^{p}; need p <= d")
        if np.linalg.svd(J, compute_uv=False).min() <= self.RANK_TOL:
            raise ValueError("Jacobian of H is rank deficient at the evaluation point")
        return J

    def project(self, mu, theta, max_iter: int = 50) -> Optional[np.ndarray]:
        """Gauss-Newton (minimum-norm steps) onto ``{H(mu) = theta}``.

        Returns ``None`` if the residual cannot be driven below ``1e-10``.
        """
        mu = np.array(mu, dtype=float)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r = self.value(mu) - theta
        rnorm = np.linalg.norm(r)
        for _ in range(max_iter):
            if rnorm == 0.0:
                break
            J = self.jacobian(mu)
            cand = mu - np.linalg.lstsq(J, r, rcond=None)[0]
            r_new = self.value(cand) - theta
            new_norm = np.linalg.norm(r_new)
            if not np.isfinite(new_norm) or new_norm >= rnorm:
                break
            mu, r, rnorm = cand, r_new, new_norm
        scale = 1.0 + np.linalg.norm(theta)
        return mu if rnorm <= 1e-10 * scale else None


def ebel_statistic_smooth(X, model: SmoothFunctionModel, theta, cfg: Optional[EbelConfig] = None,
                          restarts: int = 3, seed: int = 0) -> float:
    """Profile statistic ``min {-(1/n) log R_n(mu) : H(mu) = theta}``.

    The search starts at the sample mean projected onto the constraint
    manifold and runs Nelder-Mead on the chart ``mu0 + N z`` (``N`` a basis
    of the Jacobian's null space, each trial point projected back), from the
    start and ``restarts`` perturbed starts. If the projected mean is
    outside the region of finite values, the starts are the best feasible
    points of a scan over the chart.

    Raises
    ------
    ProfileNonConvergence
        If no start produces a finite converged value.
    """
    cfg = _cfg(cfg)
    X = as_series(X)
    n, d = X.shape
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    mu0 = model.project(X.mean(axis=0), theta)
    if mu0 is None:
        raise ProfileNonConvergence("could not project the sample mean onto {H(mu) = theta}")
    J = model.check_rank(mu0)
    p = J.shape[0]
    if p == d:
        return ebel_statistic(X, mu0, cfg)
    N = np.linalg.svd(J)[2][p:].T  # (d, d - p) null-space basis

    def objective(z):
        mu = model.project(mu0 + N @ z, theta)
        value = np.inf if mu is None else ebel_statistic(X, mu, cfg)
        # a finite stand-in keeps the simplex comparisons well defined
        return value if np.isfinite(value) else _INFEASIBLE

    scale = X.std(axis=0, ddof=1).mean() / math.sqrt(n)
    rng = np.random.default_rng(seed)
    k = d - p
    if objective(np.zeros(k)) < _INFEASIBLE:
        starts = [np.zeros(k)] + [rng.standard_normal(k) * scale for _ in range(restarts)]
    else:
        # the projected mean fails the hull condition; look further out on the manifold
        if k <= 2:
            axis = np.arange(-_SCAN_RADIUS, _SCAN_RADIUS + 1, 1.0)
            cand = np.stack(np.meshgrid(*[axis] * k), axis=-1).reshape(-1, k)
        else:
            cand = rng.uniform(-_SCAN_RADIUS, _SCAN_RADIUS, size=(_SCAN_POINTS, k))
        cand = cand * scale
        vals = np.array([objective(z) for z in cand])
        order = [i for i in np.argsort(vals, kind="stable") if vals[i] < _INFEASIBLE]
        if not order:
            return np.inf
        starts = [cand[i] for i in order[:1 + restarts]]
    finite, converged = [], False
    for z0 in starts:
        simplex = np.vstack([z0, z0 + scale * np.eye(k)])
        res = minimize(objective, z0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "fatol": 1e-7, "xatol": 1e-9 * scale,
                                "maxfev": 2000 * k})
        if res.fun < _INFEASIBLE:
            finite.append(float(res.fun))
            converged = converged or bool(res.success)
    if not finite:
        # no feasible mu found near the manifold point: theta is outside the region
        return np.inf
    if not converged:
        raise ProfileNonConvergence("profile search did not converge from any start")
    return min(finite)


@dataclass(frozen=True)
class EstimatingFunction:
    """``G(x; theta)`` with ``E G(X_t; theta_0) = 0``.

    With ``vectorized=True`` ``G`` receives the whole ``(n, d)`` sample and
    must return ``(n, p)`` (or ``(n,)``) values.
    """

    G: Callable
    vectorized: bool = False

    def evaluate(self, X, theta) -> np.ndarray:
        X = as_series(X)
        if self.vectorized:
            V = np.asarray(self.G(X, theta), dtype=float)
        else:
            V = np.array([np.atleast_1d(np.asarray(self.G(x, theta), dtype=float)) for x in X])
        if V.ndim == 1:
            V = V[:, None]
        if V.ndim != 2 or V.shape[0] != X.shape[0]:
            raise DimensionMismatch(f"G returned shape {V.shape} for {X.shape[0]} observations")
        return V


def ebel_statistic_ef(X, G: EstimatingFunction, theta, cfg: Optional[EbelConfig] = None) -> float:
    """EBEL statistic with block sums of ``G(X_j; theta)`` in place of ``X_j - mu``.

    Raises
    ------
    HullViolation
        If ``G`` vanishes on every observation.
    """
    cfg = _cfg(cfg)
    V = G.evaluate(X, theta)
    if not np.any(V):
        raise HullViolation("estimating function is identically zero on the sample")
    T = scheme_block_sums(V, np.zeros(V.shape[1]), cfg.scheme, cfg.weight)
    return _statistic_from_sums(T, V.shape[0])
