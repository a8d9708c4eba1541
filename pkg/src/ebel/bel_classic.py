"""Standard blockwise EL with overlapping blocks of fixed length.

The statistic ``-(2/b) log R_BEL(mu)`` is calibrated by the chi-square
law with ``d`` degrees of freedom. Two plug-in rules choose ``b`` from the
data, both of the form ``C n^{1/3}``:

* FTK: flat-top lag-window estimates (trapezoid kernel, bandwidth
  ``n^{1/5}``) of ``G = sum |k| R(k)`` and ``g = sum R(k)`` plugged into the
  MSE-optimal Bartlett/overlapping-block length ``(3 G^2 / (2 g^2))^{1/3}``.
* AAR: the AR(1) plug-in for the Bartlett kernel,
  ``1.1447 (alpha(1) n)^{1/3}`` with ``alpha(1) = 4 rho^2 / ((1-rho)^2 (1+rho)^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy.stats import chi2

from ._intervals import ConfidenceInterval, degenerate_or_raise, is_constant, search_endpoint
from .blocking import as_series, ol_block_sums
from .el_core import log_el_ratio
from .errors import BlockLengthError, DegenerateSample, DimensionMismatch

__all__ = [
    "BlockSelection",
    "bel_statistic",
    "bel_ci_mean",
    "chi2_quantile",
    "select_block_ftk",
    "select_block_aar",
    "select_block",
    "flat_top",
]

AAR_CONSTANT = 1.1447
_RHO_CLIP = 0.99


@dataclass(frozen=True)
class BlockSelection:
    rule: str
    chosen_b: int
    diagnostics: Dict[str, float] = field(default_factory=dict)


def chi2_quantile(level: float, df: int = 1) -> float:
    return float(chi2.ppf(level, df))


def bel_statistic(X, mu, b: int) -> float:
    """``-(2/b) log R_BEL(mu)``; ``+inf`` when the hull condition fails."""
    T = ol_block_sums(X, mu, b)
    return -2.0 / b * log_el_ratio(T)


def _univariate(X) -> np.ndarray:
    x = as_series(X)
    if x.shape[1] != 1:
        raise DimensionMismatch("a univariate series is required")
    return x[:, 0]


def bel_ci_mean(X, b: int, level: float = 0.9, strict: bool = False) -> ConfidenceInterval:
    """Interval ``{mu : -(2/b) log R_BEL(mu) <= chi2_1(level)}``.

    Endpoints are bracketed by stepping outward from the sample mean and then
    bisected. A constant series yields a zero-width interval with a warning,
    or :class:`DegenerateSample` when ``strict``.
    """
    x = _univariate(X)
    n = x.size
    if not 1 <= b <= n:
        raise BlockLengthError(f"block length must lie in [1, {n}], got {b}")
    if is_constant(x):
        return degenerate_or_raise(x, level, "BEL", strict)
    q = chi2_quantile(level, 1)
    center = float(x.mean())
    sd = float(x.std(ddof=1))
    step = sd / math.sqrt(n)
    tol = 1e-8 * sd

    def stat(mu):
        return bel_statistic(x, mu, b)

    lo = search_endpoint(stat, center, -step, q, tol)
    hi = search_endpoint(stat, center, step, q, tol)
    return ConfidenceInterval(lo, hi, level, f"BEL({b})", block_length=b)


def flat_top(x: np.ndarray) -> np.ndarray:
    """Trapezoidal flat-top kernel: 1 on [0, 1/2], linear down to 0 at 1."""
    ax = np.abs(x)
    return np.where(ax <= 0.5, 1.0, np.where(ax <= 1.0, 2.0 * (1.0 - ax), 0.0))


def _autocovariances(x: np.ndarray, max_lag: int) -> np.ndarray:
    c = x - x.mean()
    n = c.size
    return np.array([np.dot(c[: n - k], c[k:]) / n for k in range(max_lag + 1)])


def _clamp_round(value: float, n: int) -> int:
    # half-up rounding, then clamp to [1, n/2]
    b = math.floor(value + 0.5) if np.isfinite(value) else n
    return int(min(max(b, 1), max(1, n // 2)))


def _check_selection_input(X) -> np.ndarray:
    x = _univariate(X)
    if x.size < 20:
        raise ValueError("block selection needs at least 20 observations")
    if is_constant(x) or x.var() <= 1e-300:
        raise DegenerateSample("series has (numerically) zero variance")
    return x


def select_block_ftk(X) -> BlockSelection:
    """Flat-top kernel plug-in block length for BEL."""
    x = _check_selection_input(X)
    n = x.size
    M = n ** 0.2
    lags = np.arange(0, int(math.floor(M)) + 1)
    R = _autocovariances(x, int(lags[-1]))
    lam = flat_top(lags / M)
    G = 2.0 * np.sum(lam[1:] * lags[1:] * R[1:])
    g = R[0] + 2.0 * np.sum(lam[1:] * R[1:])
    g_source = "flat_top"
    if g <= 0:
        # flat-top estimate is not guaranteed positive; Bartlett weights are
        bart = 1.0 - lags / (lags[-1] + 1.0)
        g = R[0] + 2.0 * np.sum(bart[1:] * R[1:])
        g_source = "bartlett"
    D = 4.0 / 3.0 * g ** 2
    C = (2.0 * G ** 2 / D) ** (1.0 / 3.0)
    raw = C * n ** (1.0 / 3.0)
    return BlockSelection("FTK", _clamp_round(raw, n), {
        "bandwidth": M, "G": float(G), "g": float(g), "C": float(C), "raw_b": float(raw),
        "g_from_bartlett": float(g_source == "bartlett"),
    })


def select_block_aar(X) -> BlockSelection:
    """Andrews' AR(1) plug-in (Bartlett kernel) block length for BEL."""
    x = _check_selection_input(X)
    n = x.size
    c = x - x.mean()
    rho = float(np.dot(c[1:], c[:-1]) / np.dot(c, c))
    rho_used = min(max(rho, -_RHO_CLIP), _RHO_CLIP)
    alpha = 4.0 * rho_used ** 2 / ((1.0 - rho_used) ** 2 * (1.0 + rho_used) ** 2)
    raw = AAR_CONSTANT * (alpha * n) ** (1.0 / 3.0)
    return BlockSelection("AAR", _clamp_round(raw, n), {
        "rho": rho, "rho_used": rho_used, "alpha1": alpha, "raw_b": float(raw),
    })


def select_block(X, rule) -> BlockSelection:
    """Dispatch on ``rule``: ``"ftk"``, ``"aar"`` or an integer block length."""
    if isinstance(rule, (int, np.integer)):
        n = as_series(X).shape[0]
        if not 1 <= rule <= n:
            raise BlockLengthError(f"block length must lie in [1, {n}], got {rule}")
        return BlockSelection("fixed", int(rule), {})
    key = str(rule).lower()
    if key == "ftk":
        return select_block_ftk(X)
    if key == "aar":
        return select_block_aar(X)
    if key.isdigit():
        return select_block(X, int(key))
    raise ValueError(f"unknown block rule {rule!r}")
