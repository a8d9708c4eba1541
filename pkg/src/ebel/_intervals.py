from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateSample

_MAX_BRACKET_STEPS = 10_000
_MAX_BISECT = 60


class DegenerateSampleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: str
    degenerate: bool = False
    block_length: Optional[int] = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper


def degenerate_or_raise(x: np.ndarray, level: float, method: str, strict: bool):
    """Zero-width interval for a constant series (or raise when ``strict``)."""
    c = float(x[0])
    if strict:
        raise DegenerateSample("series is constant; no confidence interval can be formed")
    warnings.warn("constant series: returning a zero-width interval", DegenerateSampleWarning,
                  stacklevel=3)
    return ConfidenceInterval(c, c, level, method, degenerate=True)


def is_constant(x: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(x))))
    return float(np.ptp(x)) <= 1e-12 * scale


def search_endpoint(stat: Callable[[float], float], inside: float, step: float,
                    threshold: float, tol: float) -> float:
    """Boundary of ``{mu : stat(mu) <= threshold}`` reached from ``inside``.

    Steps by ``step`` (signed) until the statistic exceeds the threshold or
    becomes infinite, then bisects down to ``tol``.
    """
    lo = inside
    hi = None
    for k in range(1, _MAX_BRACKET_STEPS + 1):
        cand = inside + k * step
        if not stat(cand) <= threshold:
            hi = cand
            break
        lo = cand
    if hi is None:
        raise RuntimeError("could not bracket the interval endpoint")
    for _ in range(_MAX_BISECT):
        if abs(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if stat(mid) <= threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
