"""Weight functions and centered block sums for the EL schemes.

Three schemes are supported:

* ``EBEL1``: forward expansive blocks ``(X_1), (X_1, X_2), ..., (X_1..X_n)``
  giving ``T_i = w(i/n) * sum_{j<=i} (X_j - mu)``.
* ``EBEL2``: the forward sums followed by the same sums over the reversed
  series, ``T_{n+i} = w(i/n) * sum_{j<=i} (X_{n-j+1} - mu)``.
* ``BEL(b)``: maximally overlapping blocks of fixed length ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import BlockLengthError, DimensionMismatch, DomainError

__all__ = [
    "WeightFn",
    "BlockScheme",
    "EBEL1",
    "EBEL2",
    "BEL",
    "as_series",
    "weight_eval",
    "forward_block_sums",
    "forward_backward_block_sums",
    "ol_block_sums",
    "scheme_block_sums",
]

_KINDS = ("constant", "linear", "cosine_bell", "tabulated")
_VALIDATION_GRID = 1024


@dataclass(frozen=True)
class WeightFn:
    """Nonnegative weight function on ``[0, 1]``.

    ``kind`` is one of ``constant`` (``w = 1``), ``linear`` (``w = t``),
    ``cosine_bell`` (``w = (1 - cos 2 pi t) / 2``) or ``tabulated``
    (piecewise linear through ``table``). ``scale`` multiplies the shape;
    the EL statistics do not depend on it.
    """

    kind: str = "constant"
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; expected one of {_KINDS}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("weight scale must be positive and finite")
        if self.kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise ValueError("tabulated weight needs at least two (t, w) knots")
            knots = np.asarray(self.table, dtype=float)
            object.__setattr__(self, "table", tuple(map(tuple, knots.tolist())))
            ts = knots[:, 0]
            if np.any(np.diff(ts) <= 0) or ts[0] > 0 or ts[-1] < 1:
                raise ValueError("tabulated knots must be increasing and cover [0, 1]")
        elif self.table is not None:
            raise ValueError(f"table only applies to tabulated weights, not {self.kind!r}")
        self.validate()

    @classmethod
    def constant(cls, scale: float = 1.0) -> "WeightFn":
        return cls("constant", scale=scale)

    @classmethod
    def linear(cls, scale: float = 1.0) -> "WeightFn":
        return cls("linear", scale=scale)

    @classmethod
    def cosine_bell(cls, scale: float = 1.0) -> "WeightFn":
        return cls("cosine_bell", scale=scale)

    @classmethod
    def tabulated(cls, knots: Sequence[Tuple[float, float]], scale: float = 1.0) -> "WeightFn":
        return cls("tabulated", table=tuple(tuple(k) for k in knots), scale=scale)

    @classmethod
    def from_name(cls, name: str) -> "WeightFn":
        aliases = {"constant": "constant", "const": "constant", "1": "constant",
                   "linear": "linear", "lin": "linear", "t": "linear",
                   "cosine_bell": "cosine_bell", "cosine-bell": "cosine_bell",
                   "cosine": "cosine_bell", "cos": "cosine_bell"}
        try:
            return cls(aliases[name.lower()])
        except KeyError:
            raise ValueError(f"unknown weight {name!r}") from None

    def scaled(self, c: float) -> "WeightFn":
        return WeightFn(self.kind, self.table, self.scale * c)

    def _shape(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.ones_like(t)
        if self.kind == "linear":
            return t.copy()
        if self.kind == "cosine_bell":
            return (1.0 - np.cos(2.0 * np.pi * t)) / 2.0
        knots = np.asarray(self.table)
        return np.interp(t, knots[:, 0], knots[:, 1])

    def __call__(self, t):
        return self._evaluate(t, self.scale)

    def shape(self, t):
        """The weight without its ``scale`` factor.

        Block sums are built from the shape: the EL ratio is unchanged by a
        positive multiple of the points, and dropping the factor makes the
        statistics for ``w`` and ``c * w`` identical bit for bit.
        """
        return self._evaluate(t, 1.0)

    def _evaluate(self, t, scale):
        arr = np.asarray(t, dtype=float)
        if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
            raise DomainError("weight functions are defined on [0, 1] only")
        out = self._shape(np.atleast_1d(arr))
        if scale != 1.0:
            out = scale * out
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    def validate(self) -> None:
        """Check nonnegativity and positivity just to the right of 0.

        Uses a grid of 1024 points on ``[0, 1]``; the two grid points after
        0 must both carry positive weight.
        """
        grid = np.linspace(0.0, 1.0, _VALIDATION_GRID)
        vals = self.scale * self._shape(grid)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError(f"weight {self.kind!r} takes negative or non-finite values on [0, 1]")
        if not (vals[1] > 0 and vals[2] > 0):
            raise ValueError(f"weight {self.kind!r} is not positive on an interval (0, c)")

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class BlockScheme:
    """Blocking rule: ``EBEL1``, ``EBEL2`` or ``BEL`` with block length ``b``."""

    tag: str
    b: Optional[int] = field(default=None)

    def __post_init__(self):
        tag = self.tag.upper()
        object.__setattr__(self, "tag", tag)
        if tag not in ("EBEL1", "EBEL2", "BEL"):
            raise ValueError(f"unknown block scheme {self.tag!r}")
        if tag == "BEL":
            if self.b is None or int(self.b) < 1:
                raise BlockLengthError("BEL needs a block length b >= 1")
            object.__setattr__(self, "b", int(self.b))
        elif self.b is not None:
            raise ValueError(f"{tag} does not take a block length")

    @classmethod
    def parse(cls, text: str) -> "BlockScheme":
        text = text.strip().upper()
        if text.startswith("BEL"):
            inner = text[3:].strip("():= ")
            return cls("BEL", int(inner))
        return cls(text)

    def __str__(self) -> str:
        return f"BEL({self.b})" if self.tag == "BEL" else self.tag


EBEL1 = BlockScheme("EBEL1")
EBEL2 = BlockScheme("EBEL2")


def BEL(b: int) -> BlockScheme:
    return BlockScheme("BEL", b)


def as_series(X) -> np.ndarray:
    """Return the sample as a float ``(n, d)`` array (1-d input means ``d = 1``)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"time series must be 1-d or 2-d, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("time series contains non-finite values")
    return arr


def _centered(X, mu) -> np.ndarray:
    X = as_series(X)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.ndim != 1 or mu.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"mu has shape {mu.shape}, series has dimension {X.shape[1]}")
    return X - mu


def weight_eval(w: WeightFn, t: float) -> float:
    """Evaluate ``w(t)`` for ``t`` in ``[0, 1]``."""
    return w(t)


def _forward(C: np.ndarray, w: WeightFn) -> np.ndarray:
    n = C.shape[0]
    weights = w.shape(np.arange(1, n + 1) / n)
    return weights[:, None] * np.cumsum(C, axis=0)


def forward_block_sums(X, mu, w: WeightFn) -> np.ndarray:
    """``T_i = w(i/n) sum_{j<=i} (X_j - mu)`` for ``i = 1..n`` as an ``(n, d)`` array."""
    C = _centered(X, mu)
    if C.shape[0] < 2:
        raise DimensionMismatch("need at least two observations")
    return _forward(C, w)


def forward_backward_block_sums(X, mu, w: WeightFn) -> np.ndarray:
    """Forward sums followed by the forward sums of the reversed series, ``(2n, d)``."""
    C = _centered(X, mu)
    if C.shape[0] < 2:
        raise DimensionMismatch("need at least two observations")
    return np.vstack([_forward(C, w), _forward(C[::-1], w)])


def ol_block_sums(X, mu, b: int) -> np.ndarray:
    """Overlapping block sums of length ``b``: ``n - b + 1`` rows."""
    C = _centered(X, mu)
    n = C.shape[0]
    b = int(b)
    if not 1 <= b <= n:
        raise BlockLengthError(f"block length must lie in [1, {n}], got {b}")
    N = n - b + 1
    # sequential accumulation in time order, so b = n reproduces the cumsum
    # total bit-for-bit and b = 1 returns the centered values themselves
    out = C[:N].copy()
    for k in range(1, b):
        out += C[k:k + N]
    return out


def scheme_block_sums(X, mu, scheme: BlockScheme, w: Optional[WeightFn] = None) -> np.ndarray:
    """Dispatch to the block-sum builder for ``scheme``."""
    if scheme.tag == "BEL":
        return ol_block_sums(X, mu, scheme.b)
    w = WeightFn.constant() if w is None else w
    if scheme.tag == "EBEL1":
        return forward_block_sums(X, mu, w)
    return forward_backward_block_sums(X, mu, w)
