"""Stationary test processes and their long-run variances.

ARMA recursion convention::

    X_t = sum_i phi_i X_{t-i} + e_t + sum_j theta_j e_{t-j}

started from a zero state, with ``burn_in`` initial values discarded.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np
from scipy.signal import lfilter
from scipy.stats import chi2

from .errors import NonCausal

__all__ = [
    "INNOVATIONS",
    "ArmaSpec",
    "Ma1StarSpec",
    "ProcessSpec",
    "COVERAGE_PROCESSES",
    "BLOCK_SENSITIVITY_MA2",
    "draw_innovations",
    "innovation_variance",
    "simulate_arma",
    "simulate_ma1_star",
    "simulate",
    "long_run_variance",
    "parse_process",
    "MA1_STAR_THRESHOLD",
]

INNOVATIONS = ("centered_chisq1", "standard_normal", "bernoulli_centered", "pareto_centered")
PARETO_SHAPE = 3.0
MA1_STAR_THRESHOLD = float(chi2.ppf(0.8, 1))


def innovation_variance(kind: str) -> float:
    if kind == "centered_chisq1":
        return 2.0
    if kind == "standard_normal":
        return 1.0
    if kind == "bernoulli_centered":
        return 0.25
    if kind == "pareto_centered":
        a = PARETO_SHAPE
        return a / ((a - 1.0) ** 2 * (a - 2.0))
    raise ValueError(f"unknown innovation {kind!r}")


def draw_innovations(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Mean-zero i.i.d. innovations.

    ``bernoulli_centered`` is Bernoulli(1/2) - 1/2; ``pareto_centered`` is a
    Pareto(shape 3, scale 1) variable minus its mean 3/2.
    """
    if kind == "centered_chisq1":
        return rng.standard_normal(size) ** 2 - 1.0
    if kind == "standard_normal":
        return rng.standard_normal(size)
    if kind == "bernoulli_centered":
        return rng.integers(0, 2, size).astype(float) - 0.5
    if kind == "pareto_centered":
        a = PARETO_SHAPE
        # numpy's pareto is the Lomax law, i.e. classical Pareto minus 1
        return rng.pareto(a, size) + 1.0 - a / (a - 1.0)
    raise ValueError(f"unknown innovation {kind!r}")


@dataclass(frozen=True)
class ArmaSpec:
    phi: Tuple[float, ...] = ()
    theta: Tuple[float, ...] = ()
    innovation: str = "centered_chisq1"
    burn_in: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"unknown innovation {self.innovation!r}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    @property
    def label(self) -> str:
        p, q = len(self.phi), len(self.theta)
        coefs = ",".join(f"{v:g}" for v in self.phi + self.theta)
        if p and q:
            name = f"ARMA({p},{q})"
        elif p:
            name = f"AR({p})"
        elif q:
            name = f"MA({q})"
        else:
            return "WN"
        return f"{name} {coefs}"

    def is_causal(self) -> bool:
        if not self.phi:
            return True
        # roots of 1 - phi_1 z - ... - phi_p z^p
        poly = np.concatenate([-np.asarray(self.phi)[::-1], [1.0]])
        return bool(np.all(np.abs(np.roots(poly)) > 1.0 + 1e-10))

    def check(self) -> None:
        if not self.is_causal():
            raise NonCausal(f"AR polynomial of {self.label} has a root on or inside the unit circle")


@dataclass(frozen=True)
class Ma1StarSpec:
    """``X_t = e_t + 0.5 I(e_{t-1} < q) - 1.4`` with ``e_t ~ chi2_1`` and ``q`` its 0.8 quantile."""

    threshold: float = MA1_STAR_THRESHOLD

    @property
    def label(self) -> str:
        return "MA(1)*"

    def check(self) -> None:
        pass


ProcessSpec = Union[ArmaSpec, Ma1StarSpec]


def simulate_arma(spec: ArmaSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    spec.check()
    total = n + spec.burn_in
    e = draw_innovations(spec.innovation, total, rng)
    x = lfilter(np.r_[1.0, spec.theta], np.r_[1.0, -np.asarray(spec.phi)], e)
    return x[spec.burn_in:]


def simulate_ma1_star(n: int, rng: np.random.Generator, spec: Ma1StarSpec = Ma1StarSpec()) -> np.ndarray:
    e = rng.standard_normal(n + 1) ** 2
    return e[1:] + 0.5 * (e[:-1] < spec.threshold) - 1.4


def simulate(spec: ProcessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, Ma1StarSpec):
        return simulate_ma1_star(n, rng, spec)
    return simulate_arma(spec, n, rng)


def long_run_variance(spec: ProcessSpec) -> float:
    """``sum_k cov(X_0, X_k)`` in closed form.

    Zero for degenerate specs (e.g. MA(1) with theta = -1); callers that
    need a positive value must check.
    """
    if isinstance(spec, Ma1StarSpec):
        q = spec.threshold
        p = float(chi2.cdf(q, 1))
        # E[e 1(e < q)] = F_3(q) for chi2_1, since x f_1(x) = f_3(x)
        cov_e_ind = float(chi2.cdf(q, 3)) - p
        return 2.0 + 0.25 * p * (1.0 - p) + cov_e_ind
    spec.check()
    s2 = innovation_variance(spec.innovation)
    return s2 * (1.0 + sum(spec.theta)) ** 2 / (1.0 - sum(spec.phi)) ** 2


COVERAGE_PROCESSES: Dict[str, ProcessSpec] = {
    "MA(2) 0.4,-0.6": ArmaSpec(theta=(0.4, -0.6)),
    "MA(1)*": Ma1StarSpec(),
    "MA(3) -1,-1,-1": ArmaSpec(theta=(-1.0, -1.0, -1.0)),
    "ARMA(1,2) 0.9,-0.6,-0.3": ArmaSpec(phi=(0.9,), theta=(-0.6, -0.3)),
    "AR(1) -0.7": ArmaSpec(phi=(-0.7,)),
    "AR(1) 0.9": ArmaSpec(phi=(0.9,)),
    "ARMA(1,1) 0.7,-0.5": ArmaSpec(phi=(0.7,), theta=(-0.5,)),
    "ARMA(2,2) 0.3,0.3,-0.3,-0.1": ArmaSpec(phi=(0.3, 0.3), theta=(-0.3, -0.1)),
    "ARMA(2,2) 0.5,0.3,0.3,-0.9": ArmaSpec(phi=(0.5, 0.3), theta=(0.3, -0.9)),
    "MA(2) 0.1,2": ArmaSpec(theta=(0.1, 2.0)),
}

# MA(2) family used for the block-sensitivity experiment, normal innovations
BLOCK_SENSITIVITY_MA2 = ArmaSpec(theta=(0.5, 0.3), innovation="standard_normal")


def _floats(text: str) -> Tuple[float, ...]:
    text = text.strip()
    return tuple(float(v) for v in text.split(",")) if text else ()


def parse_process(text: str, innovation: str = "centered_chisq1", burn_in: int = 1000) -> ProcessSpec:
    """Parse a process description.

    Accepted forms: ``wn``, ``ma1star``, ``ar:0.9``, ``ma:0.4,-0.6``,
    ``arma:0.9/-0.6,-0.3`` (AR part before the slash), or any key of
    :data:`COVERAGE_PROCESSES` (whose innovation is then overridden).
    """
    raw = text.strip()
    key = raw.lower().replace(" ", "")
    if key in ("ma1star", "ma(1)*", "ma1*"):
        return Ma1StarSpec()
    for label, spec in COVERAGE_PROCESSES.items():
        if key == label.lower().replace(" ", ""):
            if isinstance(spec, Ma1StarSpec):
                return spec
            return ArmaSpec(spec.phi, spec.theta, innovation, burn_in)
    if key in ("wn", "iid", "whitenoise"):
        return ArmaSpec((), (), innovation, burn_in)
    kind, sep, rest = key.partition(":")
    if not sep:
        raise ValueError(f"cannot parse process {raw!r}")
    if kind == "ar":
        spec = ArmaSpec(_floats(rest), (), innovation, burn_in)
    elif kind == "ma":
        spec = ArmaSpec((), _floats(rest), innovation, burn_in)
    elif kind == "arma":
        ar, slash, ma = rest.partition("/")
        if not slash:
            raise ValueError("ARMA spec needs 'arma:<phi list>/<theta list>'")
        spec = ArmaSpec(_floats(ar), _floats(ma), innovation, burn_in)
    else:
        raise ValueError(f"unknown process kind {kind!r}")
    spec.check()
    return spec
