"""Empirical likelihood for the mean-zero constraint on a finite point set.

Given points ``T_1, ..., T_m`` in ``R^d`` the EL ratio for the constraint
``sum_i p_i T_i = 0`` is

    log R = -sum_i log(1 + lam' T_i),

where the multiplier ``lam`` minimises the strictly convex function
``F(a) = -sum_i log(1 + a' T_i)`` over ``{a : min_i (1 + a' T_i) > 0}``.
The optimal weights are ``p_i = 1 / (m (1 + lam' T_i))``.

The same solver serves the expansive-block statistics, the fixed-block
baseline, and the discretised Brownian limit law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linprog

from .errors import DimensionMismatch, HullViolation, NonConvergence

__all__ = [
    "ELSolution",
    "as_points",
    "contains_origin_interior",
    "solve_el",
    "log_el_ratio",
    "el_objective",
    "el_gradient",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100

# relative distance of the origin from the hull boundary below which the
# hull is treated as violated
_HULL_EPS = 1e-12
# floating-point floor for the gradient test, relative to sum_i |T_i| / z_i
_GRAD_FLOOR = 1e-12
_ARMIJO = 1e-4
# stopping rule for ill-conditioned problems
_MOMENT_TOL = 1e-8
# squared Newton decrement, about twice the remaining gap in the objective
_DECREMENT_TOL = 1e-16
# largest 1 + lam'T_i accepted as proof of interiority without the LP
_CERT_ZMAX = 1e6

_CONVERGED, _MAX_ITER, _DIVERGED, _STALLED = 0, 1, 2, 3


@dataclass(frozen=True)
class ELSolution:
    """Result of :func:`solve_el`.

    Attributes
    ----------
    lam : ndarray, shape (d,)
        Lagrange multiplier.
    log_ratio : float
        ``-sum_i log(1 + lam' T_i)``, always ``<= 0``.
    probabilities : ndarray, shape (m,)
        Implied EL weights ``1 / (m (1 + lam' T_i))``.
    iterations : int
        Number of Newton steps taken.
    gradient_norm : float
        ``|| sum_i T_i / (1 + lam' T_i) ||`` at ``lam``.
    """

    lam: np.ndarray
    log_ratio: float
    probabilities: np.ndarray
    iterations: int
    gradient_norm: float


def as_points(points) -> np.ndarray:
    """Validate ``points`` and return them as a float ``(m, d)`` array.

    One-dimensional input is read as ``m`` scalar points.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"points must be a 1-d or 2-d array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"need at least one point of dimension >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite coordinates")
    return arr


def _full_rank(T: np.ndarray) -> bool:
    norms = np.linalg.norm(T, axis=1)
    U = T[norms > _HULL_EPS * norms.max()]
    return U.shape[0] > T.shape[1] and np.linalg.matrix_rank(U / np.abs(U).max(), tol=1e-10) == T.shape[1]


def _hull_lp(T: np.ndarray) -> bool:
    # unit-normalised points; p_i = t + q_i with q_i >= 0 keeps the LP small
    norms = np.linalg.norm(T, axis=1)
    keep = norms > _HULL_EPS * norms.max()
    U = T[keep] / norms[keep, None]
    k, d = U.shape
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.empty((d + 1, k + 1))
    A_eq[:d, :k] = U.T
    A_eq[:d, k] = U.sum(axis=0)
    A_eq[d, :k] = 1.0
    A_eq[d, k] = k
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k + [(None, None)],
                  method="highs")
    if res.status != 0:
        return False
    # t* is at most 1/k; compare on that scale
    return bool(-res.fun * k > 1e-9)


def contains_origin_interior(points) -> bool:
    """Return True iff ``0_d`` lies in the interior of the convex hull of the points.

    For ``d = 1`` this is a sign check. For ``d > 1`` the points are first
    normalised to unit length (which leaves the answer unchanged) and the
    linear program ``max t  s.t.  sum p_i u_i = 0, sum p_i = 1, p_i >= t``
    is solved; the origin is interior iff the points span ``R^d`` and
    ``t* > 0``.
    """
    T = as_points(points)
    d = T.shape[1]
    scale = np.max(np.abs(T))
    if scale == 0.0:
        return False
    if d == 1:
        return bool(T.min() < -_HULL_EPS * scale and T.max() > _HULL_EPS * scale)
    return _full_rank(T) and _hull_lp(T)


def el_objective(a, points) -> float:
    """``-sum_i log(1 + a' T_i)``; ``+inf`` outside the open feasible set."""
    T = as_points(points)
    z = 1.0 + T @ np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(z <= 0):
        return np.inf
    return float(-np.sum(np.log(z)))


def el_gradient(a, points) -> np.ndarray:
    """Gradient of :func:`el_objective`, ``-sum_i T_i / (1 + a' T_i)``."""
    T = as_points(points)
    z = 1.0 + T @ np.atleast_1d(np.asarray(a, dtype=float))
    return -(T / z[:, None]).sum(axis=0)


@njit(cache=True, nogil=True)
def _newton(T, h, tol, max_iter):
    m, d = T.shape
    tmax = 0.0
    for i in range(m):
        r = 0.0
        for j in range(d):
            r += T[i, j] * T[i, j]
        tmax = max(tmax, np.sqrt(r))
    lam = np.zeros(d)
    z = np.ones(m)
    grad = np.zeros(d)
    hess = np.zeros((d, d))
    fval = 0.0
    status = _MAX_ITER
    it = 0
    gnorm = 0.0
    while True:
        grad[:] = 0.0
        hess[:, :] = 0.0
        scale = 0.0
        for i in range(m):
            zi = z[i]
            hi = h[i]
            rn = 0.0
            for j in range(d):
                tij = T[i, j] / zi
                grad[j] += hi * tij
                rn += tij * tij
                for k in range(j + 1):
                    hess[j, k] += hi * tij * (T[i, k] / zi)
            scale += hi * np.sqrt(rn)
        for j in range(d):
            for k in range(j + 1, d):
                hess[j, k] = hess[k, j]
        gnorm = 0.0
        for j in range(d):
            gnorm += grad[j] * grad[j]
        gnorm = np.sqrt(gnorm)
        if gnorm <= _GRAD_FLOOR * scale:
            status = _CONVERGED
            break
        # minimising F with F' = -grad and F'' = hess
        if d == 1:
            step = np.empty(1)
            step[0] = grad[0] / hess[0, 0]
        else:
            step = np.linalg.solve(hess, grad)
        slope = 0.0
        for j in range(d):
            slope -= grad[j] * step[j]
        # the gradient test alone is not scale free: tiny points give a tiny
        # gradient far from the optimum, so the decrement must be small too.
        # On badly conditioned sets the gradient stalls above tol at
        # round-off; the moment condition sum p_i T_i ~ 0 then suffices
        if -slope <= _DECREMENT_TOL and \
                (gnorm <= tol or gnorm <= _MOMENT_TOL * m * (1.0 + tmax)):
            status = _CONVERGED
            break
        if it >= max_iter:
            status = _MAX_ITER
            break
        # -slope is the squared Newton decrement; below 1/4 the full step
        # stays inside the Dikin ellipsoid and Armijo is unresolvable in
        # floating point anyway
        quadratic = -slope < 0.25
        t = 1.0
        accepted = False
        new = np.empty(d)
        znew = np.empty(m)
        fnew = fval
        for _ in range(80):
            for j in range(d):
                new[j] = lam[j] + t * step[j]
            feasible = True
            for i in range(m):
                s = 1.0
                for j in range(d):
                    s += T[i, j] * new[j]
                znew[i] = s
                if s <= 0.0:
                    feasible = False
                    break
            if feasible:
                fnew = 0.0
                for i in range(m):
                    fnew -= h[i] * np.log(znew[i])
                if quadratic or fnew <= fval + _ARMIJO * t * slope:
                    accepted = True
                    break
            t *= 0.5
        it += 1
        moved = False
        for j in range(d):
            if new[j] != lam[j]:
                moved = True
        if not accepted or not moved:
            status = _STALLED
            break
        lam[:] = new
        z[:] = znew
        fval = fnew
        big = 0.0
        for j in range(d):
            big += lam[j] * lam[j]
        if not np.isfinite(fval) or np.sqrt(big) > 1e300:
            status = _DIVERGED
            break
    return lam, z, fval, it, gnorm, status


def _check_hull(T: np.ndarray) -> None:
    if not contains_origin_interior(T):
        raise HullViolation("origin is not in the interior of the convex hull of the points")


def solve_el(points, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ELSolution:
    """Solve the EL program by damped Newton on the dual.

    Starts at ``a = 0`` and halves the step until the iterate is strictly
    feasible and satisfies the Armijo condition; once the Newton decrement
    drops below 1/2 full steps are taken. Convergence requires
    ``||sum_i T_i / (1 + lam' T_i)|| <= tol`` together with a squared Newton
    decrement below 1e-16, or a gradient at the floating-point floor
    proportional to ``sum_i ||T_i|| / (1 + lam' T_i)``. On badly conditioned
    point sets, where the gradient stalls at round-off, a small decrement
    with ``||sum_i p_i T_i||`` below 1e-8 times the scale of the points
    suffices.

    Raises
    ------
    HullViolation
        If the origin is not interior to the hull of the points.
    NonConvergence
        If the tolerance is not met within ``max_iter`` steps. The best
        iterate is attached to the exception.
    """
    return _solve(as_points(points), tol, max_iter)


def _newton_scaled(T, h, tol, max_iter):
    # the ratio is scale free; solving on T / 2^k with max ||T_i|| near 1
    # avoids under- and overflow in the Hessian and is exact in binary
    top = float(np.max(np.abs(T)))
    k = int(np.frexp(top)[1]) if top > 0 and np.isfinite(top) else 0
    lam, z, fval, it, gnorm, status = _newton(np.ldexp(T, -k), h, float(np.ldexp(tol, -k)),
                                              int(max_iter))
    return np.ldexp(lam, -k), z, fval, it, float(np.ldexp(gnorm, k)), status


def _run(T, tol, max_iter):
    lam, z, fval, it, gnorm, status = _newton_scaled(T, np.ones(T.shape[0]), tol, max_iter)
    sol = ELSolution(lam=lam, log_ratio=float(fval), probabilities=1.0 / (T.shape[0] * z),
                     iterations=int(it), gradient_norm=float(gnorm))
    return sol, z, status


def _certified(T, z, gnorm) -> bool:
    # a converged stationary point puts the origin in the relative interior
    # of the hull with weights 1/z_i; guard against slow divergence along a
    # face by requiring bounded weight ratios and relative stationarity
    scale = np.sum(np.linalg.norm(T, axis=1) / z)
    return bool(z.max() <= _CERT_ZMAX and gnorm <= 1e-8 * scale)


def _solve(T, tol, max_iter):
    d = T.shape[1]
    if d == 1:
        _check_hull(T)
        sol, z, status = _run(T, tol, max_iter)
    else:
        if np.max(np.abs(T)) == 0.0 or not _full_rank(T):
            raise HullViolation("points do not span the space")
        sol, z, status = _run(T, tol, max_iter)
        if not (status == _CONVERGED and _certified(T, z, sol.gradient_norm)):
            if not _hull_lp(T):
                raise HullViolation("origin is not in the interior of the convex hull of the points")
    if status == _DIVERGED:
        raise HullViolation("multiplier diverged; origin is on or outside the hull boundary")
    if status != _CONVERGED:
        raise NonConvergence(
            f"EL Newton iteration stopped after {sol.iterations} steps with gradient norm "
            f"{sol.gradient_norm:.3e}", solution=sol)
    return sol


def weighted_dual(T: np.ndarray, h: np.ndarray, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER):
    """Minimise ``-sum_i h_i log(1 + a' T_i)`` for validated points.

    Quadrature-weighted variant used by the limit-law simulator. Returns
    ``(lam, value)``; the caller is responsible for the hull condition.
    """
    lam, z, fval, it, gnorm, status = _newton_scaled(T, h, tol, max_iter)
    if status == _DIVERGED:
        raise HullViolation("multiplier diverged; origin is on or outside the hull boundary")
    if status != _CONVERGED:
        raise NonConvergence(
            f"weighted EL iteration stopped after {it} steps with gradient norm {gnorm:.3e}")
    return lam, float(fval)


def log_el_ratio(points, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Log EL ratio, or ``-inf`` when the hull condition fails."""
    try:
        return _solve(as_points(points), tol, max_iter).log_ratio
    except HullViolation:
        return -np.inf
