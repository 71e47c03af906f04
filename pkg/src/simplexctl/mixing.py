"""Stationary distributions, distance to stationarity, and mixing times.

The comparator class for the controller is defined through the closed-loop
matrix (1 - ||K||_{1->1}) A + B K and its quarter-mixing time, so these
routines double as the feasibility test for candidate linear policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .simplex import TOL, check_scaled_stochastic, check_stochastic, one_one_norm


class InfiniteMixing(RuntimeError):
    """Distance-to-stationarity quantities are infinite for this matrix."""


class NoUniqueStationary(InfiniteMixing):
    """Power iteration could not certify a unique stationary distribution."""


def stationary_distribution(X, tol: float = 1e-12, max_iters: int = 64) -> np.ndarray:
    """Stationary distribution of a column-stochastic X by repeated squaring.

    Uniqueness is certified by all columns of the converged power agreeing
    within tol (equivalently max_{j,k} ||X^t (e_j - e_k)||_1 <= tol).  Chains
    that do not converge within max_iters squarings (periodic, reducible)
    raise NoUniqueStationary.
    """
    X = np.asarray(X, dtype=float)
    bad = check_stochastic(X, 1e-7)
    if bad is not None:
        raise ValueError(f"not column-stochastic: {bad}")
    P = X.copy()
    for _ in range(max_iters):
        spread = _column_spread(P)
        if spread <= tol:
            pi = P.mean(axis=1)
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
            if float(np.abs(X @ pi - pi).sum()) > max(tol, 1e-12):
                raise NoUniqueStationary("converged power is not a fixed point")
            return pi
        P = P @ P
        P /= P.sum(axis=0)  # crush roundoff drift between squarings
    raise NoUniqueStationary(f"no convergence after {max_iters} squarings")


def _column_spread(P) -> float:
    # max over column pairs of ||P e_j - P e_k||_1
    lo = P.min(axis=1)
    hi = P.max(axis=1)
    return float((hi - lo).sum())


def dist_to_stationarity(X, t: int, tol: float = 1e-12) -> float:
    """D_X(t): worst-case l1 distance of X^t p to the stationary distribution.

    The sup over the simplex is attained at a vertex, so this is the max over
    columns of X^t.  Raises InfiniteMixing when no unique stationary
    distribution exists.
    """
    X = np.asarray(X, dtype=float)
    pi = stationary_distribution(X, tol)
    P = np.linalg.matrix_power(X, t)
    return float(np.abs(P - pi[:, None]).sum(axis=0).max())


def dbar(X, t: int, tol: float = 1e-12) -> float:
    """Dbar_X(t): worst-case l1 distance between images of two distributions."""
    X = np.asarray(X, dtype=float)
    stationary_distribution(X, tol)  # only defined for uniquely-mixing chains
    P = np.linalg.matrix_power(X, t)
    d = P.shape[1]
    best = 0.0
    for j in range(d):
        diff = np.abs(P - P[:, j][:, None]).sum(axis=0)
        best = max(best, float(diff.max()))
    return best


def mixing_time(X, eps: float = 0.25, t_cap: int = 1000):
    """Smallest t with D_X(t) <= eps, or math.inf if not reached by t_cap.

    Infinity is a sentinel (also returned when no unique stationary
    distribution exists), never an exception.
    """
    if not (0.0 < eps < 2.0):
        raise ValueError(f"eps must lie in (0, 2), got {eps}")
    X = np.asarray(X, dtype=float)
    try:
        pi = stationary_distribution(X)
    except InfiniteMixing:
        return math.inf
    P = np.eye(X.shape[0])
    for t in range(t_cap + 1):
        d_t = float(np.abs(P - pi[:, None]).sum(axis=0).max())
        if d_t <= eps:
            return t
        P = X @ P
    return math.inf


def closed_loop(A, B, K) -> np.ndarray:
    """Closed-loop transition (1 - ||K||_{1->1}) A + B K of the policy x -> Kx."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    a = one_one_norm(K)
    if a > 1.0 + TOL:
        raise ValueError(f"policy scale {a} exceeds 1")
    bad = check_scaled_stochastic(K, a, 1e-7)
    if bad is not None:
        raise ValueError(f"K is not a scaled stochastic matrix: {bad}")
    return (1.0 - a) * A + B @ K


def tau_mixes(A, B, K, tau: float) -> bool:
    """Whether the closed loop of K reaches quarter-mixing within time tau."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    t_cap = int(math.ceil(4 * tau)) + 1
    return mixing_time(closed_loop(A, B, K), 0.25, t_cap) <= tau


@dataclass(frozen=True)
class MixingProfile:
    """Stationary distribution plus D / Dbar traces and the quarter-mixing time."""

    stationary: np.ndarray
    d_values: dict = field(default_factory=dict)
    dbar_values: dict = field(default_factory=dict)
    t_mix_quarter: float = math.inf


def mixing_profile(X, t_max: int = 20, t_cap: int = 1000) -> MixingProfile:
    """Tabulate D_X and Dbar_X up to t_max along with t_mix(X, 1/4)."""
    pi = stationary_distribution(X)
    d_values = {t: dist_to_stationarity(X, t) for t in range(t_max + 1)}
    dbar_values = {t: dbar(X, t) for t in range(t_max + 1)}
    return MixingProfile(
        stationary=pi,
        d_values=d_values,
        dbar_values=dbar_values,
        t_mix_quarter=mixing_time(X, 0.25, t_cap),
    )
