"""Simplex and stochastic-matrix primitives: norms, entropy, validation.

States are distributions on d categories, controls are scaled distributions,
and transitions are column-stochastic matrices.  Everything downstream builds
on the checks and norms defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Default tolerance for simplex / stochasticity checks.  Double-precision
# rollouts of length <= 1e4 accumulate well under 1e-12 per-step error, so
# anything past 1e-9 indicates corrupted state rather than roundoff.
TOL = 1e-9


class SimplexViolation(ValueError):
    """A vector or matrix broke a simplex invariant beyond tolerance."""


@dataclass(frozen=True)
class Violation:
    """Worst constraint violation found by a check: what, how bad, where."""

    kind: str  # "negative-entry" | "sum" | "column-sum" | "non-finite"
    magnitude: float
    where: tuple

    def __str__(self):
        return f"{self.kind} violation of {self.magnitude:.3e} at {self.where}"


@dataclass(frozen=True)
class ControlSet:
    """Admissible control strengths: u is feasible iff ||u||_1 in [alpha_lb, alpha_ub]."""

    alpha_lb: float
    alpha_ub: float

    def __post_init__(self):
        if not (0.0 <= self.alpha_lb <= self.alpha_ub <= 1.0):
            raise ValueError(
                f"need 0 <= alpha_lb <= alpha_ub <= 1, got [{self.alpha_lb}, {self.alpha_ub}]"
            )

    def contains(self, norm: float, tol: float = TOL) -> bool:
        return self.alpha_lb - tol <= norm <= self.alpha_ub + tol


def l1_norm(v) -> float:
    """Sum of absolute values."""
    return float(np.abs(np.asarray(v, dtype=float)).sum())


def one_one_norm(M) -> float:
    """Operator norm l1 -> l1, equal to the largest column l1 norm."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.abs(M).sum(axis=0).max())


def sub_entropy(v) -> float:
    """Entropy of a sub-distribution, counting the complement mass as a category.

    With cmp = 1 - sum(v), returns cmp*ln(1/cmp) + sum_j v_j*ln(1/v_j), using
    the continuous extension 0*ln(1/0) = 0.  Ranges over [0, ln(d+1)].
    """
    v = np.asarray(v, dtype=float)
    cmp_mass = 1.0 - float(v.sum())
    parts = np.concatenate([v, [cmp_mass]])
    parts = np.clip(parts, 0.0, None)
    pos = parts[parts > 0.0]
    return float(-(pos * np.log(pos)).sum())


def sub_entropy_grad(v, floor: float = 1e-12) -> np.ndarray:
    """Gradient of -sub_entropy: d/dv_j = ln(v_j) - ln(cmp), entries floored at `floor`."""
    v = np.asarray(v, dtype=float)
    cmp_mass = max(1.0 - float(v.sum()), floor)
    return np.log(np.maximum(v, floor)) - math.log(cmp_mass)


def _check_entries(x) -> Violation | None:
    if not np.all(np.isfinite(x)):
        idx = np.argwhere(~np.isfinite(x))[0]
        return Violation("non-finite", math.inf, tuple(int(i) for i in idx))
    return None


def check_dist(x, tol: float = TOL) -> Violation | None:
    """Check x is a probability distribution within tol; None means ok."""
    return check_scaled_dist(x, 1.0, tol)


def check_scaled_dist(x, scale: float, tol: float = TOL) -> Violation | None:
    """Check x has nonnegative entries summing to `scale` within tol."""
    x = np.asarray(x, dtype=float)
    bad = _check_entries(x)
    if bad is not None:
        return bad
    neg = float(x.min(initial=0.0))
    if neg < -tol:
        return Violation("negative-entry", -neg, (int(np.argmin(x)),))
    gap = abs(float(x.sum()) - scale)
    if gap > tol:
        return Violation("sum", gap, ())
    return None


def check_subdist(x, tol: float = TOL) -> Violation | None:
    """Check x has nonnegative entries with sum at most 1 within tol."""
    x = np.asarray(x, dtype=float)
    bad = _check_entries(x)
    if bad is not None:
        return bad
    neg = float(x.min(initial=0.0))
    if neg < -tol:
        return Violation("negative-entry", -neg, (int(np.argmin(x)),))
    excess = float(x.sum()) - 1.0
    if excess > tol:
        return Violation("sum", excess, ())
    return None


def check_stochastic(M, tol: float = TOL) -> Violation | None:
    """Check M is column-stochastic within tol (columns may be rectangular)."""
    return check_scaled_stochastic(M, 1.0, tol)


def check_scaled_stochastic(M, scale: float, tol: float = TOL) -> Violation | None:
    """Check M is nonnegative with every column summing to `scale` within tol."""
    M = np.asarray(M, dtype=float)
    bad = _check_entries(M)
    if bad is not None:
        return bad
    neg = float(M.min(initial=0.0))
    if neg < -tol:
        i, j = np.unravel_index(int(np.argmin(M)), M.shape)
        return Violation("negative-entry", -neg, (int(i), int(j)))
    sums = M.sum(axis=0)
    gaps = np.abs(sums - scale)
    j = int(np.argmax(gaps))
    if gaps[j] > tol:
        return Violation("column-sum", float(gaps[j]), (j,))
    return None


_CHECKS = {
    "dist": lambda x, scale, tol: check_dist(x, tol),
    "subdist": lambda x, scale, tol: check_subdist(x, tol),
    "scaled-dist": lambda x, scale, tol: check_scaled_dist(x, scale, tol),
    "stochastic": lambda x, scale, tol: check_stochastic(x, tol),
    "scaled-stochastic": lambda x, scale, tol: check_scaled_stochastic(x, scale, tol),
}


def validate(x, kind: str, scale: float | None = None, tol: float = TOL) -> Violation | None:
    """Run the invariant check named by `kind`; returns None when x is valid.

    Kinds: dist, subdist, scaled-dist, stochastic, scaled-stochastic.  The
    scaled kinds require `scale`.
    """
    if kind not in _CHECKS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(_CHECKS)}")
    if kind.startswith("scaled") and scale is None:
        raise ValueError(f"kind {kind!r} requires scale")
    return _CHECKS[kind](x, scale, tol)


def require(x, kind: str, scale: float | None = None, tol: float = TOL) -> None:
    """Like validate() but raises SimplexViolation on failure."""
    bad = validate(x, kind, scale, tol)
    if bad is not None:
        raise SimplexViolation(f"{kind}: {bad}")


def renormalize(x, tol: float = TOL) -> np.ndarray:
    """Repair roundoff on a distribution: clamp negatives, divide by the sum.

    Violations beyond tol are hard errors, never silently repaired.
    """
    x = np.asarray(x, dtype=float)
    bad = check_dist(x, tol)
    if bad is not None:
        raise SimplexViolation(f"state left the simplex: {bad}")
    y = np.clip(x, 0.0, None)
    return y / y.sum()


def uniform_dist(d: int, scale: float = 1.0) -> np.ndarray:
    return np.full(d, scale / d)
