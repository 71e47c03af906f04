"""Online convex optimization over disturbance-action parameters.

The domain couples a vector block p and H matrix blocks through a shared
scale a: p sums to a and every matrix column sums to a.  The lazy mirror
descent (follow-the-regularized-leader) iterate minimizes the accumulated
linearized loss plus an entropic regularizer; the fixed-scale exponential
weights variant is what the experiments run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simplex import check_scaled_dist, check_scaled_stochastic, sub_entropy


class ScaleNotFixed(ValueError):
    """Exponential weights requires a domain with a0 == a_ub."""


@dataclass(frozen=True)
class DacDomain:
    """Parameter domain: scale a in [a0, a_ub], p in a*simplex(d), M^[h] in a*S^{d x d_state}.

    d is the control dimension; d_state (the perturbation dimension) defaults
    to d and differs only for systems whose control and state spaces differ.
    """

    d: int
    H: int
    a0: float
    a_ub: float
    d_state: int | None = None

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be at least 1")
        if not (0.0 <= self.a0 <= self.a_ub <= 1.0):
            raise ValueError(f"need 0 <= a0 <= a_ub <= 1, got [{self.a0}, {self.a_ub}]")
        if self.d_state is None:
            object.__setattr__(self, "d_state", self.d)

    @property
    def n_blocks(self) -> int:
        return 1 + self.H * self.d_state

    @property
    def n_params(self) -> int:
        return self.d + self.H * self.d * self.d_state


@dataclass
class DacParams:
    """One point of the domain: p (d,) and M (H, d, d_state) sharing scale ||p||_1."""

    p: np.ndarray
    M: np.ndarray

    @property
    def scale(self) -> float:
        return float(self.p.sum())

    def copy(self) -> "DacParams":
        return DacParams(self.p.copy(), self.M.copy())

    def check(self, domain: DacDomain, tol: float = 1e-8) -> None:
        a = self.scale
        if not (domain.a0 - tol <= a <= domain.a_ub + tol):
            raise ValueError(f"scale {a} outside [{domain.a0}, {domain.a_ub}]")
        bad = check_scaled_dist(self.p, a, tol)
        if bad is None:
            for h in range(domain.H):
                bad = check_scaled_stochastic(self.M[h], a, tol)
                if bad is not None:
                    break
        if bad is not None:
            raise ValueError(f"invalid parameters: {bad}")


@dataclass
class GradAccumulator:
    """Kahan-compensated running sum of per-round gradients."""

    g_p: np.ndarray
    g_M: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, domain: DacDomain) -> "GradAccumulator":
        acc = cls(np.zeros(domain.d), np.zeros((domain.H, domain.d, domain.d_state)))
        acc._c_p = np.zeros_like(acc.g_p)
        acc._c_M = np.zeros_like(acc.g_M)
        return acc

    def add(self, dg_p, dg_M) -> None:
        for total, comp, inc in ((self.g_p, self._c_p, dg_p), (self.g_M, self._c_M, dg_M)):
            y = np.asarray(inc, dtype=float) - comp
            t = total + y
            comp[...] = (t - total) - y
            total[...] = t
        self.count += 1


def regularizer(params: DacParams) -> float:
    """Negative total block entropy: -Ent(p) - sum over matrix columns of Ent."""
    r = -sub_entropy(params.p)
    H = params.M.shape[0]
    for h in range(H):
        for j in range(params.M.shape[2]):
            r -= sub_entropy(params.M[h][:, j])
    return r


def max_entropy_point(domain: DacDomain) -> DacParams:
    """Regularizer minimizer: every block uniform at scale clamp(d/(d+1), [a0, a_ub]).

    d/(d+1) maximizes a*ln(d/a) + (1-a)*ln(1/(1-a)), the entropy of a uniform
    block of scale a, and all blocks share that maximizer.
    """
    a = min(max(domain.d / (domain.d + 1.0), domain.a0), domain.a_ub)
    p = np.full(domain.d, a / domain.d)
    M = np.full((domain.H, domain.d, domain.d_state), a / domain.d)
    return DacParams(p, M)


def _stack_gradient(acc: GradAccumulator, domain: DacDomain) -> np.ndarray:
    # one row per block, each row of length d: p first, then columns of each M^[h]
    rows = [acc.g_p]
    for h in range(domain.H):
        rows.extend(acc.g_M[h][:, j] for j in range(domain.d_state))
    return np.stack(rows)


def _unstack(Q: np.ndarray, a: float, domain: DacDomain) -> DacParams:
    p = a * Q[0]
    M = np.empty((domain.H, domain.d, domain.d_state))
    for h in range(domain.H):
        for j in range(domain.d_state):
            M[h][:, j] = a * Q[1 + h * domain.d_state + j]
    return DacParams(p, M)


def ftrl_argmin(acc: GradAccumulator, eta: float, domain: DacDomain) -> DacParams:
    """Minimize sum(<z, g>) + R(z)/eta over the coupled domain, in closed form.

    For a fixed scale a each block is a * softmax(-eta * g_block).  Plugging
    that back in, the objective as a function of a alone is

        phi(a) = C*a + (B/eta) * (a ln a + (1-a) ln(1-a)),

    with B blocks and C = sum_b <q_b, g_b> + (1/eta) sum_b <q_b, ln q_b>,
    which is strictly convex with minimizer sigmoid(-eta*C/B); clamping to
    [a0, a_ub] stays optimal by monotonicity of phi'.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    G = _stack_gradient(acc, domain)
    Z = -eta * G
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    Q = E / E.sum(axis=1, keepdims=True)
    if domain.a0 == domain.a_ub:
        a = domain.a0
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            qlogq = np.where(Q > 0.0, Q * np.log(Q), 0.0)
        C = float((Q * G).sum()) + float(qlogq.sum()) / eta
        z = -eta * C / domain.n_blocks
        a_star = 1.0 / (1.0 + math.exp(-z)) if z < 0 else 1.0 - 1.0 / (1.0 + math.exp(z))
        a = min(max(a_star, domain.a0), domain.a_ub)
    return _unstack(Q, a, domain)


def ftrl_objective(params: DacParams, acc: GradAccumulator, eta: float) -> float:
    """Value of the regularized leader objective at `params`."""
    lin = float(np.dot(acc.g_p, params.p)) + float((acc.g_M * params.M).sum())
    return lin + regularizer(params) / eta


class LazyMirrorDescent:
    """Follow-the-regularized-leader with the entropic block regularizer."""

    def __init__(self, domain: DacDomain, eta: float):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.domain = domain
        self.eta = eta
        self.acc = GradAccumulator.zeros(domain)
        self.params = max_entropy_point(domain)

    def update(self, dg_p, dg_M) -> DacParams:
        """Accumulate one gradient and move to the new regularized leader."""
        self.acc.add(dg_p, dg_M)
        self.params = ftrl_argmin(self.acc, self.eta, self.domain)
        return self.params


def _exp_block(v: np.ndarray, g: np.ndarray, eta: float, a: float) -> np.ndarray:
    # multiplicative update in log space; zero entries stay zero
    if a <= 0.0:
        return np.zeros_like(v)
    with np.errstate(divide="ignore"):
        y = np.where(v > 0.0, np.log(np.where(v > 0.0, v, 1.0)) - eta * g, -np.inf)
    y = y - y.max()
    e = np.exp(y)
    return a * e / e.sum()


def exp_weights_update(params: DacParams, dg_p, dg_M, eta: float, domain: DacDomain) -> DacParams:
    """One mirror-descent step with the entropic mirror map at fixed scale.

    Each block is multiplied entrywise by exp(-eta * g) and renormalized back
    to its scale.  Only defined on fixed-scale domains.
    """
    if domain.a0 != domain.a_ub:
        raise ScaleNotFixed(f"domain scale interval [{domain.a0}, {domain.a_ub}] is not a point")
    a = params.scale
    p = _exp_block(params.p, np.asarray(dg_p, dtype=float), eta, a)
    M = np.empty_like(params.M)
    dg_M = np.asarray(dg_M, dtype=float)
    for h in range(domain.H):
        for j in range(domain.d_state):
            M[h][:, j] = _exp_block(params.M[h][:, j], dg_M[h][:, j], eta, a)
    return DacParams(p, M)


class ExpWeights:
    """Exponential-weights optimizer used by the experiments (uniform start, fixed scale)."""

    def __init__(self, domain: DacDomain, eta: float):
        if domain.a0 != domain.a_ub:
            raise ScaleNotFixed("exponential weights needs a fixed-scale domain")
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.domain = domain
        self.eta = eta
        a = domain.a0
        self.params = DacParams(
            np.full(domain.d, a / domain.d),
            np.full((domain.H, domain.d, domain.d_state), a / domain.d),
        )

    def update(self, dg_p, dg_M) -> DacParams:
        self.params = exp_weights_update(self.params, dg_p, dg_M, self.eta, self.domain)
        return self.params
