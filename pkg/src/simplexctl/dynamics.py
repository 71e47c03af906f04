"""Controlled dynamics on the simplex: stepping, rollouts, count ingestion.

The state update is x' = (1 - gamma) * [(1 - ||u||_1) A x + B u] + gamma * w
for linear systems, with the bracket replaced by f(x, u) for nonlinear ones.
Rollouts drive a controller object through a system's schedules and record a
Trajectory for regret accounting and CSV export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import (
    TOL,
    ControlSet,
    SimplexViolation,
    check_dist,
    l1_norm,
    one_one_norm,
    renormalize,
    require,
)


class InfeasibleControl(ValueError):
    """Control norm fell outside the admissible interval."""


class InvalidObservation(ValueError):
    """Recovered perturbation is not a distribution; model mismatch."""


class NegativeAddition(ValueError):
    """Population counts decreased; the count adversary only adds individuals."""


@dataclass(frozen=True)
class SimplexLDS:
    """Linear system on the simplex with known transitions and scheduled noise.

    Schedules are indexed so that gammas[t-1], noises[t-1], costs[t-1] belong
    to round t; their common length bounds the rollout horizon.
    """

    A: np.ndarray
    B: np.ndarray
    control_set: ControlSet
    x1: np.ndarray
    gammas: np.ndarray
    noises: np.ndarray
    costs: list

    def __post_init__(self):
        require(self.A, "stochastic", tol=1e-7)
        require(self.B, "stochastic", tol=1e-7)
        require(self.x1, "dist", tol=1e-7)

    @property
    def dim(self) -> int:
        return len(self.x1)

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]

    @property
    def horizon(self) -> int:
        return min(len(self.gammas), len(self.noises), len(self.costs))

    def transition(self, x, u):
        """Noiseless bracket (1 - ||u||_1) A x + B u."""
        return (1.0 - float(np.sum(u))) * (self.A @ x) + self.B @ u

    def transition_batch(self, X, U):
        scale = 1.0 - U.sum(axis=1)
        return scale[:, None] * (X @ self.A.T) + U @ self.B.T


@dataclass(frozen=True)
class GeneralSystem:
    """Nonlinear system x' = (1 - gamma) f(x, u) + gamma w with f mapping into the simplex.

    f_batch, when given, evaluates f on row-stacked (X, U) arrays; it exists
    purely to speed up counterfactual replays.
    """

    f: callable
    control_dim: int
    control_set: ControlSet
    x1: np.ndarray
    gammas: np.ndarray
    noises: np.ndarray
    costs: list
    f_batch: callable | None = None

    def __post_init__(self):
        require(self.x1, "dist", tol=1e-7)

    @property
    def dim(self) -> int:
        return len(self.x1)

    @property
    def horizon(self) -> int:
        return min(len(self.gammas), len(self.noises), len(self.costs))

    def transition(self, x, u):
        y = np.asarray(self.f(x, u), dtype=float)
        bad = check_dist(y, 1e-7)
        if bad is not None:
            raise SimplexViolation(f"transition map left the simplex: {bad}")
        return y

    def transition_batch(self, X, U):
        # no validation here: counterfactual replays evaluate ambient parameters
        if self.f_batch is not None:
            return np.asarray(self.f_batch(X, U), dtype=float)
        return np.stack([np.asarray(self.f(x, u), dtype=float) for x, u in zip(X, U)])


def _check_feasible(u, control_set: ControlSet, tol: float = TOL):
    norm = l1_norm(u)
    if control_set is not None and not control_set.contains(norm, tol):
        raise InfeasibleControl(
            f"||u||_1 = {norm:.6g} outside [{control_set.alpha_lb}, {control_set.alpha_ub}]"
        )


def _combine(bracket, gamma: float, w) -> np.ndarray:
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return renormalize((1.0 - gamma) * bracket + gamma * np.asarray(w, dtype=float))


def step(x, u, gamma: float, w, A, B, control_set: ControlSet | None = None) -> np.ndarray:
    """One linear update; validates feasibility and returns a clean distribution."""
    if control_set is not None:
        _check_feasible(u, control_set)
    bracket = (1.0 - float(np.sum(u))) * (np.asarray(A) @ x) + np.asarray(B) @ u
    return _combine(bracket, gamma, w)


def step_general(f, x, u, gamma: float, w, control_set: ControlSet | None = None) -> np.ndarray:
    """One nonlinear update through f; same noise mixing as the linear step."""
    if control_set is not None:
        _check_feasible(u, control_set)
    return _combine(np.asarray(f(x, u), dtype=float), gamma, w)


def recover_perturbation(x, u, x_next, gamma: float, system, tol: float = 1e-6) -> np.ndarray:
    """Invert one step for the unknown perturbation w.

    Returns the zero vector when gamma = 0 (the perturbation is unobservable
    and unused).  Raises InvalidObservation when the recovered w is not a
    distribution within tol, which signals a model mismatch; recovery divides
    by gamma, so roundoff in x_next is amplified accordingly.
    """
    d = len(x)
    if gamma == 0.0:
        return np.zeros(d)
    bracket = system.transition(x, u)
    w = (np.asarray(x_next, dtype=float) - (1.0 - gamma) * bracket) / gamma
    bad = check_dist(w, tol)
    if bad is not None:
        raise InvalidObservation(f"recovered perturbation invalid: {bad}")
    return renormalize(w, tol)


@dataclass
class Trajectory:
    """Time-indexed record of one rollout; row t holds the round-t quantities."""

    xs: np.ndarray  # (T, d) states x_1..x_T
    us: np.ndarray  # (T, du) controls
    gammas: np.ndarray  # (T,)
    ws: np.ndarray  # (T, d) scheduled perturbations
    costs: np.ndarray  # (T,)
    x_final: np.ndarray | None = None  # x_{T+1}

    def __len__(self):
        return len(self.costs)

    @property
    def cum_costs(self) -> np.ndarray:
        return np.cumsum(self.costs)

    @property
    def total_cost(self) -> float:
        return float(self.costs.sum())

    def to_csv(self, path) -> None:
        """Write rows t,x_1..x_d,u_1..u_du,gamma,cost,cum_cost at full precision."""
        d = self.xs.shape[1]
        du = self.us.shape[1]
        header = (
            ["t"]
            + [f"x_{i + 1}" for i in range(d)]
            + [f"u_{i + 1}" for i in range(du)]
            + ["gamma", "cost", "cum_cost"]
        )
        cum = self.cum_costs
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for t in range(len(self)):
                row = (
                    [str(t + 1)]
                    + [_fmt(v) for v in self.xs[t]]
                    + [_fmt(v) for v in self.us[t]]
                    + [_fmt(self.gammas[t]), _fmt(self.costs[t]), _fmt(cum[t])]
                )
                fh.write(",".join(row) + "\n")


def _fmt(v) -> str:
    return f"{float(v):.17g}"


TRAJECTORY_CSV_COLUMNS = "t,x_1..x_d,u_1..u_d,gamma,cost,cum_cost"


class ConstantController:
    """Plays the same control every round."""

    def __init__(self, u_fixed):
        self.u_fixed = np.asarray(u_fixed, dtype=float)

    def reset(self, system, T: int):
        _check_feasible(self.u_fixed, system.control_set)

    def control(self, t: int, x) -> np.ndarray:
        return self.u_fixed

    def observe(self, t, x, u, cost_fn, gamma, x_next):
        pass


class LinearPolicyController:
    """Plays u = K x for a fixed scaled stochastic K."""

    def __init__(self, K):
        self.K = np.asarray(K, dtype=float)

    def reset(self, system, T: int):
        a = one_one_norm(self.K)
        if not system.control_set.contains(a):
            raise InfeasibleControl(
                f"||K||_{{1->1}} = {a:.6g} outside "
                f"[{system.control_set.alpha_lb}, {system.control_set.alpha_ub}]"
            )

    def control(self, t: int, x) -> np.ndarray:
        return self.K @ x

    def observe(self, t, x, u, cost_fn, gamma, x_next):
        pass


def rollout(system, controller, T: int) -> Trajectory:
    """Drive `controller` through `system` for T rounds.

    Per round: the controller picks u_t, the cost c_t(x_t, u_t) is charged,
    the state advances with the scheduled (gamma_t, w_t), and the controller
    observes (x_{t+1}, gamma_t) plus the cost function it was charged with.
    """
    if T > system.horizon:
        raise ValueError(f"horizon {T} exceeds schedule length {system.horizon}")
    d = system.dim
    du = system.control_dim
    xs = np.zeros((T, d))
    us = np.zeros((T, du))
    costs = np.zeros(T)
    if hasattr(controller, "reset"):
        controller.reset(system, T)
    x = np.asarray(system.x1, dtype=float)
    for t in range(1, T + 1):
        u = np.asarray(controller.control(t, x), dtype=float)
        _check_feasible(u, system.control_set)
        cost_fn = system.costs[t - 1]
        gamma = float(system.gammas[t - 1])
        w = np.asarray(system.noises[t - 1], dtype=float)
        xs[t - 1] = x
        us[t - 1] = u
        costs[t - 1] = cost_fn(x, u)
        x_next = _combine(system.transition(x, u), gamma, w)
        controller.observe(t, x, u, cost_fn, gamma, x_next)
        x = x_next
    return Trajectory(
        xs=xs,
        us=us,
        gammas=np.asarray(system.gammas[:T], dtype=float).copy(),
        ws=np.asarray(system.noises[:T], dtype=float).copy(),
        costs=costs,
        x_final=x,
    )


def rollout_linear_policy(system: SimplexLDS, K, T: int) -> Trajectory:
    """Roll out the time-invariant policy u = K x on a linear system."""
    return rollout(system, LinearPolicyController(K), T)


def regret(traj: Trajectory, comparator_trajs) -> float:
    """Total cost of traj minus the best comparator's total cost."""
    if not comparator_trajs:
        raise ValueError("need at least one comparator trajectory")
    horizons = {len(c) for c in comparator_trajs} | {len(traj)}
    if len(horizons) != 1:
        raise ValueError(f"mismatched horizons {sorted(horizons)}")
    return traj.total_cost - min(c.total_cost for c in comparator_trajs)


def ingest_counts(count_vectors, controls, A=None, B=None, f=None):
    """Reconstruct (x_t, gamma_t, w_t) from raw population counts.

    Given counts xbar_t and the controls played, each transition splits into
    the modeled part N_t * bracket(x_t, u_t) and n_t = N_{t+1} - N_t added
    individuals whose distribution is the recovered w_t.  gamma_t is
    n_t / N_{t+1}.  Steps with n_t = 0 report gamma_t = 0 and w_t = 0.
    """
    if f is None:
        if A is None or B is None:
            raise ValueError("provide either f or both A and B")
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        bracket = lambda x, u: (1.0 - float(np.sum(u))) * (A @ x) + B @ u
    else:
        bracket = f
    counts = [np.asarray(c, dtype=float) for c in count_vectors]
    out = []
    for t in range(len(counts) - 1):
        n_now = float(counts[t].sum())
        n_next = float(counts[t + 1].sum())
        if n_now <= 0:
            raise ValueError(f"nonpositive population {n_now} at step {t + 1}")
        added = n_next - n_now
        # roundoff guard for real-valued inputs; integer counts are exact
        if abs(added) <= 1e-12 * max(n_now, n_next):
            added = 0.0
        if added < 0:
            raise NegativeAddition(
                f"population shrank from {n_now} to {n_next} at step {t + 1}"
            )
        x_t = counts[t] / n_now
        u_t = np.asarray(controls[t], dtype=float)
        gamma_t = added / n_next
        if added > 0:
            w_t = (counts[t + 1] - n_now * bracket(x_t, u_t)) / added
            bad = check_dist(w_t, 1e-6)
            if bad is not None:
                raise InvalidObservation(f"count step {t + 1}: {bad}")
            w_t = renormalize(w_t, 1e-6)
        else:
            w_t = np.zeros(len(x_t))
        out.append((x_t, gamma_t, w_t))
    return out
