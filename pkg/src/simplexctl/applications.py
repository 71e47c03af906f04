"""Concrete controlled systems, baselines, and the regret lower-bound instances.

Covers the quarantine-control epidemic model (with a quadratic cost and a
hospital-capacity cost built on the Lambert W function), controlled
rock-paper-scissors replicator dynamics with greedy and constant baselines,
and the paired two-branch instances on which every causal controller must
pay linear regret.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import (
    ConstantController,
    GeneralSystem,
    SimplexLDS,
    rollout,
    rollout_linear_policy,
)
from .seeding import rng_for
from .simplex import ControlSet


class DomainError(ValueError):
    """Argument outside the principal branch's domain."""


# ---------------------------------------------------------------------------
# epidemic model


@dataclass(frozen=True)
class SirParams:
    """Per-step transmission / recovery / immunity-loss rates."""

    beta: float
    theta: float
    xi: float

    def __post_init__(self):
        for name in ("beta", "theta", "xi"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def sir_transition(x, u, params: SirParams) -> np.ndarray:
    """Noiseless epidemic step for state (S, I, R) and control (prevent, allow).

    The control redistributes the new-infection mass beta*I*S: u[0] routes it
    back to S (prevention), u[1] lets it infect, so the effective
    transmission rate is beta * u[1].
    """
    s, i, r = float(x[0]), float(x[1]), float(x[2])
    flow = params.beta * i * s
    return np.array(
        [
            (1.0 - params.beta * i) * s + params.xi * r + flow * float(u[0]),
            (1.0 - params.theta) * i + flow * float(u[1]),
            params.theta * i + (1.0 - params.xi) * r,
        ]
    )


def sir_transition_batch(X, U, params: SirParams) -> np.ndarray:
    s, i, r = X[:, 0], X[:, 1], X[:, 2]
    flow = params.beta * i * s
    return np.stack(
        [
            (1.0 - params.beta * i) * s + params.xi * r + flow * U[:, 0],
            (1.0 - params.theta) * i + flow * U[:, 1],
            params.theta * i + (1.0 - params.xi) * r,
        ],
        axis=1,
    )


def sir_cost(x, u, c2: float, c3: float) -> float:
    """Quadratic infection cost plus bilinear prevention cost: c3*I^2 + c2*S*u[0]."""
    return c3 * float(x[1]) ** 2 + c2 * float(x[0]) * float(u[0])


def sir_cost_fn(c2: float, c3: float):
    def cost(x, u):
        return c3 * np.asarray(x)[..., 1] ** 2 + c2 * np.asarray(x)[..., 0] * np.asarray(u)[..., 0]

    return cost


def make_sir_system(
    params: SirParams, x1, T: int, c2: float, c3: float, gammas=None, noises=None
) -> GeneralSystem:
    x1 = np.asarray(x1, dtype=float)
    if gammas is None:
        gammas = np.zeros(T)
    if noises is None:
        noises = np.zeros((T, 3))
    cost = sir_cost_fn(c2, c3)
    return GeneralSystem(
        f=lambda x, u: sir_transition(x, u, params),
        f_batch=lambda X, U: sir_transition_batch(X, U, params),
        control_dim=2,
        control_set=ControlSet(1.0, 1.0),
        x1=x1,
        gammas=np.asarray(gammas, dtype=float),
        noises=np.asarray(noises, dtype=float),
        costs=[cost] * T,
    )


def bernoulli_gamma_schedule(T: int, value: float, prob: float, rng: np.random.Generator):
    """gamma_t in {0, value} with P(value) = prob, drawn iid."""
    return np.where(rng.random(T) < prob, value, 0.0)


def normalized_uniform_noise(T: int, d: int, rng: np.random.Generator):
    """Rows drawn uniformly from [0,1]^d and normalized onto the simplex."""
    raw = rng.random((T, d))
    return raw / raw.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Lambert W and the hospital-capacity cost


def lambert_w0(x: float) -> float:
    """Principal branch of Lambert's W by Halley iteration.

    Solves w * e^w = x for x >= -1/e with residual below 1e-12 * max(1, |x|).
    Seeds with the branch-point series near -1/e and ln(1+x) elsewhere.
    """
    x = float(x)
    branch = -1.0 / math.e
    if x < branch:
        if x > branch - 1e-12 * max(1.0, abs(branch)):
            return -1.0
        raise DomainError(f"lambert_w0 needs x >= -1/e, got {x}")
    if x == branch:
        return -1.0
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p**2 / 3.0 + 11.0 / 72.0 * p**3
    else:
        w = math.log1p(x) if x > -1.0 else 0.0
    target = 1e-12 * max(1.0, abs(x))
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= target:
            return w
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
    if abs(w * math.exp(w) - x) <= target:
        return w
    raise RuntimeError(f"lambert_w0 failed to converge at x = {x}")


@dataclass(frozen=True)
class HospitalCostParams:
    """Prevention weight, surge weight, capacity fraction, base reproduction number."""

    c2: float
    c3: float
    y_max: float
    sigma0: float

    def __post_init__(self):
        if not (0.0 < self.y_max < 1.0):
            raise ValueError(f"y_max must lie in (0, 1), got {self.y_max}")
        if self.c2 <= 0 or self.c3 <= 0:
            raise ValueError("c2 and c3 must be positive")


def _final_susceptible(s: float, i: float, sigma0: float) -> float:
    # long-run outcome term; its argument stays within the W domain on the
    # simplex for sigma0 = 3 (max of sigma0*i*e^(-sigma0*(s+i)) is 1/e)
    return lambert_w0(-sigma0 * i * math.exp(-sigma0 * (s + i))) / sigma0


def hospital_cost(x, u, params: HospitalCostParams) -> float:
    """Per-step cost: long-run outcome term + c2*u[0]^2 + smooth surge penalty."""
    s, i = float(x[0]), float(x[1])
    z = 100.0 * (i - params.y_max)
    if z < -700.0:
        surge = 0.0
    else:
        surge = params.c3 * (i - params.y_max) / (1.0 + math.exp(-z))
    return -_final_susceptible(s, i, params.sigma0) + params.c2 * float(u[0]) ** 2 + surge


def hospital_cost_fn(params: HospitalCostParams):
    def cost(x, u):
        return hospital_cost(x, u, params)

    return cost


def make_hospital_system(
    x1, T: int, cost_params: HospitalCostParams, beta=0.3, theta=0.1, xi=0.0
) -> GeneralSystem:
    """Epidemic system with the hospital-capacity cost; noiseless by default."""
    prm = SirParams(beta, theta, xi)
    return GeneralSystem(
        f=lambda x, u: sir_transition(x, u, prm),
        f_batch=lambda X, U: sir_transition_batch(X, U, prm),
        control_dim=2,
        control_set=ControlSet(1.0, 1.0),
        x1=np.asarray(x1, dtype=float),
        gammas=np.zeros(T),
        noises=np.zeros((T, 3)),
        costs=[hospital_cost_fn(cost_params)] * T,
    )


# ---------------------------------------------------------------------------
# controlled replicator dynamics


@dataclass(frozen=True)
class RpsParams:
    """Evolution rate of the discrete replicator update; at most 1 for simplex closure."""

    evolution_rate: float

    def __post_init__(self):
        if not (0.0 < self.evolution_rate <= 1.0):
            raise ValueError(f"evolution_rate must lie in (0, 1], got {self.evolution_rate}")


def rps_payoff(u) -> np.ndarray:
    """Zero-sum cyclic payoff matrix steered by the control u."""
    u1, u2, u3 = float(u[0]), float(u[1]), float(u[2])
    return np.array([[0.0, u1, -u3], [-u1, 0.0, u2], [u3, -u2, 0.0]])


def replicator_transition(x, u, params: RpsParams) -> np.ndarray:
    """One replicator step x + eta * x * (M(u) x); preserves the simplex exactly.

    The mean-fitness correction vanishes because the payoff matrix is
    antisymmetric, so the coordinate sum is conserved.
    """
    x = np.asarray(x, dtype=float)
    fitness = rps_payoff(u) @ x
    return x + params.evolution_rate * x * fitness


def replicator_transition_batch(X, U, params: RpsParams) -> np.ndarray:
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    u1, u2, u3 = U[:, 0], U[:, 1], U[:, 2]
    f1 = u1 * x2 - u3 * x3
    f2 = -u1 * x1 + u2 * x3
    f3 = u3 * x1 - u2 * x2
    eta = params.evolution_rate
    return np.stack([x1 * (1.0 + eta * f1), x2 * (1.0 + eta * f2), x3 * (1.0 + eta * f3)], axis=1)


def rock_share_cost(x, u):
    """Penalize the first strategy's share: x[0]^2."""
    return np.asarray(x)[..., 0] ** 2


def rock_share_and_control_cost(x, u):
    """x[0]^2 plus a penalty on the third control channel: + u[2]^2."""
    return np.asarray(x)[..., 0] ** 2 + np.asarray(u)[..., 2] ** 2


def random_rps_cost_schedule(T: int, rng: np.random.Generator):
    """Fair-coin schedule between the plain and control-penalizing costs."""
    coins = rng.integers(0, 2, size=T)
    fns = [rock_share_and_control_cost if c else rock_share_cost for c in coins]
    return fns, coins


def make_rps_system(x1, T: int, params: RpsParams, cost_fns=None) -> GeneralSystem:
    if cost_fns is None:
        cost_fns = [rock_share_cost] * T
    return GeneralSystem(
        f=lambda x, u: replicator_transition(x, u, params),
        f_batch=lambda X, U: replicator_transition_batch(X, U, params),
        control_dim=3,
        control_set=ControlSet(1.0, 1.0),
        x1=np.asarray(x1, dtype=float),
        gammas=np.zeros(T),
        noises=np.zeros((T, 3)),
        costs=list(cost_fns),
    )


def trailing_window_average(values, window: int = 15) -> np.ndarray:
    """At each t (0-based), the mean of the last min(t+1, window) values."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    for t in range(len(values)):
        k = min(t + 1, window)
        out[t] = (csum[t + 1] - csum[t + 1 - k]) / k
    return out


# ---------------------------------------------------------------------------
# baselines


@lru_cache(maxsize=None)
def _lattice(d: int, resolution: int):
    # integer compositions of `resolution` into d parts, lexicographic order
    def rec(prefix, remaining, slots):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for k in range(remaining + 1):
            yield from rec(prefix + (k,), remaining - k, slots - 1)

    pts = np.array(list(rec((), resolution, d)), dtype=float)
    return pts / resolution


def simplex_lattice(d: int, resolution: int) -> np.ndarray:
    """All points of the simplex with coordinates that are multiples of 1/resolution."""
    return _lattice(d, resolution).copy()


def _eval_objective(system, x, cost_fn, U: np.ndarray) -> np.ndarray:
    X = np.tile(np.asarray(x, dtype=float), (len(U), 1))
    F = system.transition_batch(X, U)
    try:
        vals = np.asarray(cost_fn(F, U), dtype=float)
        if vals.shape == (len(U),):
            return vals
    except Exception:
        pass
    return np.array([float(cost_fn(F[r], U[r])) for r in range(len(U))])


def best_response_control(x, system, prev_cost, grid_resolution: int = 50) -> np.ndarray:
    """Minimize prev_cost(f(x, u), u) over a simplex lattice, then refine locally.

    The refinement pass re-searches at ten times the resolution inside the
    coarse cell around the incumbent.  Ties go to the lexicographically
    smallest grid point (argmin of the lex-ordered candidate list).
    """
    d = system.control_dim
    coarse = _lattice(d, grid_resolution)
    vals = _eval_objective(system, x, prev_cost, coarse)
    best = coarse[int(np.argmin(vals))]
    fine_res = 10 * grid_resolution
    center = np.rint(best * fine_res).astype(int)
    lo = np.maximum(center - 10, 0)
    hi = np.minimum(center + 10, fine_res)

    def rec(prefix, total, slot):
        if slot == d - 1:
            last = fine_res - total
            if lo[slot] <= last <= hi[slot]:
                yield prefix + (last,)
            return
        for k in range(lo[slot], min(hi[slot], fine_res - total) + 1):
            yield from rec(prefix + (k,), total + k, slot + 1)

    fine = np.array(list(rec((), 0, 0)), dtype=float) / fine_res
    fvals = _eval_objective(system, x, prev_cost, fine)
    j = int(np.argmin(fvals))
    if fvals[j] < np.min(vals):
        return fine[j]
    return best


class BestResponseController:
    """Greedy baseline: each round minimizes the previous round's cost one step ahead."""

    def __init__(self, system, grid_resolution: int = 50):
        self.system = system
        self.grid_resolution = grid_resolution
        self._prev_cost = None

    def reset(self, system, T: int):
        self._prev_cost = None

    def control(self, t: int, x) -> np.ndarray:
        if self._prev_cost is None:
            # no cost seen yet; play the uniform control at the admissible scale
            d = self.system.control_dim
            return np.full(d, self.system.control_set.alpha_ub / d)
        return best_response_control(x, self.system, self._prev_cost, self.grid_resolution)

    def observe(self, t, x, u, cost_fn, gamma, x_next):
        self._prev_cost = cost_fn


# ---------------------------------------------------------------------------
# lower-bound instances


@dataclass(frozen=True)
class ScalarLDS:
    """One-dimensional unconstrained system x' = a x + b u + w."""

    a: float
    b: float
    x1: float
    ws: np.ndarray
    costs: list


def scalar_rollout(sys: ScalarLDS, policy, T: int, clip: float = 1e6):
    """Roll a policy(t, x) -> u through a scalar system; states clipped at +-clip."""
    xs = np.zeros(T)
    us = np.zeros(T)
    costs = np.zeros(T)
    x = sys.x1
    for t in range(1, T + 1):
        u = float(policy(t, x))
        xs[t - 1] = x
        us[t - 1] = u
        costs[t - 1] = sys.costs[t - 1](x, u)
        x = sys.a * x + sys.b * u + float(sys.ws[t - 1])
        x = min(max(x, -clip), clip)
    return xs, us, costs


@dataclass(frozen=True)
class LowerBoundPair:
    """Two systems identical until the midpoint shock, plus their comparator policies."""

    variant: str
    beta: float
    T: int
    systems: tuple
    comparators: tuple


def make_lower_bound_pair(variant: str, beta: float, T: int) -> LowerBoundPair:
    """Build the paired instances whose branch is unobservable before T/2.

    Simplex variant: identity transitions on two categories, a single
    half-strength shock at T/2 toward either (1/2,1/2) or (1,0), cost
    |x_2 - 1/2| afterwards, controls capped at beta/T.  Comparators: the
    constant drift policy K0 = (beta/T) * uniform and the lazy policy K1 = 0.
    Scalar variant: x' = x - (beta/T) u (+ a unit negative shock at T/2),
    cost |x| + |u| afterwards, comparators u = x and u = 0.
    """
    if T % 2 != 0:
        raise ValueError("T must be even")
    if beta < 2:
        raise ValueError("beta must be at least 2")
    half = T // 2
    if variant == "simplex":
        alpha = beta / T
        if alpha > 1.0:
            raise ValueError(f"beta/T = {alpha} exceeds 1; increase T")
        eye = np.eye(2)
        gammas = np.zeros(T)
        gammas[half - 1] = 0.5
        zero_cost = lambda x, u: 0.0
        late_cost = lambda x, u: abs(float(x[1]) - 0.5)
        costs = [zero_cost] * half + [late_cost] * (T - half)
        x1 = np.array([0.0, 1.0])
        cs = ControlSet(0.0, alpha)
        w0 = np.tile([0.5, 0.5], (T, 1))
        w1 = np.tile([1.0, 0.0], (T, 1))
        sys0 = SimplexLDS(eye, eye, cs, x1, gammas, w0, costs)
        sys1 = SimplexLDS(eye, eye, cs, x1, gammas.copy(), w1, costs)
        K0 = alpha * np.full((2, 2), 0.5)
        K1 = np.zeros((2, 2))
        return LowerBoundPair("simplex", beta, T, (sys0, sys1), (K0, K1))
    if variant == "standard-lds":
        zero_cost = lambda x, u: 0.0
        late_cost = lambda x, u: abs(float(x)) + abs(float(u))
        costs = [zero_cost] * half + [late_cost] * (T - half)
        w0 = np.zeros(T)
        w1 = np.zeros(T)
        w1[half - 1] = -1.0
        sys0 = ScalarLDS(1.0, -beta / T, 1.0, w0, costs)
        sys1 = ScalarLDS(1.0, -beta / T, 1.0, w1, costs)
        pi0 = lambda t, x: x
        pi1 = lambda t, x: 0.0
        return LowerBoundPair("standard-lds", beta, T, (sys0, sys1), (pi0, pi1))
    raise ValueError(f"unknown variant {variant!r}; expected 'simplex' or 'standard-lds'")


def comparator_costs(pair: LowerBoundPair):
    """Total cost of each comparator on each system, as a 2x2 array [policy][system]."""
    out = np.zeros((2, 2))
    for pi in range(2):
        for b in range(2):
            if pair.variant == "simplex":
                traj = rollout_linear_policy(pair.systems[b], pair.comparators[pi], pair.T)
                out[pi, b] = traj.total_cost
            else:
                _, _, costs = scalar_rollout(pair.systems[b], pair.comparators[pi], pair.T)
                out[pi, b] = costs.sum()
    return out


def lower_bound_regret_harness(
    controller_factory, variant: str, beta: float, T_list, trials: int, seed: int = 0
):
    """Mean regret per horizon against the better of the two comparators.

    Each trial draws the branch uniformly, runs the controller on the drawn
    system, and subtracts the cheaper comparator's cost on that same system.
    Returns per-T rows plus a least-squares slope of mean regret in T.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rows = []
    for T in T_list:
        pair = make_lower_bound_pair(variant, beta, T)
        comp = comparator_costs(pair)
        regs = np.zeros(trials)
        for trial in range(trials):
            rng = rng_for(seed, f"lowerbound-{variant}-T{T}-trial{trial}")
            b = int(rng.integers(0, 2))
            system = pair.systems[b]
            if variant == "simplex":
                agent = controller_factory(system, T)
                traj = rollout(system, agent, T)
                total = traj.total_cost
            else:
                policy = controller_factory(system, T)
                _, _, costs = scalar_rollout(system, policy, T)
                total = float(costs.sum())
            regs[trial] = total - min(comp[0, b], comp[1, b])
        rows.append(
            {
                "T": int(T),
                "mean_regret": float(regs.mean()),
                "stderr": float(regs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
                "trials": trials,
            }
        )
    ts = np.array([r["T"] for r in rows], dtype=float)
    means = np.array([r["mean_regret"] for r in rows])
    slope = float(np.polyfit(ts, means, 1)[0]) if len(rows) > 1 else 0.0
    return {"rows": rows, "slope": slope}


def uniform_control(d: int, scale: float = 1.0) -> ConstantController:
    return ConstantController(np.full(d, scale / d))
