"""Gradient-perturbation controller for simplex dynamics.

The policy mixes a learned base distribution p with learned linear maps of
recent perturbations, weighted by noise-dependent coefficients so that the
control always lands in the admissible set.  Each round the controller
replays the round's cost on the counterfactual trajectory its current
parameters would have produced, and feeds that proxy loss's gradient to an
online optimizer over the parameter domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimplexLDS, recover_perturbation, rollout
from .mixing import mixing_time
from .optimizer import (
    DacDomain,
    DacParams,
    ExpWeights,
    LazyMirrorDescent,
)


@dataclass(frozen=True)
class LambdaWeights:
    """Influence weights of the base policy and of each recent perturbation.

    lam[0] weighs p, lam[i] weighs the perturbation i steps back; they are
    nonnegative and sum to one.  lam_bar[i-1] is the influence of everything
    older than i steps.
    """

    lam: np.ndarray  # (H+1,)
    lam_bar: np.ndarray  # (H,)


def _gamma_at(gammas, s: int) -> float:
    # time 0 carries gamma = 1 by convention (gammas[0] must hold it);
    # negative times never matter because the weight formulas zero them out
    if s < 0:
        return 0.0
    return float(gammas[s])


def _w_at(ws, s: int, d: int) -> np.ndarray:
    if s < 0:
        return np.zeros(d)
    return np.asarray(ws[s], dtype=float)


def compute_lambdas(recent_gammas, H: int) -> LambdaWeights:
    """Weights at time t from [gamma_{t-1}, ..., gamma_{t-H}] (most recent first).

    lam[i] = gamma_{t-i} * prod_{j<i} (1 - gamma_{t-j}); the complement
    lam[0] equals the telescoped product prod_{j<=H} (1 - gamma_{t-j}), which
    keeps the normalization exact in floating point.
    """
    if len(recent_gammas) < H:
        raise ValueError(f"need {H} recent gammas, got {len(recent_gammas)}")
    lam = np.zeros(H + 1)
    lam_bar = np.zeros(H)
    prod = 1.0
    for i in range(1, H + 1):
        g = float(recent_gammas[i - 1])
        lam[i] = g * prod
        prod *= 1.0 - g
        lam_bar[i - 1] = prod
    lam[0] = prod
    return LambdaWeights(lam, lam_bar)


def dac_control(params: DacParams, lambdas: LambdaWeights, recent_ws) -> np.ndarray:
    """Disturbance-action control lam[0] p + sum_i lam[i] M^[i] w_{t-i}.

    recent_ws[i-1] is the perturbation i steps back.  The output's l1 norm
    equals ||p||_1 exactly, so the control stays admissible.
    """
    u = lambdas.lam[0] * params.p
    H = params.M.shape[0]
    for i in range(1, H + 1):
        if lambdas.lam[i] != 0.0:
            u = u + lambdas.lam[i] * (params.M[i - 1] @ np.asarray(recent_ws[i - 1], dtype=float))
    return u


def choose_a0(alpha_lb: float, alpha_ub: float, tau: float, tau_A) -> float:
    """Lower scale for the parameter domain: max(alpha_lb, min(alpha_ub, 1{tau_A > 4 tau}/(96 tau))).

    tau_A is the open-loop mixing time and may be math.inf, in which case the
    indicator is on: when the uncontrolled chain mixes slowly, competitive
    policies must carry at least this much control mass.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    indicator = 1.0 if tau_A > 4 * tau else 0.0
    return max(alpha_lb, min(alpha_ub, indicator / (96.0 * tau)))


def horizon_memory(tau: float, lipschitz: float, T: int) -> int:
    """Default memory length tau * ceil(log2(2 L T^3))."""
    return int(math.ceil(tau * math.ceil(math.log2(2.0 * lipschitz * T**3))))


def eta_experiment(d: int, H: int, T: int) -> float:
    """Experiment step-size preset sqrt(d H ln H) / (2 sqrt(T)).

    Note the ln(H) inside, versus ln(d) in the theory preset; both are
    exposed, and the preset degenerates at H = 1 (pass eta explicitly then).
    """
    if H < 2:
        raise ValueError("experiment preset needs H >= 2 (ln H vanishes); pass eta explicitly")
    return math.sqrt(d * H * math.log(H)) / (2.0 * math.sqrt(T))


def eta_theory(d: int, H: int, T: int, tau: float, lipschitz: float, c: float = 1.0) -> float:
    """Theory step-size preset c sqrt(d H ln d) / (L tau^2 ln(T)^2 sqrt(T))."""
    if d < 2:
        raise ValueError("theory preset needs d >= 2")
    return c * math.sqrt(d * H * math.log(d)) / (
        lipschitz * tau**2 * math.log(T) ** 2 * math.sqrt(T)
    )


def _lambda_rows(gammas, t: int, H: int) -> np.ndarray:
    # rows[s, i] = lam_{s,i} for rounds s = 1..t; row 0 unused
    rows = np.zeros((t + 1, H + 1))
    for s in range(1, t + 1):
        prod = 1.0
        for i in range(1, H + 1):
            g = _gamma_at(gammas, s - i)
            rows[s, i] = g * prod
            prod *= 1.0 - g
        rows[s, 0] = prod
    return rows


def replay_batch(p_batch, M_batch, system, gammas, ws, t: int, start: int = 1, x_start=None):
    """Replay rounds start..t-1 under each parameter row; return round-t states and controls.

    gammas/ws are absolute-time sequences with index 0 carrying the
    conventions gamma_0 = 1 and w_0 = x1; only entries before time t are
    read.  Parameters may be ambient (slightly infeasible): the replay just
    evaluates the update formulas.  By default the replay runs from the
    initial state; passing start > 1 with the observed state x_start anchors
    a truncated counterfactual window instead.
    """
    p_batch = np.asarray(p_batch, dtype=float)
    M_batch = np.asarray(M_batch, dtype=float)
    P, d = p_batch.shape
    H = M_batch.shape[1]
    dx = system.dim
    lam = _lambda_rows(gammas, t, H)
    W = np.zeros((t, dx))
    for s in range(min(t, len(ws))):
        W[s] = ws[s]
    # all controls are determined by (params, histories) alone, so build them
    # for every round at once
    U_all = lam[1 : t + 1, 0][None, :, None] * p_batch[:, None, :]  # (P, t, d)
    MW = np.einsum("bhij,sj->bhsi", M_batch, W)  # (P, H, t, d)
    for i in range(1, H + 1):
        n = t - i + 1
        if n <= 0:
            break
        U_all[:, i - 1 :, :] += lam[i : t + 1, i][None, :, None] * MW[:, i - 1, :n, :]
    if start <= 1 or x_start is None:
        start = 1
        x_start = system.x1
    X = np.tile(np.asarray(x_start, dtype=float), (P, 1))
    for s in range(start, t):
        g = _gamma_at(gammas, s)
        X = (1.0 - g) * system.transition_batch(X, U_all[:, s - 1]) + g * W[s]
    return X, U_all[:, t - 1]


def counterfactual_rollout(params: DacParams, system, gammas, ws, t: int):
    """State and control at round t had `params` been played at every prior round."""
    X, U = replay_batch(params.p[None, :], params.M[None, ...], system, gammas, ws, t)
    return X[0], U[0]


def counterfactual_closed_form(params: DacParams, A, B, x1, gammas, ws, t: int, H: int):
    """Closed-form counterfactual pair for linear systems; test oracle for the replay.

    Unrolls the linear update into a sum over the age i of each contribution,
    discounted by (1 - ||p||_1)^(i-1) and routed through A^(i-1).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    dx = A.shape[0]
    a = params.scale
    # extended weights at time t, ages 1..t (no H truncation)
    lam_t = np.zeros(t + 1)
    lam_bar_t = np.ones(t + 1)
    prod = 1.0
    for i in range(1, t + 1):
        g = _gamma_at(gammas, t - i)
        lam_t[i] = g * prod
        prod *= 1.0 - g
        lam_bar_t[i] = prod
    Bp = B @ params.p
    x = np.zeros(dx)
    Apow = np.eye(dx)
    for i in range(1, t + 1):
        s = t - i
        lam_s0 = 1.0
        for j in range(1, H + 1):
            lam_s0 *= 1.0 - _gamma_at(gammas, s - j)
        inner = lam_s0 * lam_bar_t[i] * Bp
        for j in range(1, H + 1):
            k = i + j
            if k <= t:
                inner = inner + lam_t[k] * (B @ (params.M[j - 1] @ _w_at(ws, t - k, dx)))
        inner = inner + lam_t[i] * _w_at(ws, t - i, dx)
        x = x + (1.0 - a) ** (i - 1) * (Apow @ inner)
        Apow = Apow @ A
    recent = [_w_at(ws, t - i, dx) for i in range(1, H + 1)]
    lambdas = compute_lambdas([_gamma_at(gammas, t - i) for i in range(1, H + 1)], H)
    u = dac_control(params, lambdas, recent)
    return x, u


def proxy_loss(params: DacParams, system, cost_fn, gammas, ws, t: int) -> float:
    """Round-t cost evaluated on the counterfactual pair for `params`."""
    x, u = counterfactual_rollout(params, system, gammas, ws, t)
    return float(cost_fn(x, u))


def proxy_loss_gradient(
    params: DacParams,
    system,
    cost_fn,
    gammas,
    ws,
    t: int,
    h: float = 1e-6,
    start: int = 1,
    x_start=None,
):
    """Central finite differences of the proxy loss over all free coordinates.

    Perturbs each coordinate of (p, M) in the ambient space (no
    renormalization) and replays the whole batch at once.  Returns
    (grad_p, grad_M, loss_at_center).
    """
    d = params.p.shape[0]
    H, _, dx = params.M.shape
    n = d + H * d * dx
    theta = np.concatenate([params.p, params.M.ravel()])
    Theta = np.tile(theta, (1 + 2 * n, 1))
    idx = np.arange(n)
    Theta[1 + 2 * idx, idx] += h
    Theta[2 + 2 * idx, idx] -= h
    X, U = replay_batch(
        Theta[:, :d], Theta[:, d:].reshape(-1, H, d, dx), system, gammas, ws, t, start, x_start
    )
    losses = np.array([float(cost_fn(X[r], U[r])) for r in range(1 + 2 * n)])
    g = (losses[1::2] - losses[2::2]) / (2.0 * h)
    return g[:d], g[d:].reshape(H, d, dx), float(losses[0])


def proxy_loss_gradient_exact(
    params: DacParams, system: SimplexLDS, cost_grad_x, cost_grad_u, gammas, ws, t: int
):
    """Exact proxy-loss gradient for linear systems by forward sensitivity propagation.

    cost_grad_x / cost_grad_u are the analytic partials of the round's cost.
    Assumes the parameter entries stay positive so that d||u||_1 equals the
    entry sum's differential.  Used as the oracle for the finite-difference
    path.
    """
    A, B = system.A, system.B
    d = params.p.shape[0]
    H, _, dx = params.M.shape
    n = d + H * d * dx
    lam = _lambda_rows(gammas, t, H)
    W = np.zeros((t, dx))
    for s in range(min(t, len(ws))):
        W[s] = ws[s]

    def control_and_jac(s):
        lam_s = lam[s]
        u = lam_s[0] * params.p
        Ju = np.zeros((d, n))
        Ju[:, :d] = lam_s[0] * np.eye(d)
        for i in range(1, H + 1):
            if s - i < 0 or lam_s[i] == 0.0:
                continue
            w = W[s - i]
            u = u + lam_s[i] * (params.M[i - 1] @ w)
            base = d + (i - 1) * d * dx
            for a_row in range(d):
                Ju[a_row, base + a_row * dx : base + (a_row + 1) * dx] += lam_s[i] * w
        return u, Ju

    x = np.asarray(system.x1, dtype=float)
    Jx = np.zeros((dx, n))
    for s in range(1, t):
        u, Ju = control_and_jac(s)
        sigma = float(u.sum())
        Jsigma = Ju.sum(axis=0)
        g = _gamma_at(gammas, s)
        Ax = A @ x
        Jx = (1.0 - g) * ((1.0 - sigma) * (A @ Jx) - np.outer(Ax, Jsigma) + B @ Ju)
        x = (1.0 - g) * ((1.0 - sigma) * Ax + B @ u) + g * W[s]
    u_t, Ju_t = control_and_jac(t)
    grad = Jx.T @ np.asarray(cost_grad_x(x, u_t), dtype=float)
    grad += Ju_t.T @ np.asarray(cost_grad_u(x, u_t), dtype=float)
    return grad[:d], grad[d:].reshape(H, d, dx)


@dataclass
class GpcDiagnostics:
    """Per-round proxy losses and the parameters that produced each control."""

    ts: list = field(default_factory=list)
    proxy_losses: list = field(default_factory=list)
    scales: list = field(default_factory=list)
    ps: list = field(default_factory=list)

    def append(self, t: int, proxy_loss_value: float, params: DacParams) -> None:
        self.ts.append(t)
        self.proxy_losses.append(proxy_loss_value)
        self.scales.append(params.scale)
        self.ps.append(params.p.copy())

    def to_csv(self, path) -> None:
        d = len(self.ps[0]) if self.ps else 0
        header = ["t", "proxy_loss", "param_scale"] + [f"p_{i + 1}" for i in range(d)]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for t, loss, scale, p in zip(self.ts, self.proxy_losses, self.scales, self.ps):
                row = [str(t), f"{loss:.17g}", f"{scale:.17g}"] + [f"{v:.17g}" for v in p]
                fh.write(",".join(row) + "\n")


class _HistoryMixin:
    """Perturbation and strength histories with the time-0 conventions baked in."""

    def _init_history(self, system):
        self._gammas = [1.0]
        self._ws = [np.asarray(system.x1, dtype=float)]

    def _recent_gammas(self, t: int, H: int):
        return [_gamma_at(self._gammas, t - i) for i in range(1, H + 1)]

    def _recent_ws(self, t: int, H: int, d: int):
        return [_w_at(self._ws, t - i, d) for i in range(1, H + 1)]


class GpcSimplex(_HistoryMixin):
    """Online controller: disturbance-action policy plus a mirror-descent learner.

    Plays through the rollout protocol (reset / control / observe).  The
    perturbation each round is recovered from the observed transition, never
    read from the schedule.

    replay selects the counterfactual used for the proxy loss: "full"
    replays from the initial state at every round (the analyzed surrogate),
    "recent" anchors a window of `window` rounds (default H) at the observed
    state x_{t-window}, which gives nonzero learning signal from round one
    and tracks nonlinear systems far better; the two coincide while
    t <= window + 1.
    """

    def __init__(
        self,
        system,
        T: int,
        H: int,
        eta: float | None = None,
        step_preset: str = "experiment",
        tau: float | None = None,
        optimizer: str | None = None,
        lipschitz: float = 1.0,
        fd_step: float = 1e-6,
        a0: float | None = None,
        replay: str = "full",
        window: int | None = None,
    ):
        self.system = system
        self.T = T
        self.H = H
        d = system.control_dim
        dx = system.dim
        cs = system.control_set
        if a0 is None:
            if tau is not None and isinstance(system, SimplexLDS):
                tau_A = mixing_time(system.A, 0.25, t_cap=max(1000, int(math.ceil(10 * tau))))
                a0 = choose_a0(cs.alpha_lb, cs.alpha_ub, tau, tau_A)
            else:
                a0 = cs.alpha_lb
        self.domain = DacDomain(d=d, H=H, a0=a0, a_ub=cs.alpha_ub, d_state=dx)
        if eta is None:
            if step_preset == "experiment":
                eta = eta_experiment(d, H, T)
            elif step_preset == "theory":
                if tau is None:
                    raise ValueError("theory preset needs tau")
                eta = eta_theory(d, H, T, tau, lipschitz)
            else:
                raise ValueError(f"unknown step preset {step_preset!r}")
        self.eta = eta
        if optimizer is None:
            optimizer = "exp-weights" if self.domain.a0 == self.domain.a_ub else "ftrl"
        if optimizer == "exp-weights":
            self.opt = ExpWeights(self.domain, eta)
        elif optimizer == "ftrl":
            self.opt = LazyMirrorDescent(self.domain, eta)
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        self.fd_step = fd_step
        if replay not in ("full", "recent"):
            raise ValueError(f"unknown replay mode {replay!r}")
        self.replay = replay
        self.window = H if window is None else int(window)
        self.diagnostics = GpcDiagnostics()
        self.reset(system, T)

    @property
    def params(self) -> DacParams:
        return self.opt.params

    def reset(self, system, T: int):
        self._init_history(system)
        self._states = [None, np.asarray(system.x1, dtype=float)]  # states[s] = x_s

    def control(self, t: int, x) -> np.ndarray:
        lambdas = compute_lambdas(self._recent_gammas(t, self.H), self.H)
        return dac_control(self.opt.params, lambdas, self._recent_ws(t, self.H, self.system.dim))

    def observe(self, t, x, u, cost_fn, gamma, x_next):
        w = recover_perturbation(x, u, x_next, gamma, self.system)
        if self.replay == "recent":
            start = max(1, t - self.window)
            x_start = self._states[start]
        else:
            start, x_start = 1, None
        # the proxy loss replays rounds before t, so the histories must not
        # yet contain this round's (gamma, w)
        g_p, g_M, loss = proxy_loss_gradient(
            self.opt.params,
            self.system,
            cost_fn,
            self._gammas,
            self._ws,
            t,
            self.fd_step,
            start,
            x_start,
        )
        self.diagnostics.append(t, loss, self.opt.params)
        self._gammas.append(float(gamma))
        self._ws.append(w)
        self._states.append(np.asarray(x_next, dtype=float))
        self.opt.update(g_p, g_M)


class FixedDacController(_HistoryMixin):
    """Plays a frozen disturbance-action policy; no learning."""

    def __init__(self, system, params: DacParams):
        self.system = system
        self.params = params
        self.H = params.M.shape[0]
        self._init_history(system)

    def reset(self, system, T: int):
        self._init_history(system)

    def control(self, t: int, x) -> np.ndarray:
        lambdas = compute_lambdas(self._recent_gammas(t, self.H), self.H)
        return dac_control(self.params, lambdas, self._recent_ws(t, self.H, self.system.dim))

    def observe(self, t, x, u, cost_fn, gamma, x_next):
        w = recover_perturbation(x, u, x_next, gamma, self.system)
        self._gammas.append(float(gamma))
        self._ws.append(w)


def run_gpc(system, T: int, H: int, **kwargs):
    """Run the controller for T rounds; returns (Trajectory, GpcDiagnostics)."""
    agent = GpcSimplex(system, T, H, **kwargs)
    traj = rollout(system, agent, T)
    return traj, agent.diagnostics
