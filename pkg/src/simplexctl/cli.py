"""Batch experiment runner: named experiments, seeded schedules, CSV/JSONL reports.

Configuration is a flat key = value text file; every key has a typed default
per experiment and unknown keys are rejected.  Two runs with the same config
and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import applications as apps
from .controller import GpcSimplex
from .dynamics import ConstantController, SimplexLDS, rollout
from .mixing import InfiniteMixing, mixing_profile
from .seeding import rng_for
from .simplex import ControlSet


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            elem = default[0] if default else 0.0
            parts = [p for p in raw.split(",") if p.strip() != ""]
            return tuple(type(elem)(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} ({exc})") from None


def resolve_config(name: str, raw: dict, overrides: dict) -> dict:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; valid: {', '.join(sorted(EXPERIMENTS))}")
    defaults = EXPERIMENTS[name]["defaults"]
    cfg = dict(defaults)
    for source in (raw, overrides):
        for key, value in source.items():
            if key == "experiment":
                continue
            if key not in defaults:
                raise ConfigError(
                    f"unknown key {key!r} for experiment {name!r}; "
                    f"valid keys: {', '.join(sorted(defaults))}"
                )
            cfg[key] = _coerce(key, value, defaults[key]) if isinstance(value, str) else value
    return cfg


def _gamma_schedule(spec: str, T: int, rng) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    if kind == "zero":
        return np.zeros(T)
    if kind == "const":
        return np.full(T, float(rest))
    if kind == "bernoulli":
        value, prob = (float(p) for p in rest.split(":"))
        return apps.bernoulli_gamma_schedule(T, value, prob, rng)
    if kind == "pulse":
        t_idx, value = rest.split(":")
        out = np.zeros(T)
        out[int(t_idx) - 1] = float(value)
        return out
    raise ConfigError(f"unknown gamma spec {spec!r} (zero | const:v | bernoulli:v:p | pulse:t:v)")


def _noise_schedule(spec: str, T: int, d: int, rng) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    if kind == "zero":
        return np.zeros((T, d))
    if kind == "const":
        w = np.array([float(p) for p in rest.split(",")])
        if len(w) != d:
            raise ConfigError(f"noise vector length {len(w)} != dimension {d}")
        return np.tile(w, (T, 1))
    if kind == "uniform":
        return apps.normalized_uniform_noise(T, d, rng)
    raise ConfigError(f"unknown w spec {spec!r} (zero | const:v1,..,vd | uniform)")


def _cost_fn(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "abs-coord":
        idx, target = rest.split(":")
        i, v = int(idx) - 1, float(target)
        return lambda x, u: abs(float(x[i]) - v)
    if kind == "quad-coord":
        i = int(rest) - 1
        return lambda x, u: float(x[i]) ** 2
    raise ConfigError(f"unknown cost spec {spec!r} (abs-coord:i:v | quad-coord:i)")


# ---------------------------------------------------------------------------
# output helpers


def _write_summary(out_dir: str, records: list) -> None:
    path = os.path.join(out_dir, "summary.jsonl")
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _summarize(experiment: str, seed: int, named_trajs: list) -> list:
    best = min(traj.total_cost for _, traj in named_trajs)
    return [
        {
            "experiment": experiment,
            "policy": policy,
            "total_cost": traj.total_cost,
            "regret_vs_best": traj.total_cost - best,
            "seed": seed,
        }
        for policy, traj in named_trajs
    ]


def _emit(experiment: str, out_dir: str, seed: int, named_trajs: list, diagnostics=None) -> list:
    for policy, traj in named_trajs:
        traj.to_csv(os.path.join(out_dir, f"{experiment}_{policy}.csv"))
    if diagnostics is not None:
        diagnostics.to_csv(os.path.join(out_dir, f"{experiment}_gpc-simplex_diagnostics.csv"))
    records = _summarize(experiment, seed, named_trajs)
    _write_summary(out_dir, records)
    return records


# ---------------------------------------------------------------------------
# experiment runners


def _run_sir(name: str, cfg: dict, out_dir: str, seed: int) -> list:
    T, H = cfg["T"], cfg["H"]
    prm = apps.SirParams(cfg["beta"], cfg["theta"], cfg["xi"])
    rng = rng_for(seed, f"{name}-noise")
    gammas = _gamma_schedule(cfg["gamma"], T, rng_for(seed, f"{name}-gamma"))
    noises = _noise_schedule(cfg["w"], T, 3, rng)
    system = apps.make_sir_system(
        prm, np.array(cfg["x1"]), T, c2=cfg["c2"], c3=cfg["c3"], gammas=gammas, noises=noises
    )
    eta = cfg["eta"] if cfg["eta"] > 0 else None
    agent = GpcSimplex(system, T, H, eta=eta, step_preset=cfg["step_preset"])
    gpc = rollout(system, agent, T)
    full = rollout(system, ConstantController([1.0, 0.0]), T)
    none = rollout(system, ConstantController([0.0, 1.0]), T)
    named = [("gpc-simplex", gpc), ("full-prevention", full), ("no-prevention", none)]
    return _emit(name, out_dir, seed, named, agent.diagnostics)


def _run_hospital(cfg: dict, out_dir: str, seed: int) -> list:
    T, H = cfg["T"], cfg["H"]
    cost_prm = apps.HospitalCostParams(cfg["c2"], cfg["c3"], cfg["y_max"], cfg["sigma0"])
    system = apps.make_hospital_system(
        np.array(cfg["x1"]), T, cost_prm, beta=cfg["beta"], theta=cfg["theta"], xi=cfg["xi"]
    )
    eta = cfg["eta"] if cfg["eta"] > 0 else None
    agent = GpcSimplex(system, T, H, eta=eta, step_preset=cfg["step_preset"])
    gpc = rollout(system, agent, T)
    none = rollout(system, ConstantController([0.0, 1.0]), T)
    named = [("gpc-simplex", gpc), ("no-prevention", none)]
    records = _emit("hospital", out_dir, seed, named, agent.diagnostics)
    ref = cfg["reference_csv"]
    if ref:
        if not os.path.exists(ref):
            print(f"warning: reference trajectory {ref!r} not found; skipping comparison",
                  file=sys.stderr)
        else:
            # columns t,S,I,u; compare infected curves where horizons overlap
            data = np.loadtxt(ref, delimiter=",", skiprows=1)
            n = min(T, data.shape[0])
            gap = float(np.abs(gpc.xs[:n, 1] - data[:n, 2]).max())
            records.append(
                {
                    "experiment": "hospital",
                    "policy": "reference-comparison",
                    "total_cost": gap,
                    "regret_vs_best": 0.0,
                    "seed": seed,
                }
            )
            _write_summary(out_dir, records)
    return records


def _run_replicator(name: str, cfg: dict, out_dir: str, seed: int) -> list:
    T, H = cfg["T"], cfg["H"]
    prm = apps.RpsParams(cfg["eta_rep"])
    x1 = np.array(cfg["x1"])
    if cfg["random_cost"]:
        fns, _ = apps.random_rps_cost_schedule(T, rng_for(seed, "rps-cost-coins"))
    else:
        fns = [apps.rock_share_cost] * T
    system = apps.make_rps_system(x1, T, prm, fns)
    eta = cfg["eta"] if cfg["eta"] > 0 else None
    agent = GpcSimplex(system, T, H, eta=eta, step_preset=cfg["step_preset"])
    gpc = rollout(system, agent, T)
    br = rollout(system, apps.BestResponseController(system, cfg["grid_resolution"]), T)
    uni = rollout(system, apps.uniform_control(3), T)
    named = [("gpc-simplex", gpc), ("best-response", br), ("uniform-default", uni)]
    return _emit(name, out_dir, seed, named, agent.diagnostics)


def _run_lowerbound(cfg: dict, out_dir: str, seed: int) -> list:
    T_list = [int(t) for t in cfg["T_list"]]
    H, tau = cfg["H"], cfg["tau"]

    def factory(system, T):
        return GpcSimplex(system, T, H, step_preset="theory", tau=tau, optimizer="ftrl")

    result = apps.lower_bound_regret_harness(
        factory, cfg["variant"], cfg["beta_lb"], T_list, cfg["trials"], seed
    )
    table = os.path.join(out_dir, "lowerbound_regret_table.csv")
    with open(table, "w") as fh:
        fh.write("T,mean_regret,stderr,trials\n")
        for row in result["rows"]:
            fh.write(
                f"{row['T']},{row['mean_regret']:.17g},{row['stderr']:.17g},{row['trials']}\n"
            )
    records = [
        {
            "experiment": "lowerbound",
            "policy": "gpc-simplex",
            "T": row["T"],
            "total_cost": row["mean_regret"],
            "regret_vs_best": row["mean_regret"],
            "seed": seed,
        }
        for row in result["rows"]
    ]
    records.append(
        {
            "experiment": "lowerbound",
            "policy": "regret-slope",
            "total_cost": result["slope"],
            "regret_vs_best": result["slope"],
            "seed": seed,
        }
    )
    _write_summary(out_dir, records)
    return records


def _run_mixing_report(cfg: dict, out_dir: str, seed: int) -> list:
    d = cfg["dim"]
    entries = np.array(cfg["matrix"]).reshape(d, d)
    path = os.path.join(out_dir, "mixing-report_profile.csv")
    try:
        profile = mixing_profile(entries, t_max=cfg["t_max"])
        t_mix = profile.t_mix_quarter
        stationary = [float(v) for v in profile.stationary]
        with open(path, "w") as fh:
            fh.write("t,d,dbar\n")
            for t in sorted(profile.d_values):
                fh.write(f"{t},{profile.d_values[t]:.17g},{profile.dbar_values[t]:.17g}\n")
    except InfiniteMixing:
        # no unique stationary distribution: every profile quantity is infinite
        t_mix, stationary = math.inf, None
        with open(path, "w") as fh:
            fh.write("t,d,dbar\n")
            for t in range(cfg["t_max"] + 1):
                fh.write(f"{t},inf,inf\n")
    records = [
        {
            "experiment": "mixing-report",
            "policy": "matrix",
            "total_cost": 0.0,
            "regret_vs_best": 0.0,
            "seed": seed,
            "t_mix_quarter": t_mix if t_mix != math.inf else "inf",
            "stationary": stationary,
        }
    ]
    _write_summary(out_dir, records)
    return records


def _run_custom(cfg: dict, out_dir: str, seed: int) -> list:
    d, T, H = cfg["dim"], cfg["T"], cfg["H"]
    A = np.array(cfg["A"]).reshape(d, d)
    B = np.array(cfg["B"]).reshape(d, d)
    cs = ControlSet(cfg["alpha_lb"], cfg["alpha_ub"])
    gammas = _gamma_schedule(cfg["gamma"], T, rng_for(seed, "custom-gamma"))
    noises = _noise_schedule(cfg["w"], T, d, rng_for(seed, "custom-noise"))
    cost = _cost_fn(cfg["cost"])
    system = SimplexLDS(A, B, cs, np.array(cfg["x1"]), gammas, noises, [cost] * T)
    eta = cfg["eta"] if cfg["eta"] > 0 else None
    tau = cfg["tau"] if cfg["tau"] > 0 else None
    agent = GpcSimplex(system, T, H, eta=eta, step_preset=cfg["step_preset"], tau=tau)
    named = [("gpc-simplex", rollout(system, agent, T))]
    if cs.contains(0.0):
        named.append(("zero-control", rollout(system, ConstantController(np.zeros(d)), T)))
    named.append(
        ("uniform-control", rollout(system, ConstantController(np.full(d, cs.alpha_ub / d)), T))
    )
    return _emit("custom-simplex-lds", out_dir, seed, named, agent.diagnostics)


# ---------------------------------------------------------------------------
# experiment registry

_SIR_EQUATIONS = """\
state x = (S, I, R) on the 3-simplex; control u = (prevent, allow) on the 2-simplex
  S' = (1 - beta*I)*S + xi*R + beta*I*S*u_1
  I' = (1 - theta)*I + beta*I*S*u_2
  R' = theta*I + (1 - xi)*R
noise mixing: x_{t+1} = (1 - gamma_t) * f(x_t, u_t) + gamma_t * w_t
effective transmission rate: beta * u_2"""

EXPERIMENTS = {
    "sir": {
        "defaults": {
            "T": 200,
            "H": 5,
            "beta": 0.5,
            "theta": 0.03,
            "xi": 0.005,
            "x1": (0.9, 0.1, 0.0),
            "c2": 1.0,
            "c3": 10.0,
            "gamma": "zero",
            "w": "zero",
            "eta": 0.0,
            "step_preset": "experiment",
        },
        "runner": lambda cfg, out, seed: _run_sir("sir", cfg, out, seed),
        "description": f"""Controlled epidemic, quadratic infection cost.
{_SIR_EQUATIONS}
cost: c3 * I^2 + c2 * S * u_1   (defaults c2=1, c3=10)
defaults: T=200, H=5, beta=0.5, theta=0.03, xi=0.005, x1=(0.9, 0.1, 0), no noise
policies: gpc-simplex, full-prevention u=(1,0), no-prevention u=(0,1)
outputs: sir_<policy>.csv, sir_gpc-simplex_diagnostics.csv, summary.jsonl""",
    },
    "sir-noisy": {
        "defaults": {
            "T": 200,
            "H": 5,
            "beta": 0.5,
            "theta": 0.03,
            "xi": 0.005,
            "x1": (0.9, 0.1, 0.0),
            "c2": 1.0,
            "c3": 5.0,
            "gamma": "bernoulli:0.01:0.2",
            "w": "const:0,1,0",
            "eta": 0.0,
            "step_preset": "experiment",
        },
        "runner": lambda cfg, out, seed: _run_sir("sir-noisy", cfg, out, seed),
        "description": f"""Controlled epidemic under adversarial arrivals.
{_SIR_EQUATIONS}
cost: c3 * I^2 + c2 * S * u_1   (defaults c2=1, c3=5)
noise defaults: gamma_t = 0.01 * Bernoulli(0.2) iid, w_t = (0, 1, 0) (infected arrivals)
also supported: w = uniform (renormalized uniform random arrivals), gamma = const:v
policies: gpc-simplex, full-prevention, no-prevention""",
    },
    "hospital": {
        "defaults": {
            "T": 100,
            "H": 5,
            "beta": 0.3,
            "theta": 0.1,
            "xi": 0.0,
            "sigma0": 3.0,
            "y_max": 0.1,
            "c2": 0.01,
            "c3": 100.0,
            "x1": (0.9, 0.01, 0.09),
            "eta": 0.0,
            "step_preset": "experiment",
            "reference_csv": "",
        },
        "runner": lambda cfg, out, seed: _run_hospital(cfg, out, seed),
        "description": f"""Hospital-capacity control: keep infections under the surge threshold.
{_SIR_EQUATIONS}
cost: -W0(-sigma0*I*exp(-sigma0*(S+I)))/sigma0 + c2*u_1^2
      + c3*(I - y_max) / (1 + exp(-100*(I - y_max)))
  (W0 = principal branch of Lambert's W; the first term scores the long-run
   susceptible fraction, the last smoothly penalizes exceeding capacity y_max)
defaults: T=100, beta=0.3, theta=0.1, xi=0, x1=(0.9, 0.01, 0.09), y_max=0.1,
          c2=0.01, c3=100
reference_csv (optional): columns t,S,I,u; when present the summary reports the
max infected-curve gap to it, otherwise only qualitative checks apply
policies: gpc-simplex, no-prevention""",
    },
    "replicator": {
        "defaults": {
            "T": 100,
            "H": 5,
            "eta_rep": 0.25,
            "x1": (1 / 3, 1 / 3, 1 / 3),
            "grid_resolution": 50,
            "random_cost": False,
            "eta": 0.0,
            "step_preset": "experiment",
        },
        "runner": lambda cfg, out, seed: _run_replicator("replicator", cfg, out, seed),
        "description": """Controlled rock-paper-scissors replicator dynamics.
payoff steered by the control u on the 3-simplex:
  M(u) = [[0, u_1, -u_3], [-u_1, 0, u_2], [u_3, -u_2, 0]]
  x_{t+1} = x_t + eta_rep * x_t * (M(u_t) x_t)     (eta_rep = 1/4)
cost: x_1^2 (penalizes the first strategy), T=100, uniform start
policies: gpc-simplex, best-response (minimizes the previous round's cost one
step ahead over a simplex grid), uniform-default u=(1/3,1/3,1/3)""",
    },
    "replicator-random-cost": {
        "defaults": {
            "T": 200,
            "H": 5,
            "eta_rep": 0.25,
            "x1": (1 / 3, 1 / 3, 1 / 3),
            "grid_resolution": 50,
            "random_cost": True,
            "eta": 0.0,
            "step_preset": "experiment",
        },
        "runner": lambda cfg, out, seed: _run_replicator(
            "replicator-random-cost", cfg, out, seed
        ),
        "description": """Replicator control with a coin-flip cost sequence.
Each round the cost is x_1^2 or x_1^2 + u_3^2 with probability 1/2 (seeded).
The greedy best-response baseline optimizes the stale previous cost and
suffers; reported figures use a trailing min(t, 15)-step average.
defaults: T=200, eta_rep=1/4, uniform start""",
    },
    "lowerbound": {
        "defaults": {
            "variant": "simplex",
            "beta_lb": 32.0,
            "T_list": (100, 200),
            "trials": 5,
            "H": 2,
            "tau": 1.0,
        },
        "runner": lambda cfg, out, seed: _run_lowerbound(cfg, out, seed),
        "description": """Two-branch adversarial instances where causal control pays linear regret.
Two systems share identity transitions on the 2-simplex and a half-strength
shock at T/2 toward (1/2,1/2) (branch 0) or (1,0) (branch 1); the branch is
drawn uniformly per trial and is invisible before the shock.  Costs are
|x_2 - 1/2| after T/2; controls are capped at beta_lb/T.  Comparators: the
constant drift policy K = (beta_lb/T)*uniform and the lazy policy K = 0.
variant=standard-lds gives the scalar analogue x' = x - (beta_lb/T) u + w with
cost |x| + |u|.  Outputs a mean-regret-vs-T table and its slope.""",
    },
    "mixing-report": {
        "defaults": {
            "dim": 2,
            "matrix": (0.7, 0.3, 0.3, 0.7),
            "t_max": 20,
        },
        "runner": lambda cfg, out, seed: _run_mixing_report(cfg, out, seed),
        "description": """Distance-to-stationarity profile of a column-stochastic matrix.
Tabulates D(t) = max_j ||X^t e_j - pi||_1 and
Dbar(t) = max_{j,k} ||X^t (e_j - e_k)||_1 for t = 0..t_max, plus the
quarter-mixing time min{t : D(t) <= 1/4}.  matrix is row-major.""",
    },
    "custom-simplex-lds": {
        "defaults": {
            "dim": 2,
            "A": (0.7, 0.3, 0.3, 0.7),
            "B": (1.0, 0.0, 0.0, 1.0),
            "x1": (1.0, 0.0),
            "alpha_lb": 0.0,
            "alpha_ub": 0.5,
            "T": 100,
            "H": 3,
            "gamma": "zero",
            "w": "zero",
            "cost": "abs-coord:2:0.5",
            "eta": 0.0,
            "tau": 1.0,
            "step_preset": "theory",
        },
        "runner": lambda cfg, out, seed: _run_custom(cfg, out, seed),
        "description": """User-specified linear system on the simplex.
x_{t+1} = (1 - gamma_t) * [(1 - ||u_t||_1) A x_t + B u_t] + gamma_t * w_t
A, B are row-major column-stochastic matrices; controls satisfy
alpha_lb <= ||u||_1 <= alpha_ub.  Cost presets: abs-coord:i:v -> |x_i - v|,
quad-coord:i -> x_i^2.  Noise specs as in the other experiments.
policies: gpc-simplex, zero-control (when feasible), uniform-control""",
    },
}


# ---------------------------------------------------------------------------
# entry points


def run_experiment(config: dict, out_dir: str, seed: int | None = None) -> list:
    """Validate the config and execute; returns the summary records."""
    name = config.get("experiment")
    if not name:
        raise ConfigError("config must set 'experiment'")
    if seed is None:
        seed = int(config.get("seed", 0))
    raw = {k: v for k, v in config.items() if k not in ("experiment", "seed")}
    cfg = resolve_config(name, raw, {})
    os.makedirs(out_dir, exist_ok=True)
    return EXPERIMENTS[name]["runner"](cfg, out_dir, seed)


def describe(name: str) -> str:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; valid: {', '.join(sorted(EXPERIMENTS))}")
    defaults = EXPERIMENTS[name]["defaults"]
    lines = [f"experiment: {name}", "", EXPERIMENTS[name]["description"], "", "config keys:"]
    for key in sorted(defaults):
        lines.append(f"  {key} = {defaults[key]}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simplexctl", description="Run simplex control experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="path to a key = value config file")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="master seed")
    p_desc = sub.add_parser("describe", help="print an experiment's model and defaults")
    p_desc.add_argument("name")
    sub.add_parser("list", help="list experiments")
    args = parser.parse_args(argv)

    try:
        if args.command == "list":
            for name in sorted(EXPERIMENTS):
                first = EXPERIMENTS[name]["description"].splitlines()[0]
                print(f"{name:24s} {first}")
            return 0
        if args.command == "describe":
            print(describe(args.name))
            return 0
        with open(args.config) as fh:
            config = parse_config_text(fh.read())
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            config[key.strip()] = value.strip()
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        records = run_experiment(config, args.out, seed)
        for rec in records:
            print(json.dumps(rec, sort_keys=True))
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
