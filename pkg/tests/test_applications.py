import math

import numpy as np
import pytest
import scipy.special

import simplexctl as sc
from simplexctl import applications as apps
from simplexctl.seeding import rng_for
from simplexctl.simplex import check_dist


# ---------------------------------------------------------------------------
# epidemic model


def test_sir_transition_examples():
    prm = apps.SirParams(0.5, 0.03, 0.005)
    x = np.array([0.9, 0.1, 0.0])
    out = apps.sir_transition(x, [0.0, 1.0], prm)
    assert np.allclose(out, [0.855, 0.142, 0.003], atol=1e-12)
    out = apps.sir_transition(x, [1.0, 0.0], prm)
    assert np.allclose(out, [0.9, 0.097, 0.003], atol=1e-12)
    # no infected: susceptibles only gain recycled immunity-losers
    out = apps.sir_transition([0.7, 0.0, 0.3], [0.5, 0.5], prm)
    assert np.allclose(out, [0.7 + 0.005 * 0.3, 0.0, 0.995 * 0.3], atol=1e-15)


def test_sir_mass_conservation(rng):
    prm = apps.SirParams(0.5, 0.03, 0.005)
    for _ in range(200):
        x = rng.dirichlet(np.ones(3))
        u = rng.dirichlet(np.ones(2))
        out = apps.sir_transition(x, u, prm)
        assert abs(out.sum() - 1.0) <= 1e-12
        assert out.min() >= -1e-15


def test_sir_transition_batch_matches_scalar(rng):
    prm = apps.SirParams(0.4, 0.05, 0.01)
    X = np.stack([rng.dirichlet(np.ones(3)) for _ in range(16)])
    U = np.stack([rng.dirichlet(np.ones(2)) for _ in range(16)])
    batch = apps.sir_transition_batch(X, U, prm)
    for r in range(16):
        assert np.allclose(batch[r], apps.sir_transition(X[r], U[r], prm), atol=1e-15)


def test_sir_cost_examples():
    x = np.array([0.9, 0.1, 0.0])
    assert apps.sir_cost(x, [0.0, 1.0], c2=1.0, c3=10.0) == pytest.approx(0.1, abs=1e-15)
    assert apps.sir_cost(x, [1.0, 0.0], c2=1.0, c3=10.0) == pytest.approx(1.0, abs=1e-15)
    assert apps.sir_cost([0.5, 0.0, 0.5], [0.0, 1.0], c2=1.0, c3=10.0) == 0.0


def test_sir_params_validation():
    with pytest.raises(ValueError):
        apps.SirParams(1.5, 0.03, 0.005)


# ---------------------------------------------------------------------------
# Lambert W and the hospital cost


def test_lambert_w0_examples():
    assert apps.lambert_w0(0.0) == 0.0
    assert apps.lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
    assert apps.lambert_w0(-1.0 / math.e) == -1.0
    with pytest.raises(apps.DomainError):
        apps.lambert_w0(-1.0 / math.e - 1e-9)


def test_lambert_w0_residual_grid():
    # log-spaced grid over [-1/e, 1e6]: residual |w e^w - x| <= 1e-12 * max(1, |x|)
    xs = list(-1.0 / math.e + np.logspace(-12, 0, 60))
    xs += [0.0] + list(np.logspace(-12, 6, 80))
    for x in xs:
        w = apps.lambert_w0(x)
        assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))
        assert w >= -1.0 - 1e-12


def test_lambert_w0_against_scipy():
    for x in [-0.367, -0.2, -0.05, 0.0, 0.3, 1.0, 7.5, 123.0, 5e4]:
        assert apps.lambert_w0(x) == pytest.approx(
            float(scipy.special.lambertw(x).real), rel=1e-12, abs=1e-12
        )


HOSP = apps.HospitalCostParams(c2=0.01, c3=100.0, y_max=0.1, sigma0=3.0)


def test_hospital_cost_examples():
    # no infection, no prevention: only the surge term's far tail remains
    val = apps.hospital_cost([0.7, 0.0, 0.3], [0.0, 1.0], HOSP)
    assert val == pytest.approx(-0.00045397868702434395, abs=1e-15)
    assert abs(val) < 1e-3
    # frozen from a 40-digit evaluation of the defining formula
    val = apps.hospital_cost([0.9, 0.01, 0.09], [0.0, 1.0], HOSP)
    assert val == pytest.approx(-0.00045707846230717439, abs=1e-15)
    val = apps.hospital_cost([0.9, 0.01, 0.09], [1.0, 0.0], HOSP)
    assert val == pytest.approx(0.0095429215376928256, abs=1e-15)


def test_hospital_cost_continuous_at_capacity():
    lo = apps.hospital_cost([0.8, HOSP.y_max - 1e-9, 0.1], [0.0, 1.0], HOSP)
    hi = apps.hospital_cost([0.8, HOSP.y_max + 1e-9, 0.1], [0.0, 1.0], HOSP)
    assert abs(hi - lo) < 1e-6


def test_hospital_cost_domain_guard(rng):
    # the W argument stays inside the domain everywhere on the simplex
    for _ in range(500):
        x = rng.dirichlet(np.ones(3))
        apps.hospital_cost(x, [0.3, 0.7], HOSP)  # must not raise
    boundary = apps.hospital_cost([0.0, 1 / 3, 2 / 3], [0.0, 1.0], HOSP)
    assert np.isfinite(boundary)


def test_hospital_params_validation():
    with pytest.raises(ValueError):
        apps.HospitalCostParams(c2=0.01, c3=100.0, y_max=1.5, sigma0=3.0)


# ---------------------------------------------------------------------------
# replicator dynamics


def test_rps_payoff_examples():
    M = apps.rps_payoff([1 / 3, 1 / 3, 1 / 3])
    std = np.array([[0, 1, -1], [-1, 0, 1], [1, -1, 0]], dtype=float)
    assert np.allclose(M, std / 3, atol=1e-15)
    M = apps.rps_payoff([1.0, 0.0, 0.0])
    expect = np.zeros((3, 3))
    expect[0, 1], expect[1, 0] = 1.0, -1.0
    assert np.array_equal(M, expect)
    for u in (np.array([0.2, 0.5, 0.3]), np.array([0.0, 0.0, 1.0])):
        M = apps.rps_payoff(u)
        assert np.allclose(M + M.T, 0.0, atol=1e-15)


def test_replicator_transition_examples():
    prm = apps.RpsParams(0.25)
    uni = np.ones(3) / 3
    assert np.allclose(apps.replicator_transition(uni, uni, prm), uni, atol=1e-15)
    out = apps.replicator_transition(uni, [1.0, 0.0, 0.0], prm)
    assert np.allclose(out, [1 / 3 + 1 / 36, 1 / 3 - 1 / 36, 1 / 3], atol=1e-15)
    assert out.sum() == pytest.approx(1.0, abs=1e-15)


def test_replicator_closure(rng):
    for _ in range(300):
        eta = float(rng.uniform(0.05, 1.0))
        prm = apps.RpsParams(eta)
        x = rng.dirichlet(np.ones(3))
        u = rng.dirichlet(np.ones(3))
        out = apps.replicator_transition(x, u, prm)
        assert check_dist(out, 1e-12) is None


def test_replicator_batch_matches_scalar(rng):
    prm = apps.RpsParams(0.25)
    X = np.stack([rng.dirichlet(np.ones(3)) for _ in range(12)])
    U = np.stack([rng.dirichlet(np.ones(3)) for _ in range(12)])
    batch = apps.replicator_transition_batch(X, U, prm)
    for r in range(12):
        assert np.allclose(batch[r], apps.replicator_transition(X[r], U[r], prm), atol=1e-15)


def test_rps_params_validation():
    with pytest.raises(ValueError):
        apps.RpsParams(1.5)


def test_trailing_window_average():
    vals = np.arange(1.0, 21.0)
    out = apps.trailing_window_average(vals, window=15)
    assert out[0] == 1.0
    assert out[2] == pytest.approx(2.0)
    assert out[-1] == pytest.approx(np.mean(vals[-15:]))


# ---------------------------------------------------------------------------
# baselines


def test_simplex_lattice():
    pts = apps.simplex_lattice(3, 4)
    assert len(pts) == 15  # (4+1)(4+2)/2 compositions
    assert np.allclose(pts.sum(axis=1), 1.0, atol=1e-15)
    assert np.array_equal(pts[0], [0.0, 0.0, 1.0])  # lexicographically first


def test_best_response_tie_break():
    prm = apps.RpsParams(0.25)
    system = apps.make_rps_system(np.ones(3) / 3, 5, prm)
    flat = lambda x, u: 0.0
    u = apps.best_response_control(np.ones(3) / 3, system, flat, grid_resolution=4)
    assert np.array_equal(u, [0.0, 0.0, 1.0])


def test_best_response_separable_minimum():
    prm = apps.RpsParams(0.25)
    system = apps.make_rps_system(np.ones(3) / 3, 5, prm)
    cost = lambda x, u: np.asarray(u)[..., 0] ** 2
    u = apps.best_response_control(np.ones(3) / 3, system, cost, grid_resolution=10)
    assert u[0] == 0.0


def test_best_response_beats_random_controls(rng):
    prm = apps.RpsParams(0.25)
    system = apps.make_rps_system(np.ones(3) / 3, 5, prm)
    x = np.array([0.7, 0.2, 0.1])  # rock dominant
    cost = apps.rock_share_cost
    u_br = apps.best_response_control(x, system, cost, grid_resolution=50)
    val_br = float(cost(apps.replicator_transition(x, u_br, prm), u_br))
    for _ in range(1000):
        u = rng.dirichlet(np.ones(3))
        val = float(cost(apps.replicator_transition(x, u, prm), u))
        assert val_br <= val + 1e-12


def test_constant_controller_effective_transmission():
    prm = apps.SirParams(0.5, 0.03, 0.005)
    system = apps.make_sir_system(prm, [0.9, 0.1, 0.0], 3, c2=1.0, c3=10.0)
    full = sc.rollout(system, sc.ConstantController([1.0, 0.0]), 3)
    # full prevention: susceptibles never convert
    assert full.xs[1, 0] >= full.xs[0, 0]
    none = sc.rollout(system, sc.ConstantController([0.0, 1.0]), 3)
    assert none.xs[1, 0] < none.xs[0, 0]


def test_constant_controller_infeasible():
    prm = apps.SirParams(0.5, 0.03, 0.005)
    system = apps.make_sir_system(prm, [0.9, 0.1, 0.0], 3, c2=1.0, c3=10.0)
    with pytest.raises(sc.InfeasibleControl):
        sc.rollout(system, sc.ConstantController([0.2, 0.2]), 3)


def test_random_cost_schedule_deterministic():
    fns1, coins1 = apps.random_rps_cost_schedule(50, rng_for(4, "coins"))
    fns2, coins2 = apps.random_rps_cost_schedule(50, rng_for(4, "coins"))
    assert np.array_equal(coins1, coins2)
    assert coins1.min() >= 0 and coins1.max() <= 1


# ---------------------------------------------------------------------------
# lower bounds


def test_lower_bound_pair_validation():
    with pytest.raises(ValueError):
        apps.make_lower_bound_pair("simplex", 8.0, 101)
    with pytest.raises(ValueError):
        apps.make_lower_bound_pair("simplex", 1.0, 100)
    with pytest.raises(ValueError):
        apps.make_lower_bound_pair("nope", 8.0, 100)


@pytest.mark.parametrize("T", [100, 1000])
@pytest.mark.parametrize("beta", [8.0, 32.0])
def test_lower_bound_comparator_costs(T, beta):
    pair = apps.make_lower_bound_pair("simplex", beta, T)
    costs = apps.comparator_costs(pair)
    assert costs[1, 1] == 0.0  # lazy policy on the shocked branch: exactly zero
    assert costs[0, 0] <= (T / beta) * math.exp(-beta / 2)
    scalar = apps.make_lower_bound_pair("standard-lds", beta, T)
    s_costs = apps.comparator_costs(scalar)
    assert s_costs[1, 1] == 0.0
    assert s_costs[0, 0] <= (2 * T / beta) * math.exp(-beta / 2)


def test_lower_bound_harness_smoke():
    # T = 2: the harness runs and returns finite numbers
    def lazy_factory(system, T):
        return sc.ConstantController(np.zeros(2))

    res = apps.lower_bound_regret_harness(lazy_factory, "simplex", 2.0, [2], trials=3, seed=0)
    assert len(res["rows"]) == 1
    assert np.isfinite(res["rows"][0]["mean_regret"])


def test_lower_bound_omniscient_controller():
    # a controller told the branch in advance matches the comparator bound
    beta, T = 8.0, 200
    pair = apps.make_lower_bound_pair("simplex", beta, T)
    costs = apps.comparator_costs(pair)
    for b in (0, 1):
        K = pair.comparators[b]
        traj = sc.rollout_linear_policy(pair.systems[b], K, T)
        assert traj.total_cost <= (T / beta) * math.exp(-beta / 2) + 1e-12
        assert traj.total_cost - min(costs[0, b], costs[1, b]) <= (T / beta) * math.exp(-beta / 2)


def test_scalar_rollout_clip():
    sys_s = apps.ScalarLDS(2.0, 0.0, 1.0, np.zeros(40), [lambda x, u: 0.0] * 40)
    xs, _, _ = apps.scalar_rollout(sys_s, lambda t, x: 0.0, 40)
    assert xs.max() <= 1e6
