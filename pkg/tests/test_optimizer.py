import math

import numpy as np
import pytest

import simplexctl as sc
from conftest import random_dacparams


def uniform_params(d, H, a, d_state=None):
    d_state = d_state or d
    return sc.DacParams(np.full(d, a / d), np.full((H, d, d_state), a / d))


def test_regularizer_examples():
    # three blocks (p plus two matrix columns), each with entropy ln 2
    assert sc.regularizer(uniform_params(2, 1, 1.0)) == pytest.approx(-3 * math.log(2), abs=1e-12)
    vertex = sc.DacParams(np.array([1.0, 0.0]), np.array([[[1.0, 1.0], [0.0, 0.0]]]))
    assert sc.regularizer(vertex) == 0.0
    with pytest.raises(ValueError):
        sc.DacDomain(d=2, H=0, a0=0.0, a_ub=1.0)


def test_max_entropy_point_examples():
    forced = sc.max_entropy_point(sc.DacDomain(2, 1, 1.0, 1.0))
    assert np.allclose(forced.p, [0.5, 0.5])
    assert np.allclose(forced.M, 0.5)
    free = sc.max_entropy_point(sc.DacDomain(2, 1, 0.0, 1.0))
    assert free.scale == pytest.approx(2 / 3, abs=1e-12)
    assert np.allclose(free.p, [1 / 3, 1 / 3], atol=1e-12)
    clamped = sc.max_entropy_point(sc.DacDomain(3, 1, 0.9, 1.0))
    assert clamped.scale == pytest.approx(0.9, abs=1e-12)


def test_max_entropy_scale_oracle():
    # 1-d oracle: grid-maximize the uniform-block entropy a*ln(d/a) + (1-a)*ln(1/(1-a))
    for d in (2, 3, 5):
        grid = np.linspace(1e-6, 1 - 1e-6, 200001)
        h = grid * np.log(d / grid) + (1 - grid) * np.log(1 / (1 - grid))
        a_star = grid[np.argmax(h)]
        assert abs(a_star - d / (d + 1)) < 1e-4
        point = sc.max_entropy_point(sc.DacDomain(d, 2, 0.0, 1.0))
        assert point.scale == pytest.approx(d / (d + 1), abs=1e-12)


def test_ftrl_argmin_examples():
    dom_free = sc.DacDomain(2, 1, 0.0, 1.0)
    acc = sc.GradAccumulator.zeros(dom_free)
    out = sc.ftrl_argmin(acc, 1.0, dom_free)
    mep = sc.max_entropy_point(dom_free)
    assert np.allclose(out.p, mep.p, atol=1e-12) and np.allclose(out.M, mep.M, atol=1e-12)

    dom_fixed = sc.DacDomain(2, 1, 1.0, 1.0)
    acc = sc.GradAccumulator.zeros(dom_fixed)
    acc.add(np.array([math.log(2), 0.0]), np.zeros((1, 2, 2)))
    out = sc.ftrl_argmin(acc, 1.0, dom_fixed)
    assert np.allclose(out.p, [1 / 3, 2 / 3], atol=1e-12)
    assert np.allclose(out.M, 0.5, atol=1e-12)  # fixed scale: per-block softmax only


def test_ftrl_argmin_optimality(rng):
    # returned point beats 10^4 random feasible points
    for _ in range(5):
        d = int(rng.integers(2, 5))
        H = int(rng.integers(1, 4))
        a0 = float(rng.uniform(0.0, 0.6))
        a_ub = float(rng.uniform(a0 + 0.05, 1.0))
        dom = sc.DacDomain(d, H, a0, a_ub)
        acc = sc.GradAccumulator.zeros(dom)
        for _ in range(3):
            acc.add(rng.normal(size=d), rng.normal(size=(H, d, d)))
        eta = float(rng.uniform(0.05, 2.0))
        best = sc.ftrl_argmin(acc, eta, dom)
        best.check(dom)
        val = sc.ftrl_objective(best, acc, eta)
        for _ in range(10_000):
            a = float(rng.uniform(a0, a_ub))
            cand = random_dacparams(d, d, H, a, rng)
            assert val <= sc.ftrl_objective(cand, acc, eta) + 1e-8


def test_ftrl_argmin_matches_scale_line_search(rng):
    # oracle: golden-section search over the scale agrees with the closed form
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(20):
        d = int(rng.integers(2, 5))
        H = int(rng.integers(1, 3))
        dom = sc.DacDomain(d, H, 0.0, 1.0)
        acc = sc.GradAccumulator.zeros(dom)
        acc.add(rng.normal(size=d), rng.normal(size=(H, d, d)))
        eta = float(rng.uniform(0.1, 1.5))
        fixed = sc.ftrl_argmin(acc, eta, dom)

        def phi(a):
            dom_a = sc.DacDomain(d, H, a, a)
            return sc.ftrl_objective(sc.ftrl_argmin(acc, eta, dom_a), acc, eta)

        lo, hi = 0.0, 1.0
        c, dd = hi - gr * (hi - lo), lo + gr * (hi - lo)
        fc, fd = phi(c), phi(dd)
        for _ in range(60):
            if fc < fd:
                hi, dd, fd = dd, c, fc
                c = hi - gr * (hi - lo)
                fc = phi(c)
            else:
                lo, c, fc = c, dd, fd
                dd = lo + gr * (hi - lo)
                fd = phi(dd)
        a_gs = (lo + hi) / 2
        assert fixed.scale == pytest.approx(a_gs, abs=1e-6)


def test_lazy_md_linearity():
    dom = sc.DacDomain(2, 1, 0.2, 0.9)
    g_p = np.array([0.4, -0.1])
    g_M = np.full((1, 2, 2), 0.05)
    one = sc.LazyMirrorDescent(dom, 0.5)
    one.update(2 * g_p, 2 * g_M)
    two = sc.LazyMirrorDescent(dom, 0.5)
    two.update(g_p, g_M)
    two.update(g_p, g_M)
    assert np.allclose(one.params.p, two.params.p, atol=1e-12)
    assert np.allclose(one.params.M, two.params.M, atol=1e-12)


def test_lazy_md_first_update_zero_gradient():
    dom = sc.DacDomain(3, 2, 0.0, 1.0)
    md = sc.LazyMirrorDescent(dom, 0.7)
    md.update(np.zeros(3), np.zeros((2, 3, 3)))
    mep = sc.max_entropy_point(dom)
    assert np.allclose(md.params.p, mep.p, atol=1e-12)


def test_exp_weights_examples():
    dom = sc.DacDomain(2, 1, 1.0, 1.0)
    params = uniform_params(2, 1, 1.0)
    out = sc.exp_weights_update(params, np.zeros(2), np.zeros((1, 2, 2)), 0.3, dom)
    assert np.allclose(out.p, params.p) and np.allclose(out.M, params.M)
    out = sc.exp_weights_update(params, np.array([math.log(2), 0.0]), np.zeros((1, 2, 2)), 1.0, dom)
    assert np.allclose(out.p, [1 / 3, 2 / 3], atol=1e-12)
    # interior iterates stay strictly positive
    big = sc.exp_weights_update(params, np.array([50.0, -50.0]), np.zeros((1, 2, 2)), 1.0, dom)
    assert big.p.min() > 0.0
    assert big.p.sum() == pytest.approx(1.0, abs=1e-12)


def test_exp_weights_requires_fixed_scale():
    dom = sc.DacDomain(2, 1, 0.2, 0.9)
    with pytest.raises(sc.ScaleNotFixed):
        sc.exp_weights_update(uniform_params(2, 1, 0.9), np.zeros(2), np.zeros((1, 2, 2)), 0.5, dom)
    with pytest.raises(sc.ScaleNotFixed):
        sc.ExpWeights(dom, 0.5)


def test_returned_params_feasible(rng):
    for _ in range(30):
        d = int(rng.integers(2, 5))
        H = int(rng.integers(1, 4))
        a0 = float(rng.uniform(0.0, 0.9))
        a_ub = float(rng.uniform(a0, 1.0))
        dom = sc.DacDomain(d, H, a0, a_ub)
        acc = sc.GradAccumulator.zeros(dom)
        acc.add(10 * rng.normal(size=d), 10 * rng.normal(size=(H, d, d)))
        sc.ftrl_argmin(acc, 1.0, dom).check(dom, tol=1e-8)


def _dual_norm(g_p, g_M):
    vals = [np.abs(g_p).max()]
    for h in range(g_M.shape[0]):
        for j in range(g_M.shape[2]):
            vals.append(np.abs(g_M[h][:, j]).max())
    return math.sqrt(sum(v * v for v in vals))


def test_md_movement_and_regret_bounds(rng):
    # short version of the acceptance property: T = 200, 5 sequences
    T, L = 200, 1.0
    for _ in range(5):
        d = int(rng.integers(2, 5))
        H = int(rng.integers(1, 5))
        if rng.random() < 0.5:
            a0 = a_ub = float(rng.uniform(0.2, 1.0))
        else:
            a0 = float(rng.uniform(0.0, 0.5))
            a_ub = float(rng.uniform(a0 + 0.1, 1.0))
        dom = sc.DacDomain(d, H, a0, a_ub)
        eta = math.sqrt(2 * d * H * math.log(d)) / (L * math.sqrt(T))
        beta = math.sqrt(2 * d * H * math.log(d) / T)
        md = sc.LazyMirrorDescent(dom, eta)
        total = 0.0
        G_p = np.zeros(d)
        G_M = np.zeros((H, d, d))
        prev = md.params
        for _ in range(T):
            g_p = rng.uniform(-1, 1, size=d)
            g_M = rng.uniform(-1, 1, size=(H, d, d))
            scale = L * float(rng.uniform(0.3, 1.0)) / _dual_norm(g_p, g_M)
            g_p *= scale
            g_M *= scale
            z = md.params
            total += float(g_p @ z.p) + float((g_M * z.M).sum())
            G_p += g_p
            G_M += g_M
            md.update(g_p, g_M)
            move_p = np.abs(prev.p - md.params.p).sum()
            move_M = max(
                np.abs(prev.M[h] - md.params.M[h]).sum(axis=0).max() for h in range(H)
            )
            assert max(move_p, move_M) <= beta * (1 + 1e-6)
            prev = md.params
        # best fixed point of a linear loss sum: vertex blocks at a boundary scale
        row_mins = [G_p.min()] + [G_M[h][:, j].min() for h in range(H) for j in range(d)]
        best = min(a0 * sum(row_mins), a_ub * sum(row_mins))
        assert total - best <= L * math.sqrt(32 * d * H * math.log(d) * T)


def test_grad_accumulator_kahan(rng):
    dom = sc.DacDomain(2, 1, 1.0, 1.0)
    acc = sc.GradAccumulator.zeros(dom)
    inc = np.array([0.1, 1e-16])
    for _ in range(10_000):
        acc.add(inc, np.zeros((1, 2, 2)))
    assert acc.count == 10_000
    assert acc.g_p[0] == pytest.approx(1000.0, rel=1e-12)
    assert acc.g_p[1] == pytest.approx(1e-12, rel=1e-9)
