import numpy as np
import pytest

import simplexctl as sc


def random_stochastic(d, rng, floor=0.02):
    """Strictly positive column-stochastic matrix (ergodic chain)."""
    M = rng.random((d, d)) + floor
    return M / M.sum(axis=0)


def random_scaled_stochastic(d_rows, d_cols, scale, rng):
    cols = [scale * rng.dirichlet(np.ones(d_rows)) for _ in range(d_cols)]
    return np.stack(cols, axis=1)


def random_dacparams(d, d_state, H, scale, rng):
    p = scale * rng.dirichlet(np.ones(d))
    M = np.stack([random_scaled_stochastic(d, d_state, scale, rng) for _ in range(H)])
    return sc.DacParams(p, M)


def random_histories(d, T, rng, x1=None):
    """Absolute-time (gammas, ws) lists with the time-0 conventions applied."""
    if x1 is None:
        x1 = rng.dirichlet(np.ones(d))
    gammas = [1.0] + [float(g) for g in rng.random(T)]
    ws = [np.asarray(x1, dtype=float)] + [rng.dirichlet(np.ones(d)) for _ in range(T)]
    return gammas, ws


def zero_cost_system(A, B, x1, T, control_set=None):
    d = len(x1)
    return sc.SimplexLDS(
        A,
        B,
        control_set or sc.ControlSet(0.0, 1.0),
        x1,
        np.zeros(T),
        np.zeros((T, d)),
        [lambda x, u: 0.0] * T,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
