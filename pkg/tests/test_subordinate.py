import math

import numpy as np
import pytest

from fracsphere.errors import ArgumentError, DomainError
from fracsphere.rng import derive_seed, open_uniform, substream
from fracsphere.specfun import mittag_leffler
from fracsphere.subordinate import (
    InversePath,
    StableParams,
    inverse_mean,
    kanter_variate,
    run_operational,
    sample_inverse_marginal,
    sample_inverse_path,
    sample_inverse_paths,
    sample_stable_increment,
)


def _within(x, target, k=3.0, bias=0.0):
    m = x.mean()
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(m - target) <= k * se + bias


def test_params_validation():
    with pytest.raises(DomainError):
        StableParams(1.0)
    with pytest.raises(DomainError):
        StableParams(0.5, grid_dt=0.0)
    with pytest.raises(ArgumentError):
        InversePath(np.array([0.0, 1.0]), np.array([0.5, 0.2]))


def test_open_uniform_and_streams():
    u = open_uniform(substream(1, "u"), 100000)
    assert u.min() > 0.0 and u.max() < 1.0
    a = substream(7, "a", 3).random(5)
    np.testing.assert_array_equal(a, substream(7, "a", 3).random(5))
    assert not np.array_equal(a, substream(7, "a", 4).random(5))
    assert derive_seed(42, "x") == derive_seed(42, "x") != derive_seed(42, "y")


@pytest.mark.parametrize("nu,s", [(0.3, 0.5), (0.5, 1.0), (0.8, 2.0)])
def test_stable_laplace(nu, s):
    x = sample_stable_increment(nu, 1.0, substream(2, nu, s), size=200000)
    assert _within(np.exp(-s * x), math.exp(-s ** nu))


def test_stable_scaling():
    # increment over dt has Laplace transform exp(-dt s^nu)
    nu, dt, s = 0.6, 0.25, 1.5
    x = sample_stable_increment(nu, dt, substream(3), size=200000)
    assert _within(np.exp(-s * x), math.exp(-dt * s ** nu))
    assert isinstance(sample_stable_increment(nu, dt, substream(3)), float)
    with pytest.raises(DomainError):
        sample_stable_increment(1.0, 1.0, substream(3))


def test_kanter_half_is_levy():
    # nu = 1/2: X = 1 / (4 Z^2) with Z standard normal, so P(X <= x) = erfc(1/(2 sqrt x))
    x = kanter_variate(0.5, open_uniform(substream(4), 100000), substream(5).standard_exponential(100000))
    for q in (0.1, 1.0, 10.0):
        p = np.mean(x <= q)
        assert abs(p - math.erfc(1 / (2 * math.sqrt(q)))) < 4 * math.sqrt(0.25 / x.size)


@pytest.mark.parametrize("nu,lam,t", [(0.4, 1.0, 0.5), (0.6, 2.0, 1.0), (0.8, 0.5, 2.0)])
def test_inverse_marginal_laplace(nu, lam, t):
    L = sample_inverse_marginal(nu, t, substream(6, nu, lam, t), size=200000)
    assert _within(np.exp(-lam * L), mittag_leffler(nu, -lam * t ** nu))


def test_inverse_grid_paths_against_marginal_law():
    # independent route: grid inversion of the simulated clock
    nu, dt = 0.6, 1e-3
    L = sample_inverse_paths(StableParams(nu, 0, dt), [0.5, 1.0], 20000, rng=substream(7))
    assert _within(L[:, 1], inverse_mean(nu, 1.0), bias=dt)
    e = np.exp(-2.0 * L[:, 0])
    lo = mittag_leffler(nu, -2.0 * 0.5 ** nu) * math.exp(-2.0 * dt)
    assert _within(e, mittag_leffler(nu, -2.0 * 0.5 ** nu), bias=mittag_leffler(nu, -2.0 * 0.5 ** nu) - lo)


def test_inverse_paths_monotone_and_flat():
    t = np.linspace(0.01, 1.0, 100)
    L = sample_inverse_paths(StableParams(0.5, 0, 1e-3), t, 500, rng=substream(8))
    assert np.all(np.diff(L, axis=1) >= 0) and np.all(L >= 0)
    assert np.mean(np.diff(L, axis=1) == 0) > 0.1


def test_single_path_reproducible():
    p = StableParams(0.7, seed=11)
    a = sample_inverse_path(p, [0.2, 0.4, 0.8])
    b = sample_inverse_path(p, [0.2, 0.4, 0.8])
    np.testing.assert_array_equal(a.l_values, b.l_values)
    with pytest.raises(ArgumentError):
        sample_inverse_path(p, [0.0, 0.5])
    with pytest.raises(ArgumentError):
        sample_inverse_path(p, [0.5, 0.4])


def test_nonstationary_increments():
    L, _ = run_operational(0.5, [1.0, 2.0], 10000, 1e-3, substream(9), walk=False)
    a, b = L[:, 1] - L[:, 0], L[:, 0]
    psi = (a - a.mean()) ** 2 - (b - b.mean()) ** 2
    assert abs(psi.mean()) / (psi.std(ddof=1) / math.sqrt(psi.size)) > 5


def test_near_one_is_near_identity():
    t = np.array([1.0, 2.0, 4.0])
    L, _ = run_operational(0.99, t, 2000, 1e-3, substream(10), walk=False)
    assert np.all(np.abs(L.mean(axis=0) / t - 1) < 0.15)


def test_nu_one_clock_is_deterministic():
    L, pos = run_operational(1.0, [0.0, 0.3, 1.0], 50, 1e-3, substream(11))
    np.testing.assert_array_equal(L, np.tile([0.0, 0.3, 1.0], (50, 1)))
    np.testing.assert_allclose(np.linalg.norm(pos, axis=2), 1.0, atol=1e-14)
    np.testing.assert_array_equal(pos[:, 0], np.tile([0, 0, 1.0], (50, 1)))


def test_operational_grid_validation():
    with pytest.raises(ArgumentError):
        run_operational(0.5, [0.5, 0.5], 2, 1e-3, substream(0))
    with pytest.raises(ArgumentError):
        run_operational(0.5, [0.5], 2, 0.0, substream(0))
