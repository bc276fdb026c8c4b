import math

import numpy as np
import pytest

from fracsphere.diffusion import (
    L_CAP,
    DensityParams,
    PathEnsemble,
    TrdPath,
    chapman_kolmogorov_defect,
    decay_table,
    density_coefficients,
    density_lmax,
    expected_harmonic,
    expected_harmonic_sq,
    marginal_cos_cdf,
    sample_marginal_cos,
    simulate_sphere_bm,
    simulate_trd,
    solution_angular_spectrum,
    transition_density,
    walk_decay,
)
from fracsphere.errors import ArgumentError, DomainError
from fracsphere.rng import substream
from fracsphere.specfun import ylm_table
from fracsphere.sphgeom import NORTH, SpherePoint, build_quadrature, vector_to_angles
from fracsphere.subordinate import StableParams


def test_density_params_validation():
    with pytest.raises(DomainError):
        DensityParams(0.0)
    with pytest.raises(DomainError):
        DensityParams(0.5, r_coeffs=(0.9, 0.1))
    with pytest.raises(DomainError):
        DensityParams(0.5, l_max=-1)


@pytest.mark.parametrize("nu", [0.4, 0.7, 1.0])
def test_density_normalisation(nu):
    g = build_quadrature(64, 129)
    u = transition_density(g.vectors, 0.3, SpherePoint(1.0, 0.5), DensityParams(nu, l_max=60))
    assert abs(g.integrate(u) - 1.0) < 1e-8


def test_density_nonnegative_from_pole():
    g = build_quadrature(32, 65)
    for nu in (0.6, 0.8, 1.0):
        # adaptive truncation; a fixed l_max=40 rings negative at nu=0.8
        u = transition_density(g.vectors, 0.1, NORTH, DensityParams(nu))
        assert u.min() >= 0.0


def test_truncation_ringing_shrinks_with_lmax():
    # off-pole start: Gibbs-type negatives from truncation, decreasing in l_max
    g = build_quadrature(96, 193)
    x0 = SpherePoint(1.0, 0.5)
    neg = [min(0.0, transition_density(g.vectors, 0.1, x0, DensityParams(0.8, l_max=L)).min())
           for L in (40, 80, 160)]
    assert neg[0] < neg[1] <= neg[2] <= 0.0 or abs(neg[2]) < abs(neg[0])


def test_nu_one_is_heat_kernel_series():
    c, _ = density_coefficients(DensityParams(1.0, l_max=30), 0.4)
    ls = np.arange(31)
    np.testing.assert_allclose(c, (2 * ls + 1) / (4 * np.pi) * np.exp(-ls * (ls + 1) * 0.4), rtol=1e-14)


def test_long_time_limit_is_algebraic():
    # the deviation from 1/4pi decays like t^-nu, dominated by l = 1
    tau, nu = 50.0, 0.7
    p = DensityParams(nu)
    dev = abs(transition_density(NORTH, tau, NORTH, p) - 1 / (4 * np.pi))
    l1 = 3 / (4 * np.pi) / (2 * tau ** nu * math.gamma(1 - nu))
    assert 0.5 * l1 < dev < 20 * l1


def test_adaptive_lmax_and_guards():
    L, tail = density_lmax(1.0, 1.0)
    assert L < 20 and tail < 1e-8
    # nu < 1 with a delta datum: terms decay like 1/l, the cap is hit and the tail reported
    L, tail = density_lmax(0.7, 1.0)
    assert L == L_CAP and 0 < tail < 1e-3
    L, tail = density_lmax(0.3, 1e-3)
    assert L == L_CAP and tail > 0
    with pytest.raises(DomainError):
        density_coefficients(DensityParams(0.5), 1e-4)
    with pytest.raises(DomainError):
        density_coefficients(DensityParams(0.5), 0.0)
    c, tail = density_coefficients(DensityParams(0.5, r_coeffs=(1.0, 0.3, 0.1)), 1e-4)
    assert len(c) == 3 and tail == 0.0


def test_chapman_kolmogorov():
    x2 = SpherePoint(1.0, 0.5)
    d = chapman_kolmogorov_defect(1.0, 0.0, 0.3, 0.7, NORTH, x2, DensityParams(1.0, l_max=60))
    assert abs(d) < 1e-10
    d = chapman_kolmogorov_defect(0.6, 0.0, 0.3, 0.7, NORTH, NORTH, DensityParams(0.6, l_max=200))
    assert abs(d) > 1e-3
    r = tuple([1.0] + [0.5] * 60)
    d = chapman_kolmogorov_defect(1.0, 0.0, 0.3, 0.7, NORTH, NORTH, DensityParams(1.0, l_max=60, r_coeffs=r))
    assert abs(d) > 1e-6
    with pytest.raises(ArgumentError):
        chapman_kolmogorov_defect(1.0, 0.0, 0.7, 0.3, NORTH, NORTH, DensityParams(1.0, l_max=5))


def test_marginal_cdf():
    c = np.linspace(-1, 1, 401)
    F = marginal_cos_cdf(0.6, 0.5, c, 200)
    assert F[0] == pytest.approx(0.0, abs=1e-12) and F[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(F) >= -1e-6)
    s = sample_marginal_cos(0.6, 0.5, 20000, substream(1))
    # E <X, x0> = E_nu(-2 tau^nu)
    assert abs(s.mean() - decay_table(0.6, 1, 0.5)[1]) < 4 * s.std() / math.sqrt(s.size)


def test_walk_decay():
    for l in (1, 3, 10):
        q = math.exp(-l * (l + 1) * 1e-3)
        assert abs(walk_decay(l, 1e-3) - q) < 5e-3 * (1 - q) + 1e-6
    assert walk_decay(0, 0.1) == pytest.approx(1.0)


def test_simulate_trd_single_and_ensemble():
    p = StableParams(0.6, seed=3, grid_dt=1e-3)
    path = simulate_trd(NORTH, 0.6, [0.0, 0.5, 1.0], params=p)
    assert isinstance(path, TrdPath) and len(path.points) == 3
    assert path.at(0.0) == NORTH
    again = simulate_trd(NORTH, 0.6, [0.0, 0.5, 1.0], params=p)
    assert again.points == path.points
    with pytest.raises(ArgumentError):
        path.at(0.25)
    ens = simulate_trd(NORTH, 0.6, [0.5, 1.0], rng=substream(4), n_paths=50)
    assert isinstance(ens, PathEnsemble) and ens.vectors.shape == (50, 2, 3)
    assert np.all(np.diff(ens.op_times, axis=1) >= 0)
    with pytest.raises(DomainError):
        simulate_trd(NORTH, 1.2, [1.0])


def test_trd_constant_on_flat_intervals():
    ens = simulate_trd(NORTH, 0.5, np.linspace(0.01, 1.0, 100), rng=substream(5), n_paths=20)
    flat = np.diff(ens.op_times, axis=1) == 0
    moved = np.linalg.norm(np.diff(ens.vectors, axis=1), axis=2)
    assert flat.mean() > 0.1 and np.all(moved[flat] == 0.0)


def test_sphere_bm_mean_decay():
    ens = simulate_sphere_bm(NORTH, [0.25, 0.5], 1e-3, substream(6), n_paths=20000)
    c = ens.cos_theta
    for j, t in enumerate((0.25, 0.5)):
        se = c[:, j].std() / math.sqrt(c.shape[0])
        assert abs(c[:, j].mean() - math.exp(-2 * t)) < 3 * se + 1e-3
    pts = simulate_sphere_bm(NORTH, [0.1], 1e-3, substream(6))
    assert isinstance(pts[0], SpherePoint)


def test_expected_harmonics_against_mc():
    x, tau = SpherePoint(0.9, 0.4), 0.5
    ens = simulate_trd(x, 0.6, [tau], rng=substream(7), n_paths=20000)
    th, ph = vector_to_angles(ens.vectors[:, 0])
    Y = ylm_table(2, th, ph)
    for l, m in ((1, 0), (1, 1), (2, -1), (2, 2)):
        y = Y[:, l * l + l + m]
        ex = expected_harmonic(l, m, x, tau, 0.6)
        assert abs(y.real.mean() - ex.real) < 3.5 * y.real.std() / math.sqrt(y.size) + 2e-3
        ex2 = expected_harmonic_sq(l, abs(m), x, tau, 0.6)
        v = np.abs(y) ** 2
        assert abs(v.mean() - ex2) < 3.5 * v.std() / math.sqrt(v.size) + 2e-3


def test_harmonic_square_limits():
    x = SpherePoint(0.9, 0.4)
    assert expected_harmonic_sq(0, 0, x, 0.3, 0.7) == pytest.approx(1 / (4 * np.pi))
    # tau -> 0: |Y_lm(x)|^2
    from fracsphere.specfun import spherical_harmonic
    assert expected_harmonic_sq(2, 1, x, 1e-12, 1.0) == pytest.approx(abs(spherical_harmonic((2, 1), 0.9, 0.4)) ** 2,
                                                                     rel=1e-6)


def test_angular_spectrum():
    p = DensityParams(0.6)
    nu, l, t = 0.6, 200, 2.0
    A = solution_angular_spectrum(l, t, p, 1.0)
    asym = 1.0 / (l * (l + 1.0) * t ** nu * math.gamma(1 - nu)) ** 2
    assert abs(A / asym - 1) < 0.05
    assert solution_angular_spectrum(0, t, p, 2.5) == 2.5
