import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsphere.errors import ArgumentError, ConsistencyError, DomainError
from fracsphere.fields import (
    CovarianceQuery,
    HarmonicCoefficients,
    PowerSpectrum,
    cov_fractional_lag_integral,
    cov_markov_lag,
    cov_same_point,
    cov_two_points,
    evaluate_field,
    evaluate_time_changed_field,
    field_covariance_static,
    fractional_lag_bracket,
    frequency_component_cov,
    real_basis,
    sample_coefficients,
    sobolev_norm,
    trd_equilibrium_cov,
)
from fracsphere.diffusion import simulate_trd
from fracsphere.rng import substream
from fracsphere.sphgeom import NORTH, SpherePoint, build_quadrature

X, Y = SpherePoint(0.7, 0.2), SpherePoint(2.0, 1.0)


def test_spectrum_validation_and_tail():
    with pytest.raises(DomainError):
        PowerSpectrum(np.array([1.0, -0.1]))
    with pytest.raises(DomainError):
        PowerSpectrum.parametric(2.0)
    s = PowerSpectrum.parametric(4.0, 2.0)
    assert s.tail_bound() <= 1e-6 * s.variance()
    exact_tail = 2.0 / (4 * np.pi) * sum((2 * l + 1) * (l + 1.0) ** -4 for l in range(s.lmax + 1, 200000))
    assert exact_tail <= s.tail_bound()
    assert PowerSpectrum(np.ones(3)).tail_bound() == 0.0
    assert s.truncated(5).lmax == 5


def test_coefficient_symmetry_and_layout():
    a = sample_coefficients(PowerSpectrum.parametric(3.0, 1.0, lmax=12), substream(1))
    assert isinstance(a, HarmonicCoefficients) and a.lmax == 12
    assert a.symmetry_defect() == 0.0
    with pytest.raises(ArgumentError):
        HarmonicCoefficients(np.zeros(5))


def test_coefficient_variance():
    S = PowerSpectrum(np.array([1.0, 0.5, 0.25]))
    a = sample_coefficients(S, substream(2), size=40000)
    for l in range(3):
        for m in range(-l, l + 1):
            v = np.mean(np.abs(a[:, l * l + l + m]) ** 2)
            assert abs(v - S.c[l]) < 0.05 * S.c[l]


def test_field_is_real_and_matches_basis():
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=10)
    r = substream(3)
    G = r.standard_normal((1, 121))
    from fracsphere.fields import coefficients_from_normals
    a = HarmonicCoefficients(coefficients_from_normals(S, G)[0])
    g = build_quadrature(6, 11)
    T = evaluate_field(a, g.theta, g.phi)
    np.testing.assert_allclose(T, real_basis(S, g.theta, g.phi) @ G[0], atol=1e-12)
    assert evaluate_field(a, X) == pytest.approx(float((real_basis(S, [X.theta], [X.phi]) @ G[0])[0]))


def test_field_rejects_asymmetric_coefficients():
    a = HarmonicCoefficients.zeros(2)
    a.a[2 * 2 + 2 + 1] = 1.0
    with pytest.raises(ConsistencyError):
        evaluate_field(a, X)


def test_static_covariance():
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=20)
    assert field_covariance_static(S, X, X) == pytest.approx(S.variance())
    B = real_basis(S, [X.theta, Y.theta], [X.phi, Y.phi])
    assert field_covariance_static(S, X, Y) == pytest.approx(B[0] @ B[1], abs=1e-14)


def test_covariance_relations(spec20):
    q = CovarianceQuery(1.0, 0.0, 0.4, 0.4, X, Y, spec20)
    assert cov_same_point(q) == pytest.approx(cov_markov_lag(spec20, 0.1, 0.5))
    assert cov_fractional_lag_integral(spec20, 1.0, 0.3, 0.7) == pytest.approx(cov_markov_lag(spec20, 0.3, 0.7))
    for nu in (0.4, 0.8):
        assert cov_fractional_lag_integral(spec20, nu, 0.5, 0.5) == pytest.approx(spec20.variance(), abs=1e-9)
    with pytest.raises(ArgumentError):
        cov_two_points(CovarianceQuery(0.6, 0.0, 0.3, 0.5, X, X, spec20))
    with pytest.raises(ArgumentError):
        CovarianceQuery(0.6, 0.0, 0.5, 0.3, X, Y, spec20)
    with pytest.raises(ArgumentError):
        cov_markov_lag(spec20, 1.0, 0.5)


def test_two_points_at_start_is_static(spec20):
    q = CovarianceQuery(0.6, 0.2, 0.2, 0.2, X, Y, spec20)
    assert cov_two_points(q) == pytest.approx(field_covariance_static(spec20, X, Y), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 0.95), st.floats(0.5, 200.0), st.floats(0.05, 2.0))
def test_bracket_is_one_at_equal_times(nu, mu, T):
    assert abs(fractional_lag_bracket(nu, mu, T, T) - 1.0) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 0.95), st.floats(0.5, 50.0), st.floats(0.1, 1.0), st.floats(0.0, 2.0))
def test_bracket_is_a_decay_factor(nu, mu, T1, d):
    b = fractional_lag_bracket(nu, mu, T1, T1 + d)
    assert -1e-10 <= b <= 1.0 + 1e-10


def test_bracket_near_one_and_asymptotic():
    assert fractional_lag_bracket(0.999, 6.0, 0.3, 0.8) == pytest.approx(math.exp(-3.0), rel=2e-2)
    for nu in (0.3, 0.5, 0.6, 0.8):
        for mu in (2.0, 6.0):
            v = fractional_lag_bracket(nu, mu, 1.0, 1e3) * 1e3 ** nu * math.gamma(1 - nu)
            assert abs(v / (1 / mu + 1 / math.gamma(1 + nu)) - 1) < 0.05


def test_frequency_components(spec20):
    tot = sum(frequency_component_cov(l, 0.6, 0.0, 0.3, 0.6, X, Y, spec20) for l in range(21))
    assert tot == pytest.approx(cov_two_points(CovarianceQuery(0.6, 0.0, 0.3, 0.6, X, Y, spec20)), abs=1e-12)
    assert frequency_component_cov(30, 0.6, 0.0, 0.3, 0.6, X, Y, spec20) == 0.0


def test_equilibrium_covariance():
    assert trd_equilibrium_cov(1.0, 0.0) == pytest.approx(1 / 3)
    tot = math.fsum(trd_equilibrium_cov(1.0, h) for h in range(1, 60))
    assert abs(tot - (1 / 3) / (math.e ** 2 - 1)) < 1e-9
    with pytest.raises(DomainError):
        trd_equilibrium_cov(0.5, -1.0)


def test_time_changed_field_on_path(spec20):
    a = sample_coefficients(spec20, substream(4))
    path = simulate_trd(NORTH, 0.6, [0.0, 0.5], rng=substream(5))
    assert evaluate_time_changed_field(a, path, 0.0) == pytest.approx(evaluate_field(a, NORTH))


def test_sobolev():
    l = np.arange(10001)
    r = sobolev_norm((2 * l + 1.0) ** -4, 1.0)
    assert r.converged and abs(r.value + r.tail - math.pi ** 2 / 8) < 1e-6
    r = sobolev_norm((2 * l + 1.0) ** -2, 1.0)
    assert not r.converged
    assert sobolev_norm(np.zeros(5), 2.0).value == 0.0
    with pytest.raises(DomainError):
        sobolev_norm(np.ones(3), -1.0)


def test_parametric_auto_truncation():
    assert PowerSpectrum.parametric(5.0).lmax == 83
    s = PowerSpectrum.parametric(4.0)
    assert s.lmax == 869 and s.tail_bound() <= 1e-6 * s.variance()
