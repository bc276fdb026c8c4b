import json
import math

import numpy as np
import pytest

from fracsphere.errors import ArgumentError
from fracsphere.estimate import (
    CovarianceExperiment,
    McEstimate,
    _Ctx,
    dependence_range_diagnostic,
    empirical_covariance,
    estimate_power_spectrum,
    run_validation_suite,
    walk_bias,
)
from fracsphere.diffusion import walk_decay
from fracsphere.fields import PowerSpectrum, real_basis, sample_coefficients, evaluate_field
from fracsphere.rng import substream
from fracsphere.specfun import ylm_table
from fracsphere.sphgeom import SpherePoint, build_quadrature

X = SpherePoint(0.7, 0.2)


def test_mc_estimate():
    e = McEstimate.from_samples([1.0, 3.0])
    assert (e.value, e.n) == (2.0, 2) and e.stderr == pytest.approx(1.0)
    assert McEstimate.from_samples([5.0]).stderr == 0.0
    with pytest.raises(ArgumentError):
        McEstimate.from_samples([])


def test_power_spectrum_single_mode():
    g = build_quadrature(8, 17)
    Y = ylm_table(4, g.theta, g.phi)
    T = 2.0 * Y[:, 2 * 2 + 2 + 1].real  # Y_21 + Y_2,-1 conj pair -> |a|^2 = 1 each
    A = estimate_power_spectrum(T, g, 4)
    np.testing.assert_allclose(A, [0, 0, 2.0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(estimate_power_spectrum(np.zeros(g.size), g, 4), 0.0)


def test_power_spectrum_insufficient_grid():
    g = build_quadrature(4, 9)
    with pytest.raises(ArgumentError):
        estimate_power_spectrum(np.zeros(g.size), g, 6)


def test_power_spectrum_parseval():
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=8)
    a = sample_coefficients(S, substream(7))
    g = build_quadrature(10, 21)
    T = evaluate_field(a, g.theta, g.phi)
    A = estimate_power_spectrum(T, g, 8)
    assert A.sum() == pytest.approx(g.integrate(T ** 2), rel=1e-10)


def test_power_spectrum_mean():
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=6)
    g = build_quadrature(8, 17)
    B = real_basis(S, g.theta, g.phi)
    G = substream(8).standard_normal((1000, B.shape[1]))
    A = estimate_power_spectrum(G @ B.T, g, 6)
    ls = np.arange(7)
    mean, se = A.mean(0), A.std(0, ddof=1) / math.sqrt(1000)
    assert np.all(np.abs(mean - (2 * ls + 1) * S.c) <= 4 * se)


def test_experiment_validation():
    with pytest.raises(ArgumentError):
        CovarianceExperiment("nonsense")
    with pytest.raises(ArgumentError):
        empirical_covariance({"formula": "bogus"}, 10, 0)
    with pytest.raises(ArgumentError):
        CovarianceExperiment("markov-lag", nu=0.6, t1=0.1, t2=0.2)
    with pytest.raises(ArgumentError):
        CovarianceExperiment("same-point", t0=0.5, t1=0.2, t2=0.2)
    with pytest.raises(ArgumentError):
        CovarianceExperiment("two-point", x=X, y=X, t1=0.1, t2=0.1)
    with pytest.raises(ArgumentError):
        empirical_covariance(CovarianceExperiment("static", x=X, y=X), 1, 0)


def test_static_antipodal():
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=20)
    y = SpherePoint(math.pi - X.theta, X.phi + math.pi)
    e = CovarianceExperiment("static", x=X, y=y, spectrum=S)
    v, _ = e.analytic()
    w = S.weights()
    assert v == pytest.approx(float(np.dot(w, (-1.0) ** np.arange(21))), abs=1e-13)
    est = empirical_covariance(e, 20000, 3)
    assert abs(est.value - v) <= 3 * est.stderr + 1e-13


def test_worker_invariance():
    e = CovarianceExperiment("same-point", 0.6, 0.0, 0.3, 0.3, x=X, estimator="conditional")
    a = empirical_covariance(e, 12000, 5, workers=1)
    b = empirical_covariance(e, 12000, 5, workers=3)
    assert a == b


def test_walk_bias_bounds_walk_error():
    dt = 1e-2
    b = walk_bias(6, dt)
    for l in range(1, 7):
        phi, q = walk_decay(l, dt), math.exp(-l * (l + 1) * dt)
        worst = max(abs(phi ** k - q ** k) for k in range(1, 2000))
        assert worst <= b[l] * (1 + 1e-9)


def test_dependence_examples():
    r = dependence_range_diagnostic(0.6, PowerSpectrum.parametric(3.0, 1.0, lmax=20), np.geomspace(1, 1e3, 9))
    assert r.verdict == "long-range" and r.exponent == pytest.approx(-0.6, abs=0.05)
    r = dependence_range_diagnostic(1.0, PowerSpectrum.parametric(3.0, 1.0, lmax=20), np.geomspace(1, 1e3, 9))
    assert r.verdict == "short-range"
    r = dependence_range_diagnostic(0.6, np.array([1.0, 0, 0]), np.geomspace(1, 1e3, 5))
    assert r.verdict == "degenerate-constant" and r.exponent == 0.0
    with pytest.raises(ArgumentError):
        dependence_range_diagnostic(0.6, np.array([1.0, 1.0]), [1.0, 2.0, 10.0])


def test_unknown_suite():
    with pytest.raises(ArgumentError):
        run_validation_suite("nope")


def test_suite_is_deterministic():
    a = json.dumps(run_validation_suite("dependence-range", 42).to_dict())
    b = json.dumps(run_validation_suite("dependence-range", 42).to_dict())
    assert a == b and json.loads(a)["runtime_s"] is None
    assert run_validation_suite("specfun", 42).passed


def test_budget_scaling():
    assert _Ctx("x", 0, 0.1).n(10000) == 1000
    assert _Ctx("x", 0, 0.001).n(10000) == 200
    full = run_validation_suite("subordinator-laws", 42)
    small = run_validation_suite("subordinator-laws", 42, budget=2.0)
    assert [c.name for c in full.checks] == [c.name for c in small.checks]
    assert sum(c.tolerance for c in small.checks) > sum(c.tolerance for c in full.checks)
