"""Monte Carlo estimators, the empirical angular power spectrum, dependence
range diagnostics and the experiment runner behind the validation suites.

MC tolerances are always 3*stderr plus an explicit discretisation bias bound:
  walk bias   |phi_l(dt)^k - exp(-mu_l k dt)| <= |log phi_l - log q_l| / (e |log max(phi_l, q_l)|)
              with q_l = exp(-mu_l dt) and phi_l = E P_l(cos r) for one walk step;
  grid bias   the grid inverse overshoots L_t by at most dt, so
              0 <= E exp(-mu L) - E exp(-mu L_grid) <= E_nu(-mu tau^nu) (1 - exp(-mu dt)).
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .diffusion import FOUR_PI, decay_table, walk_decay
from .errors import ArgumentError
from .fields import (
    CovarianceQuery,
    PowerSpectrum,
    cov_fractional_lag_integral,
    cov_markov_lag,
    cov_same_point,
    cov_two_points,
    field_covariance_static,
    fractional_lag_bracket,
    real_basis,
    trd_equilibrium_cov,
)
from .rng import derive_seed, substream
from .specfun import legendre_p_all, ylm_table
from .sphgeom import SpherePoint, angles_to_vector, inner_product, vector_to_angles
from .subordinate import run_operational

FORMULAS = ("static", "same-point", "two-point", "markov-lag", "frac-lag-integral", "equilibrium-trd")
CHUNK = 5000


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        if n == 0:
            raise ArgumentError("no samples")
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n >= 2 else 0.0
        return cls(float(np.mean(x)), se, n)


# power spectrum -----------------------------------------------------------

def estimate_power_spectrum(field_samples, grid, l_max):
    """A_l = sum_m |a_lm|^2 with a_lm from grid quadrature of T Y*_lm.

    field_samples has the grid nodes on its last axis (one or many fields).
    """
    if grid.degree < 2 * l_max:
        raise ArgumentError(f"grid exact to degree {grid.degree} < 2*l_max = {2 * l_max}")
    T = np.asarray(field_samples, dtype=float)
    one = T.ndim == 1
    T = np.atleast_2d(T)
    Y = ylm_table(l_max, grid.theta, grid.phi)
    a = (T * grid.weights) @ np.conj(Y)
    p = np.abs(a) ** 2
    out = np.zeros((T.shape[0], l_max + 1))
    for l in range(l_max + 1):
        out[:, l] = p[:, l * l:(l + 1) * (l + 1)].sum(axis=1)
    return out[0] if one else out


# bias bounds ------------------------------------------------------------

def walk_bias(lmax, dt):
    """Per-degree bound on |phi_l^k - exp(-mu_l k dt)| over all k."""
    out = np.zeros(lmax + 1)
    for l in range(1, lmax + 1):
        q = math.exp(-l * (l + 1.0) * dt)
        p = walk_decay(l, dt)
        if p <= 0.0 or q <= 0.0:
            out[l] = 2.0
            continue
        top = max(p, q)
        out[l] = 2.0 if top >= 1.0 else min(2.0, abs(math.log(p) - math.log(q)) / (math.e * -math.log(top)))
    return out


# experiments --------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceExperiment:
    """Declarative covariance experiment.

    formula: one of FORMULAS. Times are absolute with t0 <= t1 <= t2.
    estimator "field" samples the Gaussian field; "conditional" integrates
    it out given the paths (same mean, lower variance).
    """

    formula: str
    nu: float = 1.0
    t0: float = 0.0
    t1: float = 0.0
    t2: float = 0.0
    x: SpherePoint = SpherePoint(0.0, 0.0)
    y: SpherePoint = SpherePoint(math.pi / 2, 0.0)
    spectrum: PowerSpectrum = None
    dt: float = 1e-3
    estimator: str = "field"

    def __post_init__(self):
        if self.formula not in FORMULAS:
            raise ArgumentError(f"unknown formula {self.formula!r}; expected one of {FORMULAS}")
        if self.estimator not in ("field", "conditional"):
            raise ArgumentError(f"unknown estimator {self.estimator!r}")
        if not (0.0 < self.nu <= 1.0):
            raise ArgumentError(f"nu={self.nu} outside (0,1]")
        if not (self.t0 <= self.t1 <= self.t2):
            raise ArgumentError("require t0 <= t1 <= t2")
        if self.formula == "markov-lag" and self.nu != 1.0:
            raise ArgumentError("markov-lag is the nu=1 covariance; use frac-lag-integral for nu<1")
        if self.formula == "frac-lag-integral" and not self.t1 > self.t0:
            raise ArgumentError("frac-lag-integral needs t1 > t0")
        if self.formula == "two-point" and inner_product(self.x, self.y) >= 1.0 - 1e-15:
            raise ArgumentError("two-point needs x != y")
        if self.spectrum is None and self.formula != "equilibrium-trd":
            object.__setattr__(self, "spectrum", PowerSpectrum.parametric(3.0, 1.0, lmax=20))

    @property
    def key(self):
        parts = [self.formula, self.nu, self.t0, self.t1, self.t2, self.x.theta, self.x.phi,
                 self.y.theta, self.y.phi, self.dt, self.estimator]
        if self.spectrum is not None:
            parts.append(hashlib.sha1(self.spectrum.c.tobytes()).hexdigest()[:12])
        return "|".join(repr(p) for p in parts)

    @property
    def lag(self):
        return self.t2 - self.t1

    def analytic(self):
        """(value, truncation tail bound)."""
        f = self.formula
        if f == "equilibrium-trd":
            return trd_equilibrium_cov(self.nu, self.lag), 0.0
        S = self.spectrum
        tail = S.tail_bound()
        if f == "static":
            return field_covariance_static(S, self.x, self.y), tail
        q = CovarianceQuery(self.nu, self.t0, self.t1, self.t2, self.x, self.y, S)
        if f == "same-point":
            return cov_same_point(q), tail
        if f == "two-point":
            return cov_two_points(q), tail
        if f == "markov-lag":
            return cov_markov_lag(S, self.t1, self.t2), tail
        if self.t1 == self.t2:
            return S.variance(), tail
        return cov_fractional_lag_integral(S, self.nu, self.t1 - self.t0, self.t2 - self.t0), tail

    def bias_bound(self):
        """Discretisation bias bound for the MC estimate (see module doc)."""
        f = self.formula
        if f == "static":
            return 0.0
        dt = self.dt
        if f == "equilibrium-trd":
            lmax, w = 1, np.array([0.0, 1.0 / 3.0])
        else:
            lmax, w = self.spectrum.lmax, np.abs(self.spectrum.weights())
        eps = walk_bias(lmax, dt)
        ls = np.arange(lmax + 1)
        m = ls * (ls + 1.0)
        fixed = self.nu >= 1.0

        def tgrid(tau):
            # |E exp(-mu L_grid) - E exp(-mu L)| for elapsed real time tau
            if fixed:
                k = np.rint(tau / dt)
                return np.abs(np.exp(-m * k * dt) - np.exp(-m * tau))
            return decay_table(self.nu, lmax, tau) * (1.0 - np.exp(-m * dt))

        if f in ("same-point",):
            per = eps + tgrid(self.t1 - self.t0)
        elif f == "equilibrium-trd":
            per = eps + tgrid(self.lag)
        elif f == "two-point":
            per = 2 * eps + tgrid(self.t1 - self.t0) + tgrid(self.t2 - self.t0)
            per = per * np.abs(legendre_p_all(lmax, inner_product(self.x, self.y)))
        else:  # shared driver, two times
            if fixed:
                k = np.rint((self.t2 - self.t0) / dt) - np.rint((self.t1 - self.t0) / dt)
                per = eps + np.abs(np.exp(-m * k * dt) - np.exp(-m * self.lag))
            else:
                br = np.array([fractional_lag_bracket(self.nu, mm, self.t1 - self.t0, self.t2 - self.t0)
                               if self.t2 > self.t1 else 1.0 for mm in m])
                per = eps + br * np.expm1(m * dt)
        per[0] = 0.0
        return float(np.dot(w, per))


def _uniform_vectors(rng, n):
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _chunk_samples(exp, seed, c, n):
    """Per-replication products for chunk c (n replications)."""
    key = exp.key
    f = exp.formula
    if f == "equilibrium-trd":
        rs = substream(seed, "cov", key, "start", c)
        x0 = _uniform_vectors(rs, n)
        _, pos = run_operational(exp.nu, [exp.lag], n, exp.dt, substream(seed, "cov", key, "x", c),
                                 x0=x0, walk=True)
        return np.einsum("ij,ij->i", x0, pos[:, 0]) / 3.0
    S = exp.spectrum
    xv, yv = exp.x.vector, exp.y.vector
    if f == "static":
        A = np.broadcast_to(xv, (n, 3))
        B = np.broadcast_to(yv, (n, 3))
    elif f == "same-point":
        A = np.broadcast_to(xv, (n, 3))
        _, pos = run_operational(exp.nu, [exp.t1 - exp.t0], n, exp.dt,
                                 substream(seed, "cov", key, "x", c), x0=xv)
        B = pos[:, 0]
    elif f == "two-point":
        _, px = run_operational(exp.nu, [exp.t1 - exp.t0], n, exp.dt,
                                substream(seed, "cov", key, "x", c), x0=xv)
        _, py = run_operational(exp.nu, [exp.t2 - exp.t0], n, exp.dt,
                                substream(seed, "cov", key, "y", c), x0=yv)
        A, B = px[:, 0], py[:, 0]
    else:
        times = sorted({exp.t1 - exp.t0, exp.t2 - exp.t0})
        _, pos = run_operational(exp.nu, times, n, exp.dt,
                                 substream(seed, "cov", key, "x", c), x0=xv)
        A = pos[:, 0] if exp.t1 > exp.t0 else np.broadcast_to(xv, (n, 3))
        B = pos[:, -1]
    if exp.estimator == "conditional":
        cosd = np.clip(np.einsum("ij,ij->i", A, B), -1.0, 1.0)
        return np.tensordot(S.weights(), legendre_p_all(S.lmax, cosd), axes=(0, 0))
    G = substream(seed, "cov", key, "field", c).standard_normal((n, (S.lmax + 1) ** 2))
    ta, pa = vector_to_angles(np.ascontiguousarray(A))
    tb, pb = vector_to_angles(np.ascontiguousarray(B))
    Ta = np.einsum("ij,ij->i", G, real_basis(S, ta, pa))
    Tb = np.einsum("ij,ij->i", G, real_basis(S, tb, pb))
    return Ta * Tb


def _run_chunks(fn, n_total, workers=1):
    chunks = [(c, min(CHUNK, n_total - c * CHUNK)) for c in range(-(-n_total // CHUNK))]
    if workers and workers > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda cn: fn(*cn), chunks))
    else:
        parts = [fn(c, n) for c, n in chunks]
    return np.concatenate(parts)


def empirical_covariance(experiment, n_paths, seed, workers=1):
    """MC estimate of the covariance named by the experiment.

    Random streams are keyed by (seed, experiment, chunk), so the result does
    not depend on the number of workers.
    """
    if isinstance(experiment, dict):
        experiment = CovarianceExperiment(**experiment)
    if n_paths < 2:
        raise ArgumentError("need at least 2 replications")
    x = _run_chunks(lambda c, n: _chunk_samples(experiment, seed, c, n), int(n_paths), workers)
    return McEstimate.from_samples(x)


def shared_ensemble_covariances(nu, x, y, spectrum, t0, same_times, pair_times, lag_pairs,
                                n_paths, seed, dt=1e-3, estimator="field"):
    """Several covariance estimates from one field draw and one ensemble per
    start point per replication (the acceptance-scale driver).

    same_times: t1 values for E[T(x) T(X^x_t1)]
    pair_times: (t1, t2) for E[T(X^x_t1) T(X^y_t2)] (independent drivers)
    lag_pairs:  (t1, t2) for E[T(X^x_t1) T(X^x_t2)] (shared driver)
    Returns dict with lists of McEstimate in the same order.
    """
    tx = sorted({t - t0 for t in same_times} | {a - t0 for a, _ in pair_times}
                | {a - t0 for a, b in lag_pairs} | {b - t0 for a, b in lag_pairs})
    ty = sorted({b - t0 for _, b in pair_times})
    key = repr(("shared", nu, x, y, t0, tuple(tx), tuple(ty), dt, estimator,
                hashlib.sha1(spectrum.c.tobytes()).hexdigest()[:12]))
    xv, yv = x.vector, y.vector
    ix = {t: i for i, t in enumerate(tx)}
    iy = {t: i for i, t in enumerate(ty)}
    nres = len(same_times) + len(pair_times) + len(lag_pairs)

    def fn(c, n):
        _, px = run_operational(nu, tx, n, dt, substream(seed, key, "x", c), x0=xv)
        py = None
        if ty:
            _, py = run_operational(nu, ty, n, dt, substream(seed, key, "y", c), x0=yv)
        pairs = [(np.broadcast_to(xv, (n, 3)), px[:, ix[t - t0]]) for t in same_times]
        pairs += [(px[:, ix[a - t0]], py[:, iy[b - t0]]) for a, b in pair_times]
        pairs += [(px[:, ix[a - t0]], px[:, ix[b - t0]]) for a, b in lag_pairs]
        out = np.empty((n, nres))
        if estimator == "conditional":
            w = spectrum.weights()
            for k, (A, B) in enumerate(pairs):
                cosd = np.clip(np.einsum("ij,ij->i", A, B), -1.0, 1.0)
                out[:, k] = np.tensordot(w, legendre_p_all(spectrum.lmax, cosd), axes=(0, 0))
            return out
        G = substream(seed, key, "field", c).standard_normal((n, (spectrum.lmax + 1) ** 2))
        cache = {}

        def tval(V):
            k = id(V)
            if k not in cache:
                th, ph = vector_to_angles(np.ascontiguousarray(V))
                cache[k] = (np.einsum("ij,ij->i", G, real_basis(spectrum, th, ph)), V)
            return cache[k][0]

        for k, (A, B) in enumerate(pairs):
            out[:, k] = tval(A) * tval(B)
        return out

    chunks = [(c, min(CHUNK, n_paths - c * CHUNK)) for c in range(-(-n_paths // CHUNK))]
    allv = np.concatenate([fn(c, n) for c, n in chunks])
    ests = [McEstimate.from_samples(allv[:, k]) for k in range(nres)]
    a, b = len(same_times), len(same_times) + len(pair_times)
    return {"same": ests[:a], "pair": ests[a:b], "lag": ests[b:]}


# dependence range -----------------------------------------------------------

@dataclass(frozen=True)
class DependenceResult:
    exponent: float
    verdict: str
    mc_exponent: float | None = None


def _fit_slope(h, v):
    ok = v > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(h[ok]), np.log(v[ok]), 1)[0])


def dependence_range_diagnostic(nu, spectrum, h_grid, n_paths=0, seed=0, dt=1e-2):
    """Tail exponent of cov_same_point(lag h) - C_0/(4pi) and a verdict.

    The l=0 term is the constant C_0/(4pi); the decaying remainder is fitted
    in log-log. "long-range": exponent in (-1, 0) and h*cov(h) still growing
    over the grid (partial sums diverge). "short-range": super-polynomial
    decay (underflow or steepening local slopes) or exponent < -1.
    "degenerate-constant": no l >= 1 content.
    With n_paths > 0 the same fit is made on MC estimates (conditional
    estimator) of the remainder.
    """
    h = np.asarray(sorted(h_grid), dtype=float)
    if h.size < 3 or h[0] <= 0 or h[-1] / h[0] < 100.0 * (1 - 1e-12):
        raise ArgumentError("lag grid must be positive and span at least two decades")
    if not isinstance(spectrum, PowerSpectrum):
        spectrum = PowerSpectrum(spectrum)
    w = spectrum.weights()
    if not np.any(w[1:] > 0):
        return DependenceResult(0.0, "degenerate-constant", None)
    L = spectrum.lmax
    rem = np.array([float(np.dot(w[1:], decay_table(nu, L, hh)[1:])) for hh in h])
    p = _fit_slope(h, rem)
    ok = rem > 0
    local = np.diff(np.log(rem[ok])) / np.diff(np.log(h[ok])) if ok.sum() >= 2 else np.array([])
    superpoly = (not ok.all()) or (local.size >= 2 and local[-1] < -5.0 and local[-1] < 2.0 * local[0])
    g = h * rem
    if superpoly or (not math.isnan(p) and p < -1.0):
        verdict = "short-range"
    elif -1.0 < p < 0.0 and g[-1] > g[0]:
        verdict = "long-range"
    else:
        verdict = "indeterminate"
    mcp = None
    if n_paths and n_paths > 0:
        vals = []
        for hh in h:
            e = CovarianceExperiment("same-point", nu, 0.0, hh, hh, spectrum=spectrum, dt=dt,
                                     estimator="conditional")
            vals.append(empirical_covariance(e, n_paths, seed).value - w[0])
        mcp = _fit_slope(h, np.array(vals))
    return DependenceResult(p, verdict, mcp)


# validation suites ----------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    estimate: float
    analytic: float
    tolerance: float

    @property
    def passed(self):
        return bool(abs(self.estimate - self.analytic) <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "estimate": float(self.estimate), "analytic": float(self.analytic),
                "tolerance": float(self.tolerance), "pass": self.passed}


@dataclass
class ValidationReport:
    suite: str
    checks: list
    seed: int
    runtime: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def n_failed(self):
        return sum(not c.passed for c in self.checks)

    def to_dict(self, record_runtime=False):
        """JSON-ready dict; runtime_s is None unless record_runtime, so that
        reports are byte-identical across runs."""
        return {"suite": self.suite, "seed": int(self.seed),
                "runtime_s": float(self.runtime) if record_runtime else None,
                "checks": [c.to_dict() for c in self.checks]}


def _mc_check(name, est, analytic, bias=0.0):
    # the 1e-13 floor only matters for zero-variance samples (l = 0)
    return Check(name, est.value, analytic, 3.0 * est.stderr + float(bias) + 1e-13)


def _shortfall(name, value, threshold):
    """Inequality value >= threshold as a check on max(0, threshold - value)."""
    return Check(name, max(0.0, threshold - value), 0.0, 0.0)


class _Ctx:
    def __init__(self, suite, seed, scale):
        self.suite, self.seed, self.scale = suite, seed, scale

    def rng(self, *keys):
        return substream(self.seed, self.suite, *keys)

    def n(self, default, floor=200):
        return max(floor, int(round(default * self.scale)))


# specfun ------------------------------------------------------------------

def _suite_specfun(ctx):
    from scipy.special import erfcx
    from .specfun import (_ml_asymptotic, _ml_integral, _ml_series, caputo_derivative_numeric,
                          mittag_leffler, riemann_liouville_from_caputo, spherical_harmonic)
    from .sphgeom import build_quadrature
    out = []
    for nu in (0.3, 0.7, 1.0):
        out.append(Check(f"ml-zero nu={nu}", mittag_leffler(nu, 0.0), 1.0, 0.0))
    x = np.linspace(0.0, 20.0, 401)
    out.append(Check("ml-exp max|E_1(-x)-exp(-x)| x<=20",
                     float(np.max(np.abs(mittag_leffler(1.0, -x) - np.exp(-x)))), 0.0, 1e-10))
    r = ctx.rng("ml-bound")
    nus = r.uniform(0.05, 1.0, 200)
    xs = 10.0 ** r.uniform(-3, 4, 200)
    viol = 0.0
    for nu, xx in zip(nus, xs):
        e = mittag_leffler(float(nu), -float(xx))
        viol = max(viol, e - 1.0 / (1.0 + xx / math.gamma(1.0 + nu)), -e)
    out.append(Check("ml-bound 200 random points", viol, 0.0, 1e-12))
    out.append(Check("ml-erfc nu=0.5 z=-1", mittag_leffler(0.5, -1.0), float(erfcx(1.0)), 1e-9))
    for nu in (0.5, 0.8):
        xx = 1e3
        out.append(Check(f"ml-tail nu={nu} x=1e3", mittag_leffler(nu, -xx ** nu) * xx ** nu * math.gamma(1 - nu),
                         1.0, 0.02))
    xx = 1e3
    two = 1.0 - xx ** -0.3 * math.gamma(0.7) / math.gamma(0.4)
    out.append(Check("ml-tail-two-term nu=0.3 x=1e3",
                     mittag_leffler(0.3, -xx ** 0.3) * xx ** 0.3 * math.gamma(0.7), two, 0.02))
    for nu in (0.3, 0.6, 0.9):
        a = 6.0 ** nu
        out.append(Check(f"ml-seam-series-integral nu={nu}", _ml_series(nu, a), _ml_integral(nu, a), 1e-9))
        out.append(Check(f"ml-seam-integral-asymptotic nu={nu}", _ml_integral(nu, 250.0),
                         _ml_asymptotic(nu, 250.0), 1e-9))
    for nu in (0.3, 0.5, 0.7, 0.9):
        for mu_, t in ((1.0, 0.5), (2.0, 1.0), (6.0, 2.0)):
            f = lambda s, nu=nu, mu_=mu_: mittag_leffler(nu, -mu_ * s ** nu)
            out.append(Check(f"caputo-eigen nu={nu} mu={mu_} t={t}", caputo_derivative_numeric(f, nu, t),
                             -mu_ * f(t), 5e-4))
    out.append(Check("caputo-linear nu=0.5 t=1", caputo_derivative_numeric(lambda s: s, 0.5, 1.0),
                     1.0 / math.gamma(1.5), 1e-6))
    nu, t = 0.6, 0.8
    f = lambda s: mittag_leffler(nu, -s ** nu)
    rl = riemann_liouville_from_caputo(caputo_derivative_numeric(f, nu, t), 1.0, nu, t)
    out.append(Check("riemann-liouville nu=0.6 t=0.8", rl, t ** -nu / math.gamma(1 - nu) - f(t), 5e-4))
    th = np.arccos(ctx.rng("ylm").uniform(-1, 1, 50))
    ph = ctx.rng("ylm-phi").uniform(0, 2 * math.pi, 50)
    Y = ylm_table(10, th, ph)
    d = 0.0
    for l in range(11):
        for m in range(1, l + 1):
            d = max(d, float(np.max(np.abs(Y[:, l * l + l - m] - (-1) ** m * np.conj(Y[:, l * l + l + m])))))
    out.append(Check("ylm-conjugation l<=10", d, 0.0, 1e-12))
    g = build_quadrature(24, 49)
    Yq = ylm_table(10, g.theta, g.phi)
    gram = (np.conj(Yq).T * g.weights) @ Yq
    out.append(Check("ylm-orthonormality l<=10", float(np.max(np.abs(gram - np.eye(gram.shape[0])))), 0.0, 1e-10))
    th2 = np.arccos(ctx.rng("add").uniform(-1, 1, 50))
    ph2 = ctx.rng("add-phi").uniform(0, 2 * math.pi, 50)
    Y2 = ylm_table(10, th2, ph2)
    cosg = np.einsum("ij,ij->i", angles_to_vector(th, ph), angles_to_vector(th2, ph2))
    P = legendre_p_all(10, np.clip(cosg, -1, 1))
    d = 0.0
    for l in range(11):
        s = np.sum(Y[:, l * l:(l + 1) ** 2] * np.conj(Y2[:, l * l:(l + 1) ** 2]), axis=1)
        d = max(d, float(np.max(np.abs(s - (2 * l + 1) / FOUR_PI * P[l]))))
    out.append(Check("addition-theorem l<=10 50 pairs", d, 0.0, 1e-10))
    # reproducing kernel: int K_l(x,z) K_l(z,y) dz = K_l(x,y)
    d = 0.0
    Vq = g.vectors
    for l in range(7):
        for i in range(5):
            kx = (2 * l + 1) / FOUR_PI * legendre_p_all(l, np.clip(Vq @ angles_to_vector(th[i], ph[i]), -1, 1))[l]
            ky = (2 * l + 1) / FOUR_PI * legendre_p_all(l, np.clip(Vq @ angles_to_vector(th2[i], ph2[i]), -1, 1))[l]
            d = max(d, abs(float(g.integrate(kx * ky)) - (2 * l + 1) / FOUR_PI * float(P[l, i])))
    out.append(Check("reproducing-kernel l<=6", d, 0.0, 1e-9))
    return out


# wigner ---------------------------------------------------------------------

def _suite_wigner(ctx):
    from itertools import product

    from . import wigner as W
    from .sphgeom import build_quadrature
    out = []
    dpar = dcyc = 0.0
    for l1, l2, l3 in product(range(7), repeat=3):
        if not W._triangle(l1, l2, l3):
            continue
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                m3 = -m1 - m2
                if abs(m3) > l3:
                    continue
                v = W.wigner_3j((l1, l2, l3, m1, m2, m3))
                s = (-1) ** (l1 + l2 + l3)
                dpar = max(dpar, abs(W.wigner_3j((l1, l2, l3, -m1, -m2, -m3)) - s * v))
                dcyc = max(dcyc, abs(W.wigner_3j((l2, l3, l1, m2, m3, m1)) - v),
                           abs(W.wigner_3j((l2, l1, l3, m2, m1, m3)) - s * v))
    out.append(Check("3j-parity l<=6", dpar, 0.0, 1e-14))
    out.append(Check("3j-permutation l<=6", dcyc, 0.0, 1e-14))
    rel = 0.0
    for l1 in range(11):
        for l2 in range(l1 + 1):
            for l3 in range(abs(l1 - l2), min(10, l1 + l2) + 1):
                for m1 in range(-l1, l1 + 1):
                    for m2 in range(-l2, l2 + 1):
                        m3 = -m1 - m2
                        if abs(m3) > l3:
                            continue
                        a = W.wigner_3j((l1, l2, l3, m1, m2, m3))
                        b = W.wigner_3j_exact_float((l1, l2, l3, m1, m2, m3))
                        if b != 0.0:
                            rel = max(rel, abs(a - b) / abs(b))
                        elif a != 0.0:
                            rel = max(rel, abs(a))
    out.append(Check("3j-exact-vs-float l<=10 (relative)", rel, 0.0, 1e-12))
    d = 0.0
    for l1, l2 in ((1, 1), (2, 1), (3, 2), (4, 4)):
        for l, lp in ((abs(l1 - l2), abs(l1 - l2)), (l1 + l2, l1 + l2), (abs(l1 - l2), l1 + l2)):
            for m in range(-min(l, 2), min(l, 2) + 1):
                d = max(d, abs(W.orthogonality_sum("orth1", l1=l1, l2=l2, l=l, lp=lp, m=m, mp=m)
                               - (1.0 if l == lp else 0.0) / (2 * l + 1)))
    out.append(Check("orth1", d, 0.0, 1e-12))
    d = 0.0
    for g_, k_, l in ((0, 0, 1), (0, 0, 4), (2, 0, 1), (2, 1, 2), (3, 2, 3), (4, 0, 4)):
        exact = math.sqrt(2 * l + 1) if g_ == 0 and k_ == 0 else 0.0
        d = max(d, abs(W.orthogonality_sum("orth2", gamma=g_, kappa=k_, l=l) - exact))
    out.append(Check("orth2", d, 0.0, 1e-12))
    d = 0.0
    for l1, l2 in ((1, 1), (2, 1), (3, 3), (4, 2)):
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                for M1, M2 in ((m1, m2), (-m1 if abs(m1) <= l1 else m1, m2)):
                    v = W.orthogonality_sum("orth3", l1=l1, l2=l2, m1=m1, m2=m2, M1=M1, M2=M2)
                    d = max(d, abs(v - (1.0 if (m1, m2) == (M1, M2) else 0.0)))
    out.append(Check("orth3", d, 0.0, 1e-12))
    d = 0.0
    for l1, l2, l3 in product(range(7), repeat=3):
        if W._triangle(l1, l2, l3):
            d = max(d, abs(W.orthogonality_sum("orth4", l1=l1, l2=l2, l3=l3) - 1.0))
    out.append(Check("orth4 l<=6", d, 0.0, 1e-12))
    g = build_quadrature(9, 17)
    Y = ylm_table(5, g.theta, g.phi)
    d = 0.0
    for l1, l2, l3 in product(range(6), repeat=3):
        if not W._triangle(l1, l2, l3) or (l1 + l2 + l3) % 2:
            continue
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                m3 = -m1 - m2
                if abs(m3) > l3:
                    continue
                q = g.integrate(Y[:, l1 * l1 + l1 + m1] * Y[:, l2 * l2 + l2 + m2] * Y[:, l3 * l3 + l3 + m3])
                d = max(d, abs(complex(q) - W.gaunt_integral(l1, m1, l2, m2, l3, m3)))
    out.append(Check("gaunt-vs-quadrature l<=5", d, 0.0, 1e-9))
    return out


# subordinator laws ----------------------------------------------------------

def _suite_subordinator(ctx):
    from scipy.stats import ks_2samp

    from .specfun import mittag_leffler
    from .subordinate import sample_inverse_marginal, sample_stable_increment
    out = []
    nm = ctx.n(100000)
    for nu in (0.3, 0.6, 0.9):
        for s in (0.5, 2.0):
            x = sample_stable_increment(nu, 1.0, ctx.rng("stable", nu, s), size=nm)
            out.append(_mc_check(f"stable-laplace nu={nu} s={s}", McEstimate.from_samples(np.exp(-s * x)),
                                 math.exp(-s ** nu)))
    x1 = sample_stable_increment(0.7, 1.0, ctx.rng("ss1"), size=nm)
    x2 = sample_stable_increment(0.7, 0.01, ctx.rng("ss2"), size=nm) / 0.01 ** (1 / 0.7)
    ks = ks_2samp(x1, x2)
    out.append(_shortfall("stable-self-similarity KS p-value >= 0.001", float(ks.pvalue), 0.001))
    for nu in (0.4, 0.6, 0.8):
        for lam in (0.5, 1.0, 2.0):
            for t in (0.5, 1.0):
                L = sample_inverse_marginal(nu, t, ctx.rng("inv", nu, lam, t), size=nm)
                out.append(_mc_check(f"inverse-laplace nu={nu} lambda={lam} t={t}",
                                     McEstimate.from_samples(np.exp(-lam * L)),
                                     mittag_leffler(nu, -lam * t ** nu)))
    L = sample_inverse_marginal(0.5, 1.0, ctx.rng("inv-mean"), size=nm)
    out.append(_mc_check("inverse-mean nu=0.5 t=1", McEstimate.from_samples(L), 1.0 / math.gamma(1.5)))
    npth = ctx.n(10000)
    dt = 1e-3
    tg = np.array([0.5, 1.0, 2.0])
    Lp, _ = run_operational(0.6, tg, npth, dt, ctx.rng("path-mean"), walk=False)
    out.append(_mc_check("inverse-path-mean nu=0.6 t=1 (grid)", McEstimate.from_samples(Lp[:, 1]),
                         1.0 / math.gamma(1.6), bias=dt))
    out.append(Check("inverse-path nondecreasing", float(np.sum(np.diff(Lp, axis=1) < 0)), 0.0, 0.0))
    # increments are not stationary: Var(L2-L1) differs from Var(L1-L0) (L0 = 0)
    Lh, _ = run_operational(0.5, [1.0, 2.0], npth, dt, ctx.rng("increments"), walk=False)
    a = Lh[:, 1] - Lh[:, 0]
    b = Lh[:, 0]
    psi = (a - a.mean()) ** 2 - (b - b.mean()) ** 2
    z = abs(psi.mean()) / (psi.std(ddof=1) / math.sqrt(psi.size))
    out.append(_shortfall("nonstationary-increments nu=0.5 |z| >= 5", float(z), 5.0))
    tg2 = np.linspace(0.01, 1.0, 100)
    Lc, _ = run_operational(0.5, tg2, ctx.n(2000), dt, ctx.rng("flat"), walk=False)
    frac = float(np.mean(np.diff(Lc, axis=1) == 0.0))
    out.append(_shortfall("flat-intervals nu=0.5 fraction >= 0.1", frac, 0.1))
    tg3 = np.array([1.0, 2.0, 4.0])
    Ln, _ = run_operational(0.99, tg3, ctx.n(2000), dt, ctx.rng("near1"), walk=False)
    dev = float(np.max(np.abs(Ln.mean(axis=0) / tg3 - 1.0)))
    out.append(Check("inverse-near-identity nu=0.99", dev, 0.0, 0.15))
    return out


# diffusion marginals --------------------------------------------------------

def _suite_diffusion(ctx):
    from scipy.stats import ks_2samp

    from .diffusion import (DensityParams, chapman_kolmogorov_defect, expected_harmonic,
                            expected_harmonic_sq, marginal_cos_cdf, solution_angular_spectrum,
                            transition_density)
    from .specfun import mittag_leffler
    from .sphgeom import NORTH, build_quadrature
    out = []
    dt = 1e-3
    tg = np.linspace(0.05, 0.5, 10)
    nb = ctx.n(50000)
    _, pos = run_operational(1.0, tg, nb, dt, ctx.rng("bm"), x0=NORTH.vector)
    c = pos[..., 2]
    m = c.mean(axis=0)
    se = c.std(axis=0, ddof=1) / math.sqrt(nb)
    slope = -np.polyfit(tg, np.log(m), 1, w=m / se)[0]
    out.append(Check("bm-decay-rate mu_1", float(slope), 2.0, 0.04))
    eps1 = walk_bias(1, dt)[1]
    out.append(_mc_check("bm-mean-cos t=0.5", McEstimate.from_samples(c[:, -1]), math.exp(-1.0), eps1))
    x = SpherePoint(0.9, 0.4)
    tau = 0.5
    npth = ctx.n(10000)
    for nu in (0.6, 1.0):
        _, p = run_operational(nu, [tau], npth, dt, ctx.rng("prop42", nu), x0=x.vector)
        th, ph = vector_to_angles(p[:, 0])
        Y = ylm_table(3, th, ph)
        eps = walk_bias(3, dt)
        for l in range(4):
            grid_b = 0.0 if nu == 1.0 else mittag_leffler(nu, -l * (l + 1.0) * tau ** nu) * (1 - math.exp(-l * (l + 1.0) * dt))
            for mm in range(-l, l + 1):
                ex = expected_harmonic(l, mm, x, tau, nu)
                y = Y[:, l * l + l + mm]
                yabs = abs(complex(spherical_harmonic_at(l, mm, x)))
                b = (eps[l] + grid_b) * yabs
                out.append(_mc_check(f"harmonic-mean-re nu={nu} l={l} m={mm}",
                                     McEstimate.from_samples(y.real), float(np.real(ex)), b))
                if mm != 0:
                    out.append(_mc_check(f"harmonic-mean-im nu={nu} l={l} m={mm}",
                                         McEstimate.from_samples(y.imag), float(np.imag(ex)), b))
        for l in range(3):
            for mm in range(0, l + 1):
                out.append(_mc_check(f"harmonic-square nu={nu} l={l} m={mm}",
                                     McEstimate.from_samples(np.abs(Y[:, l * l + l + mm]) ** 2),
                                     expected_harmonic_sq(l, mm, x, tau, nu),
                                     _harmonic_sq_bias(l, mm, x, nu, tau, dt)))
        s = np.sum(np.abs(Y[:, 4:9]) ** 2, axis=1)
        out.append(Check(f"variance-preservation nu={nu} l=2", float(np.max(np.abs(s - 5 / FOUR_PI))), 0.0, 1e-12))
        # marginal law of <X_t, x0> against the series CDF (nu < 1 adds grid bias, negligible here)
        cosd = p[:, 0] @ x.vector
        from scipy.stats import kstest
        ks = kstest(np.clip(cosd, -1, 1), lambda v: np.clip(marginal_cos_cdf(nu, tau, v, 200), 0, 1))
        out.append(_shortfall(f"marginal-cos KS nu={nu} p-value >= 0.001", float(ks.pvalue), 0.001))
    _, pa = run_operational(1.0, [0.3], ctx.n(10000), dt, ctx.rng("nu1-a"), x0=NORTH.vector)
    _, pb = run_operational(1.0, [0.3], ctx.n(10000), dt, ctx.rng("nu1-b"), x0=NORTH.vector)
    ks = ks_2samp(pa[:, 0, 2], pb[:, 0, 2])
    out.append(_shortfall("trd-nu1-equals-bm KS p-value >= 0.001", float(ks.pvalue), 0.001))
    _, pu = run_operational(1.0, [5.0], ctx.n(10000), 1e-2, ctx.rng("uniform"), x0=NORTH.vector)
    th, ph = vector_to_angles(pu[:, 0])
    Yu = ylm_table(3, th, ph)
    for l in range(1, 4):
        est = McEstimate.from_samples(Yu[:, l * l + l].real)
        out.append(_mc_check(f"bm-uniform-limit t=5 l={l} m=0", est, 0.0, math.sqrt((2 * l + 1) / FOUR_PI) * math.exp(-l * (l + 1) * 5.0) + walk_bias(l, 1e-2)[l]))
    g = build_quadrature(64, 129)
    V = g.vectors
    for nu in (0.6, 1.0):
        u = transition_density(V, 0.2, NORTH, DensityParams(nu, l_max=60))
        out.append(Check(f"density-normalization nu={nu}", float(g.integrate(u)), 1.0, 1e-8))
        out.append(Check(f"density-nonnegative nu={nu} (32x65 grid)",
                         float(min(0.0, np.min(transition_density(build_quadrature(32, 65).vectors, 0.1, NORTH,
                                                                 DensityParams(nu, l_max=40))))), 0.0, 0.0))
    d = chapman_kolmogorov_defect(1.0, 0.0, 0.3, 0.7, NORTH, SpherePoint(1.0, 0.5), DensityParams(1.0, l_max=60))
    out.append(Check("chapman-kolmogorov nu=1 R=1", d, 0.0, 1e-10))
    d = chapman_kolmogorov_defect(0.6, 0.0, 0.3, 0.7, NORTH, NORTH, DensityParams(0.6, l_max=200))
    out.append(_shortfall("chapman-kolmogorov nu=0.6 |defect| >= 1e-3", abs(d), 1e-3))
    r = tuple([1.0] + [0.5] * 60)
    d = chapman_kolmogorov_defect(1.0, 0.0, 0.3, 0.7, NORTH, NORTH, DensityParams(1.0, l_max=60, r_coeffs=r))
    out.append(_shortfall("chapman-kolmogorov nu=1 R_l=0.5 |defect| >= 1e-6", abs(d), 1e-6))
    nu, l, t = 0.6, 200, 2.0
    A = solution_angular_spectrum(l, t, DensityParams(nu), 1.0)
    asym = 1.0 / (l * (l + 1.0) * t ** nu * math.gamma(1 - nu)) ** 2
    out.append(Check("angular-spectrum asymptotic nu=0.6 l=200 (relative)", A / asym, 1.0, 0.05))
    return out


def spherical_harmonic_at(l, m, x):
    from .specfun import spherical_harmonic
    return spherical_harmonic((l, m), x.theta, x.phi)


def _harmonic_sq_bias(l, m, x, nu, tau, dt):
    """Bias bound for E|Y_lm(X)|^2: the 3j expansion term by term, each
    degree gamma carrying its walk and grid bias."""
    from . import wigner as W
    from .specfun import mittag_leffler
    eps = walk_bias(2 * l, dt)
    tot = 0.0
    for g in range(1, 2 * l + 1):
        a = W.wigner_3j((g, l, l, 0, 0, 0))
        if a == 0.0:
            continue
        mg = g * (g + 1.0)
        grid = 0.0 if nu >= 1.0 else mittag_leffler(nu, -mg * tau ** nu) * (1 - math.exp(-mg * dt))
        for k in range(-g, g + 1):
            b = W.wigner_3j((g, l, l, k, m, -m))
            if b != 0.0:
                y = abs(spherical_harmonic_at(g, k, x))
                tot += (2 * l + 1) * math.sqrt((2 * g + 1) / FOUR_PI) * abs(a * b) * y * (eps[g] + grid)
    return tot


# covariance theorems ----------------------------------------------------------

def _suite_covariance(ctx):
    from .fields import frequency_component_cov
    from .sphgeom import random_rotation, rotate
    out = []
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=20)
    x, y = SpherePoint(0.7, 0.2), SpherePoint(2.0, 1.0)
    anti = SpherePoint(math.pi - 0.7, 0.2 + math.pi)
    ns = ctx.n(100000)
    npth = ctx.n(10000)
    seed = ctx.seed

    def run(name, e, n):
        est = empirical_covariance(e, n, derive_seed(seed, ctx.suite, name))
        # MC and analytic use the same band-limited spectrum, so no truncation tail
        val, _ = e.analytic()
        return Check(name, est.value, val, 3.0 * est.stderr + e.bias_bound() + 1e-13)

    out.append(run("static antipodal", CovarianceExperiment("static", 1.0, x=x, y=anti, spectrum=S), ns))
    out.append(run("static generic", CovarianceExperiment("static", 1.0, x=x, y=y, spectrum=S), ns))
    out.append(run("static variance", CovarianceExperiment("static", 1.0, x=x, y=x, spectrum=S), ns))
    for nu in (0.6, 1.0):
        out.append(run(f"same-point nu={nu} t1=0.5",
                       CovarianceExperiment("same-point", nu, 0.0, 0.5, 0.5, x, y, S), npth))
        out.append(run(f"two-point nu={nu} t1=0.3 t2=0.6",
                       CovarianceExperiment("two-point", nu, 0.0, 0.3, 0.6, x, y, S), npth))
        lagf = "markov-lag" if nu == 1.0 else "frac-lag-integral"
        out.append(run(f"{lagf} nu={nu} t1=0.3 t2=0.8",
                       CovarianceExperiment(lagf, nu, 0.0, 0.3, 0.8, x, y, S), npth))
        out.append(run(f"second-moment nu={nu} t=0.5",
                       CovarianceExperiment("frac-lag-integral", nu, 0.0, 0.5, 0.5, x, y, S), npth))
        out.append(run(f"equilibrium-trd nu={nu} h=0.5",
                       CovarianceExperiment("equilibrium-trd", nu, 0.0, 0.0, 0.5), npth))
    out.append(run("long-time two-point nu=0.8 t=50",
                   CovarianceExperiment("two-point", 0.8, 0.0, 50.0, 50.0, x, y, S, dt=1e-2,
                                        estimator="conditional"), npth))
    # isotropy: rotating both start points leaves the covariance unchanged
    ni = ctx.n(5000)
    base_e = CovarianceExperiment("two-point", 0.6, 0.0, 0.3, 0.5, x, y, S, estimator="conditional")
    base = empirical_covariance(base_e, ni, derive_seed(seed, ctx.suite, "isotropy-base"))
    rr = ctx.rng("rotations")
    for i in range(20):
        q = random_rotation(rr)
        e = CovarianceExperiment("two-point", 0.6, 0.0, 0.3, 0.5, rotate(q, x), rotate(q, y), S,
                                 estimator="conditional")
        est = empirical_covariance(e, ni, derive_seed(seed, ctx.suite, "isotropy", i))
        out.append(Check(f"isotropy rotation {i}", est.value, base.value,
                         3.0 * math.hypot(est.stderr, base.stderr)))
    tot = sum(frequency_component_cov(l, 0.6, 0.0, 0.3, 0.6, x, y, S) for l in range(S.lmax + 1))
    q = CovarianceQuery(0.6, 0.0, 0.3, 0.6, x, y, S)
    out.append(Check("frequency-components sum to two-point", tot, cov_two_points(q), 1e-12))
    return out


# dependence range -------------------------------------------------------------

def _suite_dependence(ctx):
    from .fields import frequency_component_cov
    out = []
    S = PowerSpectrum.parametric(3.0, 1.0, lmax=20)
    h = np.logspace(2, 4, 13)
    for nu in (0.3, 0.5, 0.8):
        r = dependence_range_diagnostic(nu, S, h)
        out.append(Check(f"tail-exponent nu={nu}", r.exponent, -nu, 0.05))
        out.append(Check(f"verdict long-range nu={nu}", float(r.verdict == "long-range"), 1.0, 0.0))
    r = dependence_range_diagnostic(1.0, S, np.logspace(-1, 1, 9))
    out.append(Check("verdict short-range nu=1", float(r.verdict == "short-range"), 1.0, 0.0))
    r = dependence_range_diagnostic(0.5, PowerSpectrum(np.array([1.0])), h)
    out.append(Check("verdict degenerate-constant", float(r.verdict == "degenerate-constant"), 1.0, 0.0))
    out.append(Check("degenerate-constant exponent", r.exponent, 0.0, 0.0))
    tot = math.fsum(trd_equilibrium_cov(1.0, k) for k in range(1, 60))
    out.append(Check("equilibrium-sum nu=1", tot, (1.0 / 3.0) / (math.e ** 2 - 1.0), 1e-9))
    hh = np.logspace(2, 4, 9)
    ev = np.array([trd_equilibrium_cov(0.5, v) for v in hh])
    out.append(Check("equilibrium tail exponent nu=0.5", _fit_slope(hh, ev), -0.5, 0.05))
    for nu in (0.3, 0.5, 0.6, 0.8):
        for mu_ in (2.0, 6.0):
            T1, T2 = 1.0, 1e3
            b = fractional_lag_bracket(nu, mu_, T1, T2)
            lim = 1.0 / mu_ + T1 ** nu / math.gamma(1.0 + nu)
            out.append(Check(f"corollary-asymptotic nu={nu} mu={mu_} (relative)",
                             b * T2 ** nu * math.gamma(1.0 - nu) / lim, 1.0, 0.05))
    out.append(Check("markov-lag tail h=20", cov_markov_lag(S, 0.0, 20.0) - S.weights()[0], 0.0, 1e-10))
    x, y = SpherePoint(0.7, 0.2), SpherePoint(2.0, 1.0)
    for l in (1, 3):
        t2 = np.linspace(1.0, 2.0, 6)
        v = [frequency_component_cov(l, 1.0, 0.0, 0.5, float(t), x, y, S) for t in t2]
        sl = np.polyfit(t2, np.log(np.abs(v)), 1)[0]
        out.append(Check(f"frequency-component nu=1 l={l} decay rate (relative)", -sl / (l * (l + 1.0)), 1.0, 0.01))
    Sb = PowerSpectrum.parametric(3.0, 1.0, lmax=400)
    ls = np.arange(100, 401, 50)
    v = [frequency_component_cov(int(l), 0.6, 0.0, 1.0, 100.0, x, y, Sb)
         / legendre_p_all(int(l), inner_product(x, y))[int(l)] for l in ls]
    out.append(Check("frequency-component nu=0.6 high-l exponent", _fit_slope(ls.astype(float), np.abs(v)), -6.0, 0.3))
    return out


SUITES = {
    "specfun": (_suite_specfun, 15.0),
    "wigner": (_suite_wigner, 10.0),
    "subordinator-laws": (_suite_subordinator, 20.0),
    "diffusion-marginals": (_suite_diffusion, 60.0),
    "covariance-theorems": (_suite_covariance, 150.0),
    "dependence-range": (_suite_dependence, 5.0),
}


def run_validation_suite(suite, seed=42, budget=None, workers=1):
    """Run a named invariant battery (or "all") and return a ValidationReport.

    budget (seconds) scales replication counts by budget / nominal cost, with
    a floor; tolerances stay 3*stderr + bias so they widen automatically. The
    scaling uses nominal costs only, never measured time, so reports are
    deterministic in (suite, seed, budget).
    """
    import time
    if suite == "all":
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise ArgumentError(f"unknown suite {suite!r}; expected one of {sorted(SUITES) + ['all']}")
    nominal = sum(SUITES[n][1] for n in names)
    scale = 1.0 if budget is None else min(1.0, max(float(budget), 0.0) / nominal)
    t0 = time.perf_counter()

    def one(name):
        return SUITES[name][0](_Ctx(name, seed, scale))

    if workers and workers > 1 and len(names) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, names))
    else:
        parts = [one(n) for n in names]
    checks = [c for p in parts for c in p]
    return ValidationReport(suite, checks, seed, time.perf_counter() - t0)
