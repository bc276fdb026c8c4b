"""Special functions: Mittag-Leffler on the negative axis, Legendre
polynomials, complex spherical harmonics and numerical fractional derivatives.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import DomainError

SQRT_1_4PI = 0.28209479177387814


@dataclass(frozen=True)
class MittagLefflerParams:
    """Evaluation policy for E_nu on the negative real axis.

    The Taylor series is used for |z| <= min(crossover_radius, 6**nu), the
    asymptotic series for |z| >= 50*crossover_radius and the real-axis
    integral representation in between.
    """

    nu: float = 0.5
    series_terms_max: int = 5000
    asymptotic_terms: int = 60
    crossover_radius: float = 5.0

    def __post_init__(self):
        _check_order(self.nu)
        if self.series_terms_max < 10:
            raise DomainError("series_terms_max must be >= 10")
        if self.asymptotic_terms < 1:
            raise DomainError("asymptotic_terms must be >= 1")
        if not self.crossover_radius > 0:
            raise DomainError("crossover_radius must be > 0")


@dataclass(frozen=True)
class HarmonicIndex:
    l: int
    m: int

    def __post_init__(self):
        if self.l < 0 or abs(self.m) > self.l:
            raise DomainError(f"invalid harmonic index (l={self.l}, m={self.m})")

    @property
    def mu(self):
        """Laplacian eigenvalue l(l+1)."""
        return self.l * (self.l + 1)


def _check_order(nu):
    if not (0.0 < nu <= 1.0):
        raise DomainError(f"nu={nu} outside (0,1]")


# Mittag-Leffler ---------------------------------------------------------

def _ml_series(nu, x, nmax=5000):
    """Taylor series sum_n (-x)^n / Gamma(nu n + 1)."""
    if x == 0.0:
        return 1.0
    lx = math.log(x)
    terms = []
    peak = 0.0
    for n in range(nmax):
        mag = math.exp(n * lx - math.lgamma(nu * n + 1.0))
        terms.append(-mag if n % 2 else mag)
        peak = max(peak, mag)
        if n > x and mag < 1e-18 * peak:
            break
    return math.fsum(terms)


def _ml_integral(nu, x):
    """E_nu(-x) = sin(nu pi)/(nu pi) int_0^inf exp(-(ux)^(1/nu)) / (u^2 + 2u cos(nu pi) + 1) du.

    The half-line is split at u=1 and the outer part mapped by u=1/w.
    """
    c = math.cos(nu * math.pi)
    p = 1.0 / nu

    def inner(u):
        return math.exp(-(u * x) ** p) / (u * u + 2.0 * u * c + 1.0)

    def outer(w):
        return math.exp(-(x / w) ** p) / (1.0 + 2.0 * w * c + w * w)

    # exp(-(ux)^(1/nu)) < e^-40 beyond u = 40^nu / x; restrict both pieces
    cut = 40.0 ** nu
    kw = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    ua = min(1.0, cut / x)
    pts = [q for q in (1.0 / x, -c) if 0.0 < q < ua]
    a = integrate.quad(inner, 0.0, ua, points=pts or None, **kw)[0]
    b = 0.0
    wa = x / cut
    if wa < 1.0:
        pts = [q for q in (x,) if wa < q < 1.0]
        b = integrate.quad(outer, wa, 1.0, points=pts or None, **kw)[0]
    return math.sin(nu * math.pi) / (nu * math.pi) * (a + b)


def _ml_asymptotic(nu, x, kmax=60):
    """sum_{k>=1} (-1)^(k+1) x^(-k) / Gamma(1 - nu k), stopped at the smallest term."""
    total = 0.0
    prev = math.inf
    for k in range(1, kmax + 1):
        term = (-1.0) ** (k + 1) * x ** (-k) * special.rgamma(1.0 - nu * k)
        mag = abs(term)
        if mag == 0.0:
            continue
        if mag > prev:
            break
        total += term
        prev = mag
    return total


@lru_cache(maxsize=200000)
def _ml_neg(nu, x, nmax, kmax, crossover):
    if x == 0.0:
        return 1.0
    if nu == 1.0:
        return math.exp(-x)
    if x <= min(crossover, 6.0 ** nu):
        v = _ml_series(nu, x, nmax)
    elif x >= 50.0 * crossover:
        v = _ml_asymptotic(nu, x, kmax)
    else:
        v = _ml_integral(nu, x)
    return min(1.0, max(0.0, v))


def mittag_leffler(nu, z, params=None):
    """E_nu(z) for real z <= 0 and 0 < nu <= 1; z may be an array."""
    _check_order(nu)
    if params is None:
        nmax, kmax, cr = 5000, 60, 5.0
    else:
        nmax, kmax, cr = params.series_terms_max, params.asymptotic_terms, params.crossover_radius
    nu = float(nu)
    if np.ndim(z) == 0:
        z = float(z)
        if z > 0 or math.isnan(z):
            raise DomainError(f"z={z}: only z <= 0 is supported")
        return _ml_neg(nu, -z, nmax, kmax, cr)
    z = np.asarray(z, dtype=float)
    if np.any(z > 0) or np.any(np.isnan(z)):
        raise DomainError("only z <= 0 is supported")
    if nu == 1.0:
        return np.exp(z)
    out = np.empty(z.shape)
    flat = out.reshape(-1)
    for i, zi in enumerate(z.reshape(-1)):
        flat[i] = _ml_neg(nu, -float(zi), nmax, kmax, cr)
    return out


def ml_decay(nu, mu, tau):
    """E_nu(-mu tau^nu), vectorised over mu and tau."""
    mu, tau = np.broadcast_arrays(np.asarray(mu, float), np.asarray(tau, float))
    if np.any(tau < 0):
        raise DomainError("negative time lag")
    return mittag_leffler(nu, -(mu * tau ** nu))


# Legendre and spherical harmonics --------------------------------------

def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise DomainError("|x| > 1 in Legendre evaluation")
    return np.clip(x, -1.0, 1.0)


def legendre_p(l, x):
    """P_l(x) by the three-term recurrence."""
    if l < 0:
        raise DomainError("degree must be >= 0")
    x = _check_unit(x)
    p0, p1 = np.ones_like(x), x
    if l == 0:
        return p0 if p0.ndim else float(p0)
    for n in range(1, l):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
    return p1 if p1.ndim else float(p1)


def legendre_p_all(lmax, x):
    """Array of shape (lmax+1,) + x.shape with P_0..P_lmax."""
    x = _check_unit(x)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for n in range(1, lmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def ylm_table(lmax, theta, phi):
    """Complex Y_lm at many points; column l*l + l + m."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    plm = kernels.legendre_table(int(lmax), np.ascontiguousarray(np.cos(theta)))
    out = np.empty((theta.shape[0], (lmax + 1) ** 2), dtype=complex)
    for m in range(lmax + 1):
        e = np.exp(1j * m * phi)
        sgn = -1.0 if m % 2 else 1.0
        for l in range(m, lmax + 1):
            y = plm[:, kernels.lm_index(l, m)] * e
            out[:, l * l + l + m] = y
            if m:
                out[:, l * l + l - m] = sgn * np.conj(y)
    return out


def spherical_harmonic(idx, theta, phi):
    """Complex Y_lm(theta, phi) with the Condon-Shortley phase."""
    if not isinstance(idx, HarmonicIndex):
        idx = HarmonicIndex(*idx)
    l, m = idx.l, idx.m
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    th, ph = np.broadcast_arrays(th, ph)
    plm = kernels.legendre_table(l, np.ascontiguousarray(np.cos(th).reshape(-1)))
    y = plm[:, kernels.lm_index(l, abs(m))] * np.exp(1j * abs(m) * ph.reshape(-1))
    if m < 0:
        y = (-1.0) ** m * np.conj(y)
    y = y.reshape(th.shape)
    return complex(y) if y.ndim == 0 else y


# Fractional derivatives -------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _panels(edges):
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
    w = 0.5 * (b - a) * _GL_W
    return x.ravel(), w.ravel()


def _feval(f, s):
    try:
        v = np.asarray(f(s), dtype=float)
        if v.shape == s.shape:
            return v
    except (TypeError, ValueError, DomainError):
        pass
    return np.array([float(f(float(si))) for si in s])


def caputo_derivative_numeric(f, nu, t, n_quad=16):
    """Caputo derivative (1/Gamma(1-nu)) int_0^t f'(s) (t-s)^(-nu) ds.

    The interval is split at t/2. On [0, t/2] the substitution s = v^(1/nu)
    turns f'(s) ds into g'(v) dv with g(v) = f(v^(1/nu)), which is smooth for
    functions of the form F(s^nu); panels are graded geometrically towards
    v=0. On [t/2, t] the substitution u = (t-s)^(1-nu) removes the kernel
    singularity. Derivatives are centred finite differences (step t*1e-4,
    shrunk near the origin).
    """
    if not (0.0 < nu < 1.0):
        raise DomainError(f"nu={nu} outside (0,1)")
    if not t > 0:
        raise DomainError("t must be > 0")
    h = t * 1e-4

    # lower half in v = s^nu
    vmax = (0.5 * t) ** nu
    edges = vmax * np.concatenate([[0.0], 0.5 ** np.arange(n_quad - 1, -1, -1)])
    v, w = _panels(edges)
    hv = np.minimum(vmax * 1e-4, 0.5 * v)
    gp = (_feval(f, (v + hv) ** (1.0 / nu)) - _feval(f, (v - hv) ** (1.0 / nu))) / (2.0 * hv)
    lower = np.sum(w * gp * (t - v ** (1.0 / nu)) ** (-nu))

    # upper half in u = (t-s)^(1-nu)
    umax = (0.5 * t) ** (1.0 - nu)
    u, w = _panels(np.linspace(0.0, umax, n_quad + 1))
    s = t - u ** (1.0 / (1.0 - nu))
    fp = (_feval(f, s + h) - _feval(f, s - h)) / (2.0 * h)
    upper = np.sum(w * fp) / (1.0 - nu)
    return float((lower + upper) / math.gamma(1.0 - nu))


def riemann_liouville_from_caputo(caputo_value, f0, nu, t):
    """Riemann-Liouville derivative implied by a Caputo value and f(0)."""
    if not t > 0:
        raise DomainError("t must be > 0")
    return caputo_value + f0 * t ** (-nu) / math.gamma(1.0 - nu)
