"""Isotropic Gaussian fields on S^2, the time-changed field T(X_t) and the
closed-form covariances."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .diffusion import FOUR_PI, decay_table
from .errors import ArgumentError, ConsistencyError, DomainError
from .rng import as_generator
from .specfun import legendre_p, legendre_p_all, mittag_leffler, ylm_table
from .sphgeom import SpherePoint, inner_product


@dataclass(frozen=True)
class PowerSpectrum:
    """C_0..C_L. Parametric families C_l = A (l+1)^-alpha keep their tag so a
    tail bound beyond L can be reported."""

    c: np.ndarray = field(repr=False)
    alpha: float | None = None
    amplitude: float | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        if c.size == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
            raise DomainError("power spectrum must be a nonempty nonnegative sequence")
        object.__setattr__(self, "c", c)

    @classmethod
    def parametric(cls, alpha=3.0, amplitude=1.0, lmax=None, rel_tail=1e-6, lmax_cap=10**6):
        """A (l+1)^-alpha; without lmax, the smallest L whose tail bound is
        below rel_tail of the partial variance (capped at lmax_cap)."""
        if amplitude < 0:
            raise DomainError("amplitude must be >= 0")
        if lmax is None:
            if alpha <= 2:
                raise DomainError("alpha must exceed 2 for automatic truncation")
            L = 8
            while L < lmax_cap:
                s = cls(amplitude * (np.arange(L + 1) + 1.0) ** -alpha, alpha, amplitude)
                if s.tail_bound() <= rel_tail * s.variance():
                    break
                L *= 2
            lo, hi = L // 2, min(L, lmax_cap)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                s = cls(amplitude * (np.arange(mid + 1) + 1.0) ** -alpha, alpha, amplitude)
                if s.tail_bound() <= rel_tail * s.variance():
                    hi = mid
                else:
                    lo = mid
            lmax = hi
        ls = np.arange(int(lmax) + 1, dtype=float)
        return cls(amplitude * (ls + 1.0) ** -alpha, alpha, amplitude)

    @property
    def lmax(self):
        return self.c.size - 1

    def truncated(self, lmax):
        return PowerSpectrum(self.c[:lmax + 1], self.alpha, self.amplitude)

    def weights(self):
        """(2l+1)/(4pi) C_l."""
        ls = np.arange(self.c.size)
        return (2 * ls + 1) / FOUR_PI * self.c

    def variance(self):
        return float(np.sum(self.weights()))

    def tail_bound(self):
        """Upper bound of sum_{l>L} (2l+1)/(4pi) C_l for the parametric tag
        (0 for an explicit, band-limited spectrum)."""
        if self.alpha is None:
            return 0.0
        if self.alpha <= 2:
            return math.inf
        L = self.lmax
        return self.amplitude / FOUR_PI * 2.0 * (L + 1.0) ** (2.0 - self.alpha) / (self.alpha - 2.0)


@dataclass
class HarmonicCoefficients:
    """a_lm stored flat at index l*l + l + m."""

    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex).ravel()
        L = int(round(math.sqrt(a.size))) - 1
        if (L + 1) ** 2 != a.size:
            raise ArgumentError("coefficient array length must be (L+1)^2")
        self.a = a

    @property
    def lmax(self):
        return int(round(math.sqrt(self.a.size))) - 1

    def get(self, l, m):
        return self.a[l * l + l + m]

    @classmethod
    def zeros(cls, lmax):
        return cls(np.zeros((lmax + 1) ** 2, dtype=complex))

    def symmetry_defect(self):
        """max |a_{l,-m} - (-1)^m conj(a_lm)| and max |Im a_l0|."""
        d = 0.0
        for l in range(self.lmax + 1):
            d = max(d, abs(self.get(l, 0).imag))
            for m in range(1, l + 1):
                d = max(d, abs(self.get(l, -m) - (-1) ** m * np.conj(self.get(l, m))))
        return d


def _check_spectrum(spectrum):
    if not isinstance(spectrum, PowerSpectrum):
        spectrum = PowerSpectrum(spectrum)
    return spectrum


def standard_normals(lmax, rng, size):
    return as_generator(rng).standard_normal((size, (lmax + 1) ** 2))


def coefficients_from_normals(spectrum, G):
    """Complex a_lm from a real standard-normal layout (one per degree of
    freedom): column l*l+l holds a_l0, columns l*l+l+m and l*l+l-m hold the
    real and imaginary parts of a_lm (m > 0)."""
    L = spectrum.lmax
    G = np.atleast_2d(G)
    a = np.zeros(G.shape, dtype=complex)
    for l in range(L + 1):
        s = math.sqrt(spectrum.c[l])
        a[:, l * l + l] = s * G[:, l * l + l]
        for m in range(1, l + 1):
            z = math.sqrt(0.5 * spectrum.c[l]) * (G[:, l * l + l + m] + 1j * G[:, l * l + l - m])
            a[:, l * l + l + m] = z
            a[:, l * l + l - m] = (-1) ** m * np.conj(z)
    return a


def sample_coefficients(spectrum, rng, size=None):
    """Gaussian a_lm with E|a_lm|^2 = C_l and the reality symmetry built in."""
    spectrum = _check_spectrum(spectrum)
    G = standard_normals(spectrum.lmax, rng, 1 if size is None else size)
    a = coefficients_from_normals(spectrum, G)
    if size is None:
        return HarmonicCoefficients(a[0])
    return a


def real_basis(spectrum, theta, phi):
    """Rows B(x) such that T(x) = G . B(x) for the normal layout above."""
    L = spectrum.lmax
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    plm = kernels.legendre_table(L, np.ascontiguousarray(np.cos(theta)))
    B = np.empty((theta.size, (L + 1) ** 2))
    sq = np.sqrt(spectrum.c)
    for m in range(L + 1):
        if m:
            cm, sm = np.cos(m * phi), np.sin(m * phi)
        for l in range(m, L + 1):
            p = plm[:, kernels.lm_index(l, m)]
            if m == 0:
                B[:, l * l + l] = sq[l] * p
            else:
                f = math.sqrt(2.0) * sq[l] * p
                B[:, l * l + l + m] = f * cm
                B[:, l * l + l - m] = -f * sm
    return B


def evaluate_field(coeffs, x, phi=None):
    """sum a_lm Y_lm at a SpherePoint (or at arrays theta=x, phi)."""
    if isinstance(x, SpherePoint):
        theta, ph = np.array([x.theta]), np.array([x.phi])
    else:
        theta, ph = np.atleast_1d(x), np.atleast_1d(phi)
    Y = ylm_table(coeffs.lmax, theta, ph)
    v = Y @ coeffs.a
    scale = max(1.0, float(np.max(np.abs(coeffs.a))) if coeffs.a.size else 1.0)
    if np.max(np.abs(v.imag)) > 1e-8 * scale:
        raise ConsistencyError("imaginary residual: coefficients violate a_{l,-m} = (-1)^m a*_lm")
    out = v.real
    return float(out[0]) if isinstance(x, SpherePoint) else out


def field_covariance_static(spectrum, x, y, l_max=None):
    spectrum = _check_spectrum(spectrum)
    L = spectrum.lmax if l_max is None else min(l_max, spectrum.lmax)
    P = legendre_p_all(L, inner_product(x, y))
    return float(np.dot(spectrum.weights()[:L + 1], P))


def evaluate_time_changed_field(coeffs, trd_path, t):
    return evaluate_field(coeffs, trd_path.at(t))


# covariance formulas ----------------------------------------------------

@dataclass(frozen=True)
class CovarianceQuery:
    nu: float
    t0: float
    t1: float
    t2: float
    x: SpherePoint
    y: SpherePoint
    spectrum: PowerSpectrum
    l_max: int | None = None

    def __post_init__(self):
        if not (0.0 < self.nu <= 1.0):
            raise DomainError(f"nu={self.nu} outside (0,1]")
        if not (self.t0 <= self.t1 <= self.t2):
            raise ArgumentError("require t0 <= t1 <= t2")

    @property
    def lmax(self):
        L = self.spectrum.lmax
        return L if self.l_max is None else min(self.l_max, L)

    def weights(self):
        return self.spectrum.weights()[:self.lmax + 1]


def cov_same_point(query):
    """E[T(x) T(X^x_{t1})] = sum (2l+1)/(4pi) C_l E_nu(-mu_l (t1-t0)^nu)."""
    E = decay_table(query.nu, query.lmax, query.t1 - query.t0)
    return float(np.dot(query.weights(), E))


def cov_two_points(query):
    """E[T(X^x_{t1}) T(X^y_{t2})] with independent drivers (x != y)."""
    if inner_product(query.x, query.y) >= 1.0 - 1e-15:
        raise ArgumentError("x = y: use cov_same_point")
    L = query.lmax
    E1 = decay_table(query.nu, L, query.t1 - query.t0)
    E2 = decay_table(query.nu, L, query.t2 - query.t0)
    P = legendre_p_all(L, inner_product(query.x, query.y))
    return float(np.dot(query.weights() * E1 * E2, P))


def cov_markov_lag(spectrum, t1, t2, l_max=None):
    """nu = 1 same-point covariance sum (2l+1)/(4pi) C_l exp(-mu_l (t2-t1))."""
    if t2 < t1:
        raise ArgumentError("require t1 <= t2")
    spectrum = _check_spectrum(spectrum)
    L = spectrum.lmax if l_max is None else min(l_max, spectrum.lmax)
    ls = np.arange(L + 1)
    return float(np.dot(spectrum.weights()[:L + 1], np.exp(-ls * (ls + 1.0) * (t2 - t1))))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _gl_edges(e):
    """16-point Gauss-Legendre on each panel [e_i, e_{i+1}]."""
    e = np.asarray(e, dtype=float)
    lo, hi = e[:-1, None], e[1:, None]
    return (0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)).ravel(), (0.5 * (hi - lo) * _GL_W).ravel()


def fractional_lag_bracket(nu, mu_l, T1, T2, quad_n=64):
    """E_nu(-mu T2^nu) + mu nu T2^nu / Gamma(1+nu) int_0^{T1/T2} E_nu(-mu T2^nu (1-z)^nu) z^(nu-1) dz.

    This equals E exp(-mu (L_{t2} - L_{t1})). The z-integral is split at
    min(T1/T2, 1/2). On the lower piece u = z^nu removes z^(nu-1); the upper
    piece is integrated in s = 1-z on panels graded geometrically towards
    s = 1 - T1/T2, which resolves the (1-z)^nu endpoint and the boundary
    layer of width (mu T2^nu)^(-1/nu). quad_n sets the node count per piece.
    """
    if not (0 < T1 <= T2):
        raise ArgumentError("require 0 < T1 <= T2")
    if mu_l == 0:
        return 1.0
    a = mu_l * T2 ** nu
    r = T1 / T2
    zc = min(r, 0.5)
    npan = max(1, -(-quad_n // 16))
    u, wu = _gl_edges(np.linspace(0.0, zc ** nu, npan + 1))
    z = u ** (1.0 / nu)
    integ = np.dot(wu, mittag_leffler(nu, -a * (1.0 - z) ** nu)) / nu
    if r > 0.5:
        s_lo = 1.0 - r
        edges = [0.5]
        floor = max(s_lo, 1e-14)
        while edges[-1] * 0.25 > floor:
            edges.append(edges[-1] * 0.25)
        edges.append(s_lo)
        e = np.array(edges[::-1])
        s_nodes, ws = _gl_edges(e)
        f = mittag_leffler(nu, -a * s_nodes ** nu) * (1.0 - s_nodes) ** (nu - 1.0)
        integ += np.dot(ws, f)
    return float(mittag_leffler(nu, -a) + a * nu / math.gamma(1.0 + nu) * integ)


def cov_fractional_lag_integral(spectrum, nu, T1, T2, l_max=None, quad_n=64):
    """Same-point covariance of T(X_{t1}) and T(X_{t2}) with a shared driver,
    in the integral form over the inverse-subordinator law."""
    if not (0 < T1 <= T2):
        raise ArgumentError("require 0 < T1 <= T2")
    if not (0.0 < nu <= 1.0):
        raise DomainError(f"nu={nu} outside (0,1]")
    spectrum = _check_spectrum(spectrum)
    L = spectrum.lmax if l_max is None else min(l_max, spectrum.lmax)
    w = spectrum.weights()[:L + 1]
    tot = 0.0
    for l in range(L + 1):
        if w[l] == 0.0:
            continue
        if nu == 1.0:
            b = math.exp(-l * (l + 1.0) * (T2 - T1))
        else:
            b = fractional_lag_bracket(nu, l * (l + 1.0), T1, T2, quad_n)
        tot += w[l] * b
    return float(tot)


def frequency_component_cov(l, nu, t0, t1, t2, x, y, spectrum):
    spectrum = _check_spectrum(spectrum)
    if not (t0 <= t1 <= t2):
        raise ArgumentError("require t0 <= t1 <= t2")
    m = l * (l + 1.0)
    e1 = mittag_leffler(nu, -m * (t1 - t0) ** nu)
    e2 = mittag_leffler(nu, -m * (t2 - t0) ** nu)
    c = spectrum.c[l] if l <= spectrum.lmax else 0.0
    return (2 * l + 1) / FOUR_PI * c * e1 * e2 * legendre_p(l, inner_product(x, y))


def trd_equilibrium_cov(nu, h, l_max_unused=None):
    """(1/3) E_nu(-2 h^nu)."""
    if h < 0:
        raise DomainError("h must be >= 0")
    return mittag_leffler(nu, -2.0 * h ** nu) / 3.0


@dataclass(frozen=True)
class SobolevResult:
    value: float
    tail: float
    converged: bool


def sobolev_norm(a_l, s, tol=1e-4):
    """Partial sum of (2l+1)^(2s) A_l with a tail estimate.

    The tail is extrapolated from the last decade of terms by a power-law
    fit; a fitted exponent >= -1 (harmonic-type or slower) means the series
    does not converge, which is reported through `converged`.
    """
    if s < 0:
        raise DomainError("s must be >= 0")
    a = np.asarray(a_l.c if isinstance(a_l, PowerSpectrum) else a_l, dtype=float)
    ls = np.arange(a.size)
    terms = (2.0 * ls + 1.0) ** (2.0 * s) * a
    value = float(math.fsum(terms))
    L = a.size - 1
    if L < 20 or not np.any(terms[L // 2:] > 0):
        return SobolevResult(value, 0.0, True)
    lo = max(1, L // 10)
    sel = np.arange(lo, L + 1)
    sel = sel[terms[sel] > 0]
    if sel.size < 2:
        return SobolevResult(value, 0.0, True)
    p, c = np.polyfit(np.log(sel), np.log(terms[sel]), 1)
    if p >= -1.0:
        return SobolevResult(value, math.inf, False)
    tail = math.exp(c) * (L + 0.5) ** (p + 1.0) / (-(p + 1.0))
    return SobolevResult(value, tail, tail <= tol * max(value, 1e-300) or tail < tol)
