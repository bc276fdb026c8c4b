"""Sphere Brownian motion, the time-changed rotational diffusion (TRD) and
the transition density series."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import wigner
from .errors import ArgumentError, DomainError
from .rng import as_generator, substream
from .specfun import legendre_p_all, mittag_leffler, spherical_harmonic
from .sphgeom import SpherePoint, inner_product, vector_to_angles
from .subordinate import StableParams, _check_grid, run_operational

FOUR_PI = 4.0 * math.pi
L_CAP = 2000
MIN_LAG_DELTA = 1e-3


def mu(l):
    return l * (l + 1.0)


@dataclass(frozen=True)
class DensityParams:
    """Series parameters. r_coeffs=None means R_l = 1 (delta initial datum);
    l_max=None selects the truncation adaptively."""

    nu: float
    l_max: int | None = None
    r_coeffs: tuple | None = None
    t0: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.nu <= 1.0):
            raise DomainError(f"nu={self.nu} outside (0,1]")
        if self.l_max is not None and self.l_max < 0:
            raise DomainError("l_max must be >= 0")
        if self.r_coeffs is not None:
            r = tuple(float(v) for v in self.r_coeffs)
            if not r or abs(r[0] - 1.0) > 1e-12:
                raise DomainError("R_0 must equal 1")
            object.__setattr__(self, "r_coeffs", r)

    @property
    def is_delta(self):
        return self.r_coeffs is None

    def r(self, lmax):
        """R_0..R_lmax (zero beyond the supplied sequence)."""
        out = np.zeros(lmax + 1)
        if self.r_coeffs is None:
            out[:] = 1.0
        else:
            n = min(lmax + 1, len(self.r_coeffs))
            out[:n] = self.r_coeffs[:n]
        return out


@dataclass
class TrdPath:
    """One TRD realisation: points at t_grid plus operational times."""

    t_grid: np.ndarray
    points: list
    nu: float
    seed: int | None = None
    op_times: np.ndarray = field(default=None, repr=False)

    def at(self, t):
        idx = np.flatnonzero(np.isclose(self.t_grid, t, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise ArgumentError(f"t={t} is not on the path grid")
        return self.points[int(idx[0])]


@dataclass
class PathEnsemble:
    """Many paths: vectors has shape (n_paths, n_t, 3)."""

    t_grid: np.ndarray
    vectors: np.ndarray
    op_times: np.ndarray
    nu: float

    @property
    def cos_theta(self):
        return self.vectors[..., 2]

    def angles(self):
        return vector_to_angles(self.vectors)


def _start_vector(x0):
    if isinstance(x0, SpherePoint):
        return x0.vector
    return np.asarray(x0, dtype=float)


def _step(params, dt):
    if dt is not None:
        return float(dt)
    if params is not None:
        return float(params.grid_dt)
    return 1e-3


def simulate_sphere_bm(x0, t_grid, dt_internal, rng, n_paths=None):
    """Geodesic random walk with tangent Gaussian steps of variance 2*dt.

    Returns a list of SpherePoints (n_paths=None) or a PathEnsemble.
    """
    if not dt_internal > 0:
        raise ArgumentError("dt_internal must be > 0")
    t = _check_grid(t_grid)
    rng = as_generator(rng)
    n = 1 if n_paths is None else int(n_paths)
    L, pos = run_operational(1.0, t, n, dt_internal, rng, x0=_start_vector(x0), walk=True)
    if n_paths is None:
        return [SpherePoint.from_vector(v) for v in pos[0]]
    return PathEnsemble(t, pos, L, 1.0)


def simulate_trd(x0, nu, t_grid, params=None, rng=None, t0=0.0, dt=None, n_paths=None):
    """Time-changed rotational diffusion started at x0 at time t0.

    One walk and one stable clock share the operational grid (step
    params.grid_dt, or dt); the walk is read at the inverse clock. For nu=1
    the plain sphere walk is returned.
    """
    if not (0.0 < nu <= 1.0):
        raise DomainError(f"nu={nu} outside (0,1]")
    if params is not None and nu < 1.0 and abs(params.nu - nu) > 0:
        raise ArgumentError("params.nu differs from nu")
    t = _check_grid(np.asarray(t_grid, dtype=float))
    if t[0] < t0:
        raise ArgumentError("time grid starts before t0")
    seed = params.seed if params is not None else None
    if rng is None:
        rng = substream(0 if seed is None else seed, "trd")
    rng = as_generator(rng)
    n = 1 if n_paths is None else int(n_paths)
    L, pos = run_operational(nu, t - t0, n, _step(params, dt), rng, x0=_start_vector(x0), walk=True)
    if n_paths is None:
        return TrdPath(t, [SpherePoint.from_vector(v) for v in pos[0]], nu, seed, L[0])
    return PathEnsemble(t, pos, L, nu)


# analytic side ---------------------------------------------------------

def decay_table(nu, lmax, tau):
    """E_nu(-mu_l tau^nu) for l = 0..lmax."""
    if tau < 0:
        raise DomainError("negative elapsed time")
    ls = np.arange(lmax + 1, dtype=float)
    return np.asarray(mittag_leffler(nu, -(ls * (ls + 1.0)) * tau ** nu), dtype=float)


def density_lmax(nu, tau, r=None, tol=1e-8, cap=L_CAP):
    """Adaptive truncation for the density series.

    Returns (l_max, tail) where tail is the bound
    ((2L+1)/4pi) sup R E_nu(-mu_L tau^nu) times a geometric factor (ratio of
    the last two terms, or 1 when decay is sub-geometric, in which case the
    value is the size of the last retained term). The search stops at cap.
    """
    rmax = 1.0 if r is None else float(np.max(np.abs(r)))
    nr = None if r is None else len(r) - 1
    prev = None
    L = 1
    while True:
        term = (2 * L + 1) / FOUR_PI * rmax * mittag_leffler(nu, -mu(L) * tau ** nu)
        ratio = 1.0 if prev is None or prev == 0 else term / prev
        geom = 1.0 / (1.0 - ratio) if ratio < 0.9 else 1.0
        if nr is not None and L >= nr:
            return nr, 0.0
        if term * geom < tol or L >= cap:
            return min(L, cap), term * geom
        prev = term
        L = L + 1 if L < 64 else min(cap, int(L * 1.25))


def _resolve_lmax(params, tau):
    if params.l_max is not None:
        lmax = params.l_max
        if params.r_coeffs is not None:
            lmax = min(lmax, len(params.r_coeffs) - 1)
        return lmax, None
    if params.is_delta and params.nu < 1.0 and tau < MIN_LAG_DELTA:
        raise DomainError(
            f"t - t0 = {tau:g} < {MIN_LAG_DELTA:g} with a delta initial datum and nu<1: "
            "the series coefficients decay like l^-1 and cannot be truncated reliably")
    return density_lmax(params.nu, tau, None if params.is_delta else params.r(len(params.r_coeffs) - 1))


def density_coefficients(params, t):
    """((2l+1)/4pi) R_l E_nu(-mu_l (t-t0)^nu) and the truncation tail."""
    tau = t - params.t0
    if not tau > 0:
        raise DomainError("t must exceed t0")
    lmax, tail = _resolve_lmax(params, tau)
    ls = np.arange(lmax + 1)
    c = (2 * ls + 1) / FOUR_PI * params.r(lmax) * decay_table(params.nu, lmax, tau)
    return c, tail


def transition_density(x, t, x0, params):
    """Series density u_nu(x, t; x0, t0); x may be a SpherePoint or an array
    of unit vectors (..., 3)."""
    c, _ = density_coefficients(params, t)
    if isinstance(x, SpherePoint):
        return float(np.dot(c, legendre_p_all(len(c) - 1, inner_product(x, x0))))
    cosd = np.clip(np.asarray(x, dtype=float) @ _start_vector(x0), -1.0, 1.0)
    return np.tensordot(c, legendre_p_all(len(c) - 1, cosd), axes=(0, 0))


def marginal_cos_cdf(nu, tau, c, lmax, r=None):
    """CDF of <X_t, x0> for the TRD: (c+1)/2 + sum_l R_l E_l (P_{l+1}-P_{l-1})/2."""
    c = np.asarray(c, dtype=float)
    E = decay_table(nu, lmax + 1, tau)
    R = np.ones(lmax + 2) if r is None else np.pad(np.asarray(r, float), (0, lmax + 2))[:lmax + 2]
    P = legendre_p_all(lmax + 1, c)
    out = 0.5 * (c + 1.0)
    for l in range(1, lmax + 1):
        out = out + 0.5 * R[l] * E[l] * (P[l + 1] - P[l - 1])
    return out


def sample_marginal_cos(nu, tau, n, rng, lmax=400, n_grid=20001):
    """Inverse-CDF draws of <X_t, x0> from the series law."""
    c = np.linspace(-1.0, 1.0, n_grid)
    F = np.maximum.accumulate(np.clip(marginal_cos_cdf(nu, tau, c, lmax), 0.0, 1.0))
    u = as_generator(rng).random(n)
    return np.interp(u, F, c)


def solution_angular_spectrum(l, t, params, al_u0):
    tau = t - params.t0
    if not tau > 0:
        raise DomainError("t must exceed t0")
    e = mittag_leffler(params.nu, -mu(l) * tau ** params.nu)
    return e * e * al_u0


def chapman_kolmogorov_defect(nu, t0, t1, t2, x0, x2, params):
    """u(x2,t2;x0,t0) minus the two-step composition through time t1."""
    if not (t0 < t1 < t2):
        raise ArgumentError("require t0 < t1 < t2")
    p = DensityParams(nu, params.l_max, params.r_coeffs, t0)
    lmax, _ = _resolve_lmax(p, min(t1 - t0, t2 - t1))
    R = p.r(lmax)
    ls = np.arange(lmax + 1)
    w = (2 * ls + 1) / FOUR_PI
    P = legendre_p_all(lmax, inner_product(x2, x0))
    direct = w * R * decay_table(nu, lmax, t2 - t0)
    comp = w * R * R * decay_table(nu, lmax, t2 - t1) * decay_table(nu, lmax, t1 - t0)
    return float(np.dot(direct - comp, P))


def expected_harmonic(l, m, x, tau, nu):
    """E Y_lm(X_t) for the TRD from x after elapsed time tau."""
    return mittag_leffler(nu, -mu(l) * tau ** nu) * spherical_harmonic((l, m), x.theta, x.phi)


def expected_harmonic_sq(l, m, x, tau, nu):
    """E |Y_lm(X_t)|^2 as the 3j series over gamma <= 2l, kappa."""
    tot = 0.0 + 0.0j
    for g in range(0, 2 * l + 1):
        a = wigner.wigner_3j((g, l, l, 0, 0, 0))
        if a == 0.0:
            continue
        e = mittag_leffler(nu, -mu(g) * tau ** nu)
        for k in range(-g, g + 1):
            b = wigner.wigner_3j((g, l, l, k, m, -m))
            if b == 0.0:
                continue
            y = np.conj(spherical_harmonic((g, k), x.theta, x.phi))
            tot += (-1) ** (m % 2) * (2 * l + 1) * math.sqrt((2 * g + 1) / FOUR_PI) * a * b * e * y
    return float(tot.real)


def walk_decay(l, dt, n_quad=60):
    """phi_l(dt) = E P_l(cos r) for one walk step (r Rayleigh, sigma^2 = 2 dt)."""
    s2 = 2.0 * dt
    # r = sqrt(2 s2 w), w ~ Exp(1); Gauss-Laguerre in w
    w, wt = np.polynomial.laguerre.laggauss(n_quad)
    r = np.sqrt(2.0 * s2 * w)
    return float(np.dot(wt, legendre_p_all(l, np.cos(r))[l]))
