"""Stable subordinator and its inverse: samplers and the joint path engine.

The path engine steps an operational clock tau = k*dtau. For nu < 1 the
stable clock H(tau) grows by independent Kanter variates; the inverse at real
time t is the first grid value with H > t (so it overshoots by at most dtau).
Optionally a geodesic random walk runs on the same operational grid, which
gives the time-changed sphere diffusion B(L_t) with the driver and clock
jointly consistent.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ArgumentError, DomainError
from .rng import as_generator, open_uniform, substream


@dataclass(frozen=True)
class StableParams:
    nu: float
    seed: int = 0
    grid_dt: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.nu < 1.0):
            raise DomainError(f"nu={self.nu} outside (0,1)")
        if not self.grid_dt > 0:
            raise DomainError("grid_dt must be > 0")


@dataclass(frozen=True)
class InversePath:
    t_grid: np.ndarray
    l_values: np.ndarray

    def __post_init__(self):
        if self.t_grid.shape != self.l_values.shape:
            raise ArgumentError("t_grid and l_values differ in length")
        if self.l_values.size and (self.l_values[0] < 0 or np.any(np.diff(self.l_values) < 0)):
            raise ArgumentError("inverse path must be nonnegative and nondecreasing")


def kanter_variate(nu, u, e):
    """Standard positive stable variate with E exp(-sX) = exp(-s^nu)."""
    a = np.sin(nu * np.pi * u) / np.sin(np.pi * u) ** (1.0 / nu)
    return a * (np.sin((1.0 - nu) * np.pi * u) / e) ** ((1.0 - nu) / nu)


def sample_stable_increment(nu, dt, rng, size=None):
    """Increment of the stable subordinator over a duration dt."""
    if not (0.0 < nu < 1.0):
        raise DomainError(f"nu={nu} outside (0,1)")
    if not dt > 0:
        raise DomainError("dt must be > 0")
    rng = as_generator(rng)
    n = 1 if size is None else size
    u = open_uniform(rng, n)
    e = rng.standard_exponential(n)
    x = dt ** (1.0 / nu) * kanter_variate(nu, u, e)
    return float(x[0]) if size is None else x


def sample_inverse_marginal(nu, t, rng, size=None):
    """Exact draw of the inverse subordinator at time t: (t / H_1)^nu."""
    if not t > 0:
        raise DomainError("t must be > 0")
    h = sample_stable_increment(nu, 1.0, rng, size=size)
    return (t / h) ** nu


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        raise ArgumentError("empty time grid")
    if np.any(np.diff(t) <= 0):
        raise ArgumentError("time grid must be strictly increasing")
    if t[0] < 0:
        raise ArgumentError("time grid must be nonnegative")
    return t


def run_operational(nu, targets, n_paths, dtau, rng, x0=None, walk=True,
                    block=256, chunk=4096):
    """Joint simulation of the inverse clock and (optionally) the sphere walk.

    targets are elapsed real times (>= 0, increasing). Returns (L, pos) with
    L of shape (n_paths, n_t) and pos of shape (n_paths, n_t, 3) (None when
    walk is False). Random numbers are drawn from rng in blocks per chunk of
    paths, independently of the kernel backend.
    """
    targets = _check_grid(targets)
    nt = targets.size
    if not dtau > 0:
        raise ArgumentError("operational step must be > 0")
    fixed = nu >= 1.0
    L = np.zeros((n_paths, nt))
    pos = np.zeros((n_paths, nt, 3)) if walk else None
    if x0 is None:
        x0 = np.array([0.0, 0.0, 1.0])
    x0 = np.asarray(x0, dtype=float)
    steps = np.rint(targets / dtau).astype(np.int64)
    nzero = int(np.sum(targets <= 0.0))
    if fixed and not walk:
        L[:] = targets
        return L, pos
    for c0 in range(0, n_paths, chunk):
        n = min(chunk, n_paths - c0)
        p = np.zeros((n, 3))
        p[:] = x0 if x0.ndim == 1 else x0[c0:c0 + n]
        H = np.zeros(n)
        k = np.zeros(n, dtype=np.int64)
        j = np.full(n, nzero, dtype=np.int64)
        Lc = np.zeros((n, nt))
        Pc = np.zeros((n, nt, 3))
        if nzero:
            Lc[:, :nzero] = 0.0
            Pc[:, :nzero] = p[:, None, :]
        if fixed:
            # records at integer step counts; zero-step targets already filled
            j[:] = int(np.sum(steps <= 0))
            Pc[:, :j[0]] = p[:, None, :]
            Lc[:, :j[0]] = targets[:j[0]]
        active = np.flatnonzero(j < nt)
        while active.size:
            m = active.size
            if fixed:
                U = np.zeros((m, 0))
                E = np.zeros((m, 0))
            else:
                U = open_uniform(rng, (m, block))
                E = rng.standard_exponential((m, block))
            if walk:
                G = rng.standard_normal((m, block, 2))
            else:
                G = np.zeros((m, 0, 2))
            ps, Hs, ks, js = p[active], H[active], k[active], j[active]
            Ls, Pw = Lc[active], Pc[active]
            kernels.advance_paths(float(nu), float(dtau), targets, steps, ps, Hs, ks, js,
                                  Ls, Pw, U, E, G, bool(walk))
            p[active], H[active], k[active], j[active] = ps, Hs, ks, js
            Lc[active], Pc[active] = Ls, Pw
            active = active[js < nt]
        L[c0:c0 + n] = Lc
        if walk:
            pos[c0:c0 + n] = Pc
    return L, pos


def sample_inverse_path(params, t_grid, rng=None):
    """One inverse-subordinator path on t_grid by grid inversion."""
    t = _check_grid(t_grid)
    if t[0] <= 0:
        raise ArgumentError("time grid must be positive")
    rng = substream(params.seed, "inverse-path") if rng is None else as_generator(rng)
    L, _ = run_operational(params.nu, t, 1, params.grid_dt, rng, walk=False)
    return InversePath(t, L[0])


def sample_inverse_paths(params, t_grid, n_paths, rng=None):
    """Array (n_paths, len(t_grid)) of inverse-subordinator paths."""
    t = _check_grid(t_grid)
    rng = substream(params.seed, "inverse-paths") if rng is None else as_generator(rng)
    L, _ = run_operational(params.nu, t, n_paths, params.grid_dt, rng, walk=False)
    return L


def inverse_mean(nu, t):
    """E L_t = t^nu / Gamma(1 + nu)."""
    return t ** nu / math.gamma(1.0 + nu)
