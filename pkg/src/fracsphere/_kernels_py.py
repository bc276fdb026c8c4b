"""Numpy implementations of the compiled kernels (fallback backend)."""

import numpy as np

BACKEND = "numpy"


def _kanter(nu, u, e):
    a = np.sin(nu * np.pi * u) / np.sin(np.pi * u) ** (1.0 / nu)
    return a * (np.sin((1.0 - nu) * np.pi * u) / e) ** ((1.0 - nu) / nu)


def advance_paths(nu, dtau, targets, target_steps, pos, H, k, j, L_out, pos_out,
                  U, E, G, walk):
    """Same contract as the compiled kernel; vectorised over paths."""
    nt = targets.shape[0]
    nb = G.shape[1] if walk else U.shape[1]
    scale = dtau ** (1.0 / nu)
    sig = np.sqrt(2.0 * dtau)
    fixed = nu >= 1.0
    for b in range(nb):
        act = np.flatnonzero(j < nt)
        if act.size == 0:
            break
        k[act] += 1
        if not fixed:
            H[act] += scale * _kanter(nu, U[act, b], E[act, b])
        if walk:
            p = pos[act]
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            rho = np.sqrt(x * x + y * y)
            pole = rho <= 1e-300
            rr = np.where(pole, 1.0, rho)
            e1 = np.stack([z * x / rr, z * y / rr, -rho], axis=1)
            e2 = np.stack([-y / rr, x / rr, np.zeros_like(x)], axis=1)
            if pole.any():
                e1[pole] = np.stack([np.where(z[pole] > 0, 1.0, -1.0),
                                     np.zeros(pole.sum()), np.zeros(pole.sum())], axis=1)
                e2[pole] = [0.0, 1.0, 0.0]
            v1 = sig * G[act, b, 0]
            v2 = sig * G[act, b, 1]
            r = np.sqrt(v1 * v1 + v2 * v2)
            sr = np.where(r > 0, np.sin(r) / np.where(r > 0, r, 1.0), 0.0)
            q = np.cos(r)[:, None] * p + sr[:, None] * (v1[:, None] * e1 + v2[:, None] * e2)
            moved = r > 0
            q[moved] /= np.linalg.norm(q[moved], axis=1)[:, None]
            q[~moved] = p[~moved]
            pos[act] = q
        while True:
            jj = np.minimum(j[act], nt - 1)
            if fixed:
                hit = (j[act] < nt) & (k[act] >= target_steps[jj])
            else:
                hit = (j[act] < nt) & (H[act] > targets[jj])
            if not hit.any():
                break
            rows = act[hit]
            cols = j[rows]
            L_out[rows, cols] = targets[cols] if fixed else k[rows] * dtau
            pos_out[rows, cols] = pos[rows]
            j[rows] += 1


def legendre_table(lmax, x):
    """Orthonormal associated Legendre values for m >= 0 (see compiled kernel)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros((n, (lmax + 1) * (lmax + 2) // 2))
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    pmm = np.full(n, 0.28209479177387814)
    for m in range(lmax + 1):
        if m > 0:
            pmm = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        out[:, m * (m + 1) // 2 + m] = pmm
        if m < lmax:
            out[:, (m + 1) * (m + 2) // 2 + m] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[:, l * (l + 1) // 2 + m] = a * (x * out[:, (l - 1) * l // 2 + m]
                                                - b * out[:, (l - 2) * (l - 1) // 2 + m])
    return out
