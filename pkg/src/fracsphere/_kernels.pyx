# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: operational-time path stepping and Legendre tables."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, pow, M_PI

cnp.import_array()

BACKEND = "cython"


cdef inline double kanter(double nu, double u, double e) noexcept nogil:
    cdef double a = sin(nu * M_PI * u) / pow(sin(M_PI * u), 1.0 / nu)
    cdef double b = pow(sin((1.0 - nu) * M_PI * u) / e, (1.0 - nu) / nu)
    return a * b


def advance_paths(double nu, double dtau, double[::1] targets, long[::1] target_steps,
                  double[:, ::1] pos, double[::1] H, long[::1] k, long[::1] j,
                  double[:, ::1] L_out, double[:, :, ::1] pos_out,
                  double[:, ::1] U, double[:, ::1] E, double[:, :, ::1] G,
                  bint walk):
    """Advance every path by at most U.shape[1] operational steps.

    Rows are paths. For nu < 1 the stable clock H is incremented with the
    Kanter variate and target j is recorded at the first step with
    H > targets[j] (value k*dtau). For nu == 1 the clock is deterministic and
    target j is recorded once k reaches target_steps[j] (value targets[j]).
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t nb = G.shape[1] if walk else U.shape[1]
    cdef Py_ssize_t i, b
    cdef double scale = pow(dtau, 1.0 / nu)
    cdef double sig = sqrt(2.0 * dtau)
    cdef double x, y, z, rho, e1x, e1y, e1z, e2x, e2y, v1, v2, r, sr, cr, nrm
    cdef bint fixed = nu >= 1.0
    with nogil:
        for i in range(n):
            if j[i] >= nt:
                continue
            x = pos[i, 0]
            y = pos[i, 1]
            z = pos[i, 2]
            for b in range(nb):
                k[i] += 1
                if not fixed:
                    H[i] += scale * kanter(nu, U[i, b], E[i, b])
                if walk:
                    rho = sqrt(x * x + y * y)
                    if rho > 1e-300:
                        e1x = z * x / rho
                        e1y = z * y / rho
                        e1z = -rho
                        e2x = -y / rho
                        e2y = x / rho
                    else:
                        e1x = 1.0 if z > 0 else -1.0
                        e1y = 0.0
                        e1z = 0.0
                        e2x = 0.0
                        e2y = 1.0
                    v1 = sig * G[i, b, 0]
                    v2 = sig * G[i, b, 1]
                    r = sqrt(v1 * v1 + v2 * v2)
                    if r > 0.0:
                        cr = cos(r)
                        sr = sin(r) / r
                        x = cr * x + sr * (v1 * e1x + v2 * e2x)
                        y = cr * y + sr * (v1 * e1y + v2 * e2y)
                        z = cr * z + sr * (v1 * e1z)
                        nrm = sqrt(x * x + y * y + z * z)
                        x = x / nrm
                        y = y / nrm
                        z = z / nrm
                if fixed:
                    while j[i] < nt and k[i] >= target_steps[j[i]]:
                        L_out[i, j[i]] = targets[j[i]]
                        pos_out[i, j[i], 0] = x
                        pos_out[i, j[i], 1] = y
                        pos_out[i, j[i], 2] = z
                        j[i] += 1
                else:
                    while j[i] < nt and H[i] > targets[j[i]]:
                        L_out[i, j[i]] = k[i] * dtau
                        pos_out[i, j[i], 0] = x
                        pos_out[i, j[i], 1] = y
                        pos_out[i, j[i], 2] = z
                        j[i] += 1
                if j[i] >= nt:
                    break
            pos[i, 0] = x
            pos[i, 1] = y
            pos[i, 2] = z


def legendre_table(int lmax, double[::1] x):
    """Orthonormal associated Legendre values for m >= 0.

    Column l*(l+1)//2 + m holds sqrt((2l+1)/4pi (l-m)!/(l+m)!) P_lm(x), with
    the Condon-Shortley phase.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ncol = (lmax + 1) * (lmax + 2) // 2
    out_arr = np.zeros((n, ncol), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, l, m, c, c1, c2
    cdef double xi, s, pmm, a, bb
    cdef double[::1] diag = np.empty(lmax + 1)
    cdef double[::1] sub = np.empty(lmax + 1)
    cdef double[:, ::1] alm = np.zeros((lmax + 1, lmax + 1))
    cdef double[:, ::1] blm = np.zeros((lmax + 1, lmax + 1))
    for m in range(1, lmax + 1):
        diag[m] = -sqrt((2.0 * m + 1.0) / (2.0 * m))
    for m in range(lmax + 1):
        sub[m] = sqrt(2.0 * m + 3.0)
        for l in range(m + 2, lmax + 1):
            alm[l, m] = sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            blm[l, m] = sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0))
    with nogil:
        for i in range(n):
            xi = x[i]
            s = sqrt(max(0.0, 1.0 - xi * xi))
            pmm = 0.28209479177387814
            for m in range(lmax + 1):
                if m > 0:
                    pmm = diag[m] * s * pmm
                c = m * (m + 1) // 2 + m
                out[i, c] = pmm
                if m < lmax:
                    out[i, (m + 1) * (m + 2) // 2 + m] = sub[m] * xi * pmm
                for l in range(m + 2, lmax + 1):
                    c = l * (l + 1) // 2 + m
                    c1 = (l - 1) * l // 2 + m
                    c2 = (l - 2) * (l - 1) // 2 + m
                    out[i, c] = alm[l, m] * (xi * out[i, c1] - blm[l, m] * out[i, c2])
    return out_arr
