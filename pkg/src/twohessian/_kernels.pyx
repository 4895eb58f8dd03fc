# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled monotone-operator kernel. Mirrors ``_kernels_py.monotone_eval``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY

cnp.import_array()


cdef inline double _sigma_bar_sorted(double x, double y, double z) noexcept nogil:
    cdef double ax = fabs(x)
    cdef double my = y if y > ax else ax
    cdef double mz = z if z > ax else ax
    return x * my + x * mz + my * mz


cdef inline void _sort3(double* v, long* k) noexcept nogil:
    # stable three-element sort of v, permuting k alongside
    cdef double tv
    cdef long tk
    if v[1] < v[0]:
        tv = v[0]; v[0] = v[1]; v[1] = tv
        tk = k[0]; k[0] = k[1]; k[1] = tk
    if v[2] < v[1]:
        tv = v[1]; v[1] = v[2]; v[2] = tv
        tk = k[1]; k[1] = k[2]; k[2] = tk
        if v[1] < v[0]:
            tv = v[0]; v[0] = v[1]; v[1] = tv
            tk = k[0]; k[0] = k[1]; k[1] = tk


def monotone_eval(const double[::1] uflat, const cnp.int64_t[::1] nodes,
                  const cnp.int64_t[::1] offsets, const double[::1] inv_scale,
                  const cnp.int64_t[:, ::1] triplets, const cnp.int64_t[::1] ntrip_allowed):
    cdef Py_ssize_t m = nodes.shape[0]
    cdef Py_ssize_t ndir = offsets.shape[0]
    cdef Py_ssize_t p, d, t, nt
    cdef cnp.int64_t node, o
    cdef double c, v, best
    cdef double s[3]
    cdef long k[3]
    cdef long bestk[3]
    cdef double bests[3]
    cdef long bestt

    vals_a = np.empty(m, dtype=np.float64)
    argmin_a = np.zeros(m, dtype=np.int64)
    sdir_a = np.empty((m, 3), dtype=np.int64)
    sd_a = np.empty((m, 3), dtype=np.float64)
    buf_a = np.empty(ndir, dtype=np.float64)
    cdef double[::1] vals = vals_a
    cdef cnp.int64_t[::1] argmin = argmin_a
    cdef cnp.int64_t[:, ::1] sdir = sdir_a
    cdef double[:, ::1] sd = sd_a
    cdef double[::1] D = buf_a

    with nogil:
        for p in range(m):
            node = nodes[p]
            c = uflat[node]
            for d in range(ndir):
                o = offsets[d]
                D[d] = (uflat[node + o] + uflat[node - o] - 2.0 * c) * inv_scale[d]
            best = INFINITY
            bestt = 0
            bestk[0] = 0; bestk[1] = 0; bestk[2] = 0
            bests[0] = 0.0; bests[1] = 0.0; bests[2] = 0.0
            nt = ntrip_allowed[p]
            for t in range(nt):
                k[0] = triplets[t, 0]; k[1] = triplets[t, 1]; k[2] = triplets[t, 2]
                s[0] = D[k[0]]; s[1] = D[k[1]]; s[2] = D[k[2]]
                _sort3(s, k)
                v = _sigma_bar_sorted(s[0], s[1], s[2])
                if v < best:
                    best = v
                    bestt = t
                    bestk[0] = k[0]; bestk[1] = k[1]; bestk[2] = k[2]
                    bests[0] = s[0]; bests[1] = s[1]; bests[2] = s[2]
            vals[p] = best
            argmin[p] = bestt
            sdir[p, 0] = bestk[0]; sdir[p, 1] = bestk[1]; sdir[p, 2] = bestk[2]
            sd[p, 0] = bests[0]; sd[p, 1] = bests[1]; sd[p, 2] = bests[2]
    return vals_a, argmin_a, sdir_a, sd_a


cdef inline double _c_of(double dxx, double dyy, double dzz, double dxy, double dxz, double dyz) noexcept nogil:
    return dxx * dyy + dxx * dzz + dyy * dzz - dxy * dxy - dxz * dxz - dyz * dyz


def naive_s2(const double[:, :, ::1] v, const cnp.uint8_t[:, :, ::1] interior, double h):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double h2 = h * h
    cdef double c, dxx, dyy, dzz, dxy, dxz, dyz
    out_a = np.zeros((n, n, n), dtype=np.float64)
    cdef double[:, :, ::1] out = out_a
    with nogil:
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                for k in range(1, n - 1):
                    if not interior[i, j, k]:
                        continue
                    c = v[i, j, k]
                    dxx = (v[i + 1, j, k] - 2.0 * c + v[i - 1, j, k]) / h2
                    dyy = (v[i, j + 1, k] - 2.0 * c + v[i, j - 1, k]) / h2
                    dzz = (v[i, j, k + 1] - 2.0 * c + v[i, j, k - 1]) / h2
                    dxy = (v[i + 1, j + 1, k] + v[i - 1, j - 1, k] - v[i - 1, j + 1, k] - v[i + 1, j - 1, k]) / (4.0 * h2)
                    dxz = (v[i + 1, j, k + 1] + v[i - 1, j, k - 1] - v[i - 1, j, k + 1] - v[i + 1, j, k - 1]) / (4.0 * h2)
                    dyz = (v[i, j + 1, k + 1] + v[i, j - 1, k - 1] - v[i, j - 1, k + 1] - v[i, j + 1, k - 1]) / (4.0 * h2)
                    out[i, j, k] = _c_of(dxx, dyy, dzz, dxy, dxz, dyz)
    return out_a


def jacobi_sweep(const double[:, :, ::1] v, const double[:, :, ::1] f,
                 const cnp.uint8_t[:, :, ::1] interior, double h):
    """Smaller-root update at every interior node; negative discriminants clamp to 0.

    Returns (new values, number clamped, flat index of first clamped node or -1,
    its discriminant).
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double h4 = h * h * h * h
    cdef double a1, a2, a3, a4, a5, a6, a7, a8, a9, pair, mixed, disc, first_disc = 0.0
    cdef long nclamped = 0
    cdef long first = -1
    out_a = np.array(v, dtype=np.float64, copy=True)
    cdef double[:, :, ::1] out = out_a
    with nogil:
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                for k in range(1, n - 1):
                    if not interior[i, j, k]:
                        continue
                    a1 = 0.5 * (v[i + 1, j, k] + v[i - 1, j, k])
                    a2 = 0.5 * (v[i, j + 1, k] + v[i, j - 1, k])
                    a3 = 0.5 * (v[i, j, k + 1] + v[i, j, k - 1])
                    a4 = 0.5 * (v[i + 1, j + 1, k] + v[i - 1, j - 1, k])
                    a5 = 0.5 * (v[i - 1, j + 1, k] + v[i + 1, j - 1, k])
                    a6 = 0.5 * (v[i + 1, j, k + 1] + v[i - 1, j, k - 1])
                    a7 = 0.5 * (v[i - 1, j, k + 1] + v[i + 1, j, k - 1])
                    a8 = 0.5 * (v[i, j + 1, k + 1] + v[i, j - 1, k - 1])
                    a9 = 0.5 * (v[i, j + 1, k - 1] + v[i, j - 1, k + 1])
                    pair = (a1 - a2) * (a1 - a2) + (a1 - a3) * (a1 - a3) + (a2 - a3) * (a2 - a3)
                    mixed = (a4 - a5) * (a4 - a5) + (a6 - a7) * (a6 - a7) + (a8 - a9) * (a8 - a9)
                    disc = 8.0 * pair + 3.0 * mixed + 12.0 * f[i, j, k] * h4
                    if disc < 0:
                        if first < 0:
                            first = (i * n + j) * n + k
                            first_disc = disc
                        nclamped += 1
                        disc = 0.0
                    out[i, j, k] = (a1 + a2 + a3) / 3.0 - sqrt(disc) / 12.0
    return out_a, nclamped, first, first_disc
