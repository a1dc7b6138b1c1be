# cython: language_level=3
"""Compiled hot loops: trapezoidal time stepping and VVI quadrature."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef inline void _lu_solve(
    const double[::1] l_data, const int[::1] l_ind, const int[::1] l_ptr, const int[::1] l_diag,
    const double[::1] u_data, const int[::1] u_ind, const int[::1] u_ptr, const int[::1] u_diag,
    const int[::1] perm_r, const int[::1] perm_c,
    double[::1] rhs, double[::1] work, double[::1] x) noexcept nogil:
    cdef Py_ssize_t n = rhs.shape[0]
    cdef Py_ssize_t i, j, p
    cdef double yj
    for i in range(n):
        work[perm_r[i]] = rhs[i]
    for j in range(n):
        yj = work[j] / l_data[l_diag[j]]
        work[j] = yj
        if yj != 0.0:
            for p in range(l_ptr[j], l_ptr[j + 1]):
                if l_ind[p] > j:
                    work[l_ind[p]] -= l_data[p] * yj
    for j in range(n - 1, -1, -1):
        yj = work[j] / u_data[u_diag[j]]
        work[j] = yj
        if yj != 0.0:
            for p in range(u_ptr[j], u_ptr[j + 1]):
                if u_ind[p] < j:
                    work[u_ind[p]] -= u_data[p] * yj
    for i in range(n):
        x[i] = work[perm_c[i]]


def march(
    const double[::1] l_data, const int[::1] l_ind, const int[::1] l_ptr, const int[::1] l_diag,
    const double[::1] u_data, const int[::1] u_ind, const int[::1] u_ptr, const int[::1] u_diag,
    const int[::1] perm_r, const int[::1] perm_c,
    const int[::1] br_a, const int[::1] br_b,
    const double[::1] g, const double[::1] ca, const double[::1] cb,
    const double[::1] cc, const double[::1] cd,
    double[::1] i_state, double[::1] s_state, const double[::1] x0,
    const double[::1] const_rhs, const int[::1] src_unknown,
    const double[:, ::1] src_values, const int[::1] monitored, double[:, ::1] out,
):
    """Run all trapezoidal steps; returns -1 or the first non-finite step."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t nb = br_a.shape[0]
    cdef Py_ssize_t ns = src_unknown.shape[0]
    cdef Py_ssize_t nm = monitored.shape[0]
    cdef Py_ssize_t n_steps = src_values.shape[0] - 1
    cdef Py_ssize_t step, k, m
    cdef double va, vb, v1, i1
    cdef int a, b, bad = -1
    x_arr = np.array(x0, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] rhs = np.empty(n, dtype=np.float64)
    cdef double[::1] work = np.empty(n, dtype=np.float64)
    cdef double[::1] jh = np.empty(nb, dtype=np.float64)

    with nogil:
        for m in range(nm):
            out[0, m] = x[monitored[m]]
        for step in range(n_steps):
            for k in range(n):
                rhs[k] = const_rhs[k]
            for k in range(nb):
                a = br_a[k]
                b = br_b[k]
                va = x[a] if a >= 0 else 0.0
                vb = x[b] if b >= 0 else 0.0
                jh[k] = ca[k] * (va - vb) + cb[k] * i_state[k] + cc[k] * s_state[k]
                if a >= 0:
                    rhs[a] -= jh[k]
                if b >= 0:
                    rhs[b] += jh[k]
            for k in range(ns):
                rhs[src_unknown[k]] -= src_values[step + 1, k]
            _lu_solve(l_data, l_ind, l_ptr, l_diag, u_data, u_ind, u_ptr, u_diag,
                      perm_r, perm_c, rhs, work, x)
            for k in range(n):
                if not isfinite(x[k]):
                    bad = step + 1
                    break
            if bad >= 0:
                break
            for k in range(nb):
                a = br_a[k]
                b = br_b[k]
                va = x[a] if a >= 0 else 0.0
                vb = x[b] if b >= 0 else 0.0
                v1 = va - vb
                i1 = g[k] * v1 + jh[k]
                s_state[k] += cd[k] * (i_state[k] + i1)
                i_state[k] = i1
            for m in range(nm):
                out[step + 1, m] = x[monitored[m]]
    return bad


def vvi_batch(const double[::1] t, const double[:, ::1] v, double vmin, double vmax):
    """Exact out-of-band area per column of ``v`` (linear between samples)."""
    cdef Py_ssize_t ns = v.shape[0]
    cdef Py_ssize_t nt = v.shape[1]
    cdef Py_ssize_t i, k, side
    cdef double dt, u0, u1, acc, up
    result = np.zeros(nt, dtype=np.float64)
    cdef double[::1] res = result
    with nogil:
        for k in range(nt):
            acc = 0.0
            for i in range(ns - 1):
                dt = t[i + 1] - t[i]
                for side in range(2):
                    if side == 0:
                        u0 = v[i, k] - vmax
                        u1 = v[i + 1, k] - vmax
                    else:
                        u0 = vmin - v[i, k]
                        u1 = vmin - v[i + 1, k]
                    if u0 >= 0.0 and u1 >= 0.0:
                        acc += 0.5 * (u0 + u1) * dt
                    elif u0 > 0.0 or u1 > 0.0:
                        up = u0 if u0 > 0.0 else u1
                        acc += 0.5 * up * up / (u0 - u1 if u0 > u1 else u1 - u0) * dt
            res[k] = acc
    return result
