# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled channel superposition kernel; semantics match fallback.py."""

from libc.math cimport exp, pow, sqrt, INFINITY, M_PI

import numpy as np


def superpose_emissions(object amps_in, object disp_x_in, object disp_y_in,
                        double dt, double diffusion, double t_mem, Py_ssize_t mem_ticks,
                        double dx, object dy_in, object dz_in,
                        Py_ssize_t n_out, bint monotone_x, double cutoff):
    """See fallback.superpose_emissions; identical contract and term set."""
    cdef double[::1] amps = np.ascontiguousarray(amps_in, dtype=np.float64)
    cdef double[::1] disp_x = np.ascontiguousarray(disp_x_in, dtype=np.float64)
    cdef double[::1] disp_y = np.ascontiguousarray(disp_y_in, dtype=np.float64)
    cdef double[::1] dy = np.atleast_1d(np.asarray(dy_in, dtype=np.float64))
    cdef double[::1] dz = np.atleast_1d(np.asarray(dz_in, dtype=np.float64))

    cdef Py_ssize_t n_emit = amps.shape[0]
    cdef Py_ssize_t n_rx = dy.shape[0]
    out_arr = np.zeros((n_rx, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if n_emit == 0 or n_out <= 1 or n_rx == 0 or mem_ticks < 1:
        return out_arr

    cdef double four_d = 4.0 * diffusion
    inv_arr = np.empty(mem_ticks + 1, dtype=np.float64)
    pref_arr = np.empty(mem_ticks + 1, dtype=np.float64)
    cdef double[::1] inv4dt = inv_arr
    cdef double[::1] pref = pref_arr
    inv4dt[0] = INFINITY
    pref[0] = 0.0
    cdef Py_ssize_t k
    for k in range(1, mem_ticks + 1):
        inv4dt[k] = 1.0 / (four_d * dt * k)
        pref[k] = pow(M_PI * four_d * dt * k, -1.5)

    surv_m_arr = np.empty(mem_ticks + 1, dtype=np.intp)
    surv_e_arr = np.empty(mem_ticks + 1, dtype=np.float64)
    cdef Py_ssize_t[::1] surv_m = surv_m_arr
    cdef double[::1] surv_e = surv_e_arr

    cdef double radius = sqrt(cutoff * four_d * t_mem)
    cdef double lo_band = dx - radius
    cdef double hi_band = dx + radius
    cdef bint fast = monotone_x and dx > 0.0

    cdef Py_ssize_t lo = 0, hi = -1, n, m, a, b, ns, s, j, m_min
    cdef double sxn, syn, mx, my, ex, e, val, dyj, dzj2, amp
    for n in range(1, n_out):
        m_min = n - mem_ticks
        if m_min < 0:
            m_min = 0
        sxn = disp_x[n]
        syn = disp_y[n]
        if fast:
            while hi + 1 <= n - 1 and sxn - disp_x[hi + 1] >= lo_band:
                hi += 1
            while lo <= n - 1 and sxn - disp_x[lo] > hi_band:
                lo += 1
            a = lo if lo > m_min else m_min
            b = hi
        else:
            a = m_min
            b = n - 1
        if b > n_emit - 1:
            b = n_emit - 1
        if a > b:
            continue
        ns = 0
        for m in range(a, b + 1):
            if amps[m] == 0.0:
                continue
            mx = dx - (sxn - disp_x[m])
            ex = mx * mx * inv4dt[n - m]
            if ex > cutoff:
                continue
            surv_m[ns] = m
            surv_e[ns] = ex
            ns += 1
        if ns == 0:
            continue
        for j in range(n_rx):
            dyj = dy[j]
            dzj2 = dz[j] * dz[j]
            val = 0.0
            for s in range(ns):
                m = surv_m[s]
                k = n - m
                my = dyj - (syn - disp_y[m])
                e = surv_e[s] + (my * my + dzj2) * inv4dt[k]
                if e <= cutoff:
                    val += amps[m] * pref[k] * exp(-e)
            out[j, n] = val
    return out_arr
