# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled relative-value-iteration kernel; arithmetic twin of rvi_py.py."""

import numpy as np


def rvi_iterate(const double[::1] cost, const int[::1] succ0, const int[::1] fail0,
                const double[::1] pfail0, const int[::1] succ1, const int[::1] fail1,
                const double[::1] pfail1, int ref, double tol, long max_iter,
                double damping, double[::1] h):
    """Run the normalized average-cost value iteration in place on h.

    Same contract as the pure-Python twin; returns (gain, iterations,
    span, converged).
    """
    cdef Py_ssize_t n_states = cost.shape[0]
    cdef Py_ssize_t i
    cdef long it = 0
    cdef double omk = 1.0 - damping
    cdef double q0, q1, m, th_ref, d, dmax, dmin, h_new
    cdef double span = 0.0, gain = 0.0
    cdef bint fixed_point

    th_buf = np.empty(n_states)
    cdef double[::1] th = th_buf

    for it in range(1, max_iter + 1):
        for i in range(n_states):
            q0 = (1.0 - pfail0[i]) * h[succ0[i]] + pfail0[i] * h[fail0[i]]
            q1 = (1.0 - pfail1[i]) * h[succ1[i]] + pfail1[i] * h[fail1[i]]
            m = q1 if q1 < q0 else q0
            th[i] = cost[i] + m
            if damping != 0.0:
                th[i] = omk * th[i] + damping * h[i]
        dmax = th[0] - h[0]
        dmin = dmax
        for i in range(1, n_states):
            d = th[i] - h[i]
            if d > dmax:
                dmax = d
            if d < dmin:
                dmin = d
        span = (dmax - dmin) / omk
        gain = (th[ref] - h[ref]) / omk
        th_ref = th[ref]
        if span < tol:
            for i in range(n_states):
                h[i] = th[i] - th_ref
            return gain, it, span, True
        fixed_point = True
        for i in range(n_states):
            h_new = th[i] - th_ref
            if h_new != h[i]:
                fixed_point = False
            h[i] = h_new
        if fixed_point:
            return gain, it, span, True
    return gain, max_iter, span, False
