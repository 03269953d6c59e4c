"""Pure-Python (numpy) twin of the compiled relative-value-iteration kernel.

Elementwise operation order matches rvi_cy.pyx exactly so both backends
produce bit-identical bias vectors and gains.
"""

from __future__ import annotations

import numpy as np


def rvi_iterate(cost, succ0, fail0, pfail0, succ1, fail1, pfail1,
                ref, tol, max_iter, damping, h):
    """Run the normalized average-cost value iteration in place on h.

    Each sweep applies the two-action Bellman operator (optionally damped
    by `damping` to break periodicity), renormalizes by the reference
    state, and stops when the span of the per-state increments drops below
    tol or when the iterate reaches an exact numerical fixed point (no bit
    changes), whichever comes first. Returns (gain, iterations, span,
    converged).
    """
    psucc0 = 1.0 - pfail0
    psucc1 = 1.0 - pfail1
    omk = 1.0 - damping
    span = np.inf
    gain = np.nan
    for it in range(1, max_iter + 1):
        q0 = psucc0 * h[succ0] + pfail0 * h[fail0]
        q1 = psucc1 * h[succ1] + pfail1 * h[fail1]
        th = cost + np.minimum(q0, q1)
        if damping != 0.0:
            th = omk * th + damping * h
        delta = th - h
        span = (delta.max() - delta.min()) / omk
        gain = float(delta[ref]) / omk
        h_new = th - th[ref]
        if span < tol:
            h[:] = h_new
            return gain, it, float(span), True
        if np.array_equal(h_new, h):
            # exact float64 fixed point: further sweeps cannot improve it
            return gain, it, float(span), True
        h[:] = h_new
    return gain, max_iter, float(span), False
