"""Fused elementwise jet kernels for the hidden layers.

Each kernel makes one pass over the ``(order+1, n)`` jet arrays instead of
the dozens of temporaries the equivalent numpy expressions allocate.  The
activation recurrences are the same as in :class:`jetnet.Activation`.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TANH = 0
SWISH = 1


@njit(cache=True)
def activate(a, th, kind, order, sig_order, z, sig):
    """Push pre-activation jets ``a`` through sigma into ``z``; store derivatives in ``sig``.

    ``a`` and ``z`` are ``(order+1, n)``; ``sig`` is ``(sig_order+1, n)``.
    ``th`` is ``tanh(a[0])`` for tanh and ``tanh(a[0] / 2)`` for swish,
    computed outside with numpy's vectorised tanh.
    """
    n = a.shape[1]
    for i in range(n):
        t = th[i]
        if kind == TANH:
            s0 = t
            s1 = 1.0 - t * t
            s2 = -2.0 * t * s1
            s3 = -2.0 * s1 * s1 - 2.0 * t * s2
            s4 = -6.0 * s1 * s2 - 2.0 * t * s3
        else:
            x = a[0, i]
            p0 = 0.5 * (1.0 + t)
            q = 1.0 - 2.0 * p0
            p1 = p0 * (1.0 - p0)
            p2 = p1 * q
            p3 = p2 * q - 2.0 * p1 * p1
            p4 = p3 * q - 6.0 * p1 * p2
            s0 = x * p0
            s1 = x * p1 + p0
            s2 = x * p2 + 2.0 * p1
            s3 = x * p3 + 3.0 * p2
            s4 = x * p4 + 4.0 * p3
        sig[0, i] = s0
        if sig_order >= 1:
            sig[1, i] = s1
        if sig_order >= 2:
            sig[2, i] = s2
        if sig_order >= 3:
            sig[3, i] = s3
        if sig_order >= 4:
            sig[4, i] = s4
        z[0, i] = s0
        if order >= 1:
            a1 = a[1, i]
            z[1, i] = s1 * a1
            if order >= 2:
                a2 = a[2, i]
                a1sq = a1 * a1
                z[2, i] = s2 * a1sq + s1 * a2
                if order >= 3:
                    z[3, i] = s3 * a1sq * a1 + 3.0 * s2 * a1 * a2 + s1 * a[3, i]


@njit(cache=True)
def activate_reverse(gz, a, sig, order, ga):
    """Cotangents of the pre-activation jet from those of the post-activation jet.

    This is the transpose of :func:`activate` with ``sig`` holding orders
    ``0..order+1``.
    """
    n = a.shape[1]
    for i in range(n):
        s1 = sig[1, i]
        g0 = gz[0, i] * s1
        if order >= 1:
            a1 = a[1, i]
            s2 = sig[2, i]
            g0 += gz[1, i] * s2 * a1
            g1 = gz[1, i] * s1
            if order >= 2:
                a2 = a[2, i]
                s3 = sig[3, i]
                a1sq = a1 * a1
                g0 += gz[2, i] * (s3 * a1sq + s2 * a2)
                g1 += 2.0 * gz[2, i] * s2 * a1
                g2 = gz[2, i] * s1
                if order >= 3:
                    s4 = sig[4, i]
                    gz3 = gz[3, i]
                    g0 += gz3 * (s4 * a1sq * a1 + 3.0 * s3 * a1 * a2 + s2 * a[3, i])
                    g1 += gz3 * (3.0 * s3 * a1sq + 3.0 * s2 * a2)
                    g2 += 3.0 * gz3 * s2 * a1
                    ga[3, i] = gz3 * s1
                ga[2, i] = g2
            ga[1, i] = g1
        ga[0, i] = g0
