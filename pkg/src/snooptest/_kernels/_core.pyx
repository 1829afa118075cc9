# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core.

Mirrors snooptest._kernels.pure statement for statement; the test suite
asserts bit-identical outputs. Keep both in sync when touching either.
"""

import numpy as np

from libc.stdint cimport int64_t, int8_t, uint8_t

MODE_LEVEL = 0
MODE_REVERSAL = 1
MODE_HOLD = 2


def positions_from_signals(buy_ok, sell_ok, int mode, int hold, bint edge_trigger):
    """See snooptest._kernels.pure.positions_from_signals."""
    cdef const uint8_t[::1] bb = np.ascontiguousarray(buy_ok, dtype=np.uint8)
    cdef const uint8_t[::1] ss = np.ascontiguousarray(sell_ok, dtype=np.uint8)
    cdef Py_ssize_t n = bb.shape[0]
    out_arr = np.zeros(n, dtype=np.int8)
    cdef int8_t[::1] out = out_arr
    cdef Py_ssize_t t
    cdef bint b, s, fire_b, fire_s
    cdef bint prev_b = False
    cdef bint prev_s = False
    cdef int pos = 0
    cdef int remaining = 0

    if mode == MODE_LEVEL:
        for t in range(n):
            b = bb[t] != 0
            s = ss[t] != 0
            if b and not s:
                out[t] = 1
            elif s and not b:
                out[t] = -1
        return out_arr

    if mode == MODE_REVERSAL:
        for t in range(n):
            b = bb[t] != 0
            s = ss[t] != 0
            if b and s:
                pos = 0
            elif b:
                pos = 1
            elif s:
                pos = -1
            out[t] = pos
        return out_arr

    if mode != MODE_HOLD:
        raise ValueError(f"unknown mode {mode}")
    if hold <= 0:
        raise ValueError("MODE_HOLD requires hold >= 1")
    for t in range(n):
        b = bb[t] != 0
        s = ss[t] != 0
        if remaining > 0:
            out[t] = pos
            remaining -= 1
        else:
            pos = 0
            fire_b = b and not s and not (edge_trigger and prev_b)
            fire_s = s and not b and not (edge_trigger and prev_s)
            if fire_b:
                pos = 1
                remaining = hold - 1
            elif fire_s:
                pos = -1
                remaining = hold - 1
            out[t] = pos
        prev_b = b
        prev_s = s
    return out_arr


def filter_positions(close, double x, double b, int hold, high_ref=None, low_ref=None):
    """See snooptest._kernels.pure.filter_positions."""
    cdef const double[::1] cc = np.ascontiguousarray(close, dtype=np.float64)
    cdef Py_ssize_t n = cc.shape[0]
    out_arr = np.zeros(n, dtype=np.int8)
    cdef int8_t[::1] out = out_arr
    cdef bint use_refs = high_ref is not None
    cdef const double[::1] href = (
        np.ascontiguousarray(high_ref, dtype=np.float64) if use_refs else cc
    )
    cdef const double[::1] lref = (
        np.ascontiguousarray(low_ref, dtype=np.float64) if use_refs else cc
    )
    cdef Py_ssize_t t
    cdef int pos = 0
    cdef int remaining = 0
    cdef double c
    cdef double lo = cc[0]
    cdef double hi = cc[0]
    cdef double exit_frac
    cdef bint buy, sell

    for t in range(n):
        c = cc[t]
        if not use_refs:
            if c < lo:
                lo = c
            if c > hi:
                hi = c
        else:
            # NaN refs never trigger: comparisons with NaN are False.
            lo = lref[t]
            hi = href[t]

        if hold > 0:
            if remaining > 0:
                out[t] = pos
                remaining -= 1
                continue
            pos = 0  # holding expired (or never opened): re-arm from flat

        if pos == 0:
            buy = c >= lo * (1.0 + x)
            sell = c <= hi * (1.0 - x)
            if buy and sell:
                pass  # conflict: stay flat
            elif buy:
                pos = 1
                if hold > 0:
                    remaining = hold - 1
                if not use_refs:
                    lo = c
                    hi = c
            elif sell:
                pos = -1
                if hold > 0:
                    remaining = hold - 1
                if not use_refs:
                    lo = c
                    hi = c
        elif use_refs:
            buy = c >= lo * (1.0 + x)
            sell = c <= hi * (1.0 - x)
            if buy and sell:
                pos = 0
            elif buy:
                pos = 1
            elif sell:
                pos = -1
        elif pos == 1:
            exit_frac = b if b > 0.0 else x
            if c <= hi * (1.0 - exit_frac):
                if b > 0.0:
                    pos = 0
                else:
                    pos = -1
                lo = c
                hi = c
        else:  # pos == -1
            exit_frac = b if b > 0.0 else x
            if c >= lo * (1.0 + exit_frac):
                if b > 0.0:
                    pos = 0
                else:
                    pos = 1
                lo = c
                hi = c
        out[t] = pos
    return out_arr


def bootstrap_chain(u_decide, u_fresh, double q):
    """See snooptest._kernels.pure.bootstrap_chain."""
    cdef const double[::1] ud = np.ascontiguousarray(u_decide, dtype=np.float64)
    cdef const double[::1] uf = np.ascontiguousarray(u_fresh, dtype=np.float64)
    cdef Py_ssize_t n = ud.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t t
    cdef int64_t j
    out[0] = <int64_t>(uf[0] * n)
    for t in range(1, n):
        if ud[t] < q:
            out[t] = <int64_t>(uf[t] * n)
        else:
            j = out[t - 1] + 1
            out[t] = 0 if j == n else j
    return out_arr
