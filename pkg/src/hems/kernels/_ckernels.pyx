# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; must stay bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def rollout(const double[::1] cost_off, const double[::1] cost_on, int hour,
            int remaining, requested, double start_cost=0.0):
    cdef Py_ssize_t horizon = cost_off.shape[0]
    cdef const cnp.int8_t[::1] req = np.ascontiguousarray(requested, dtype=np.int8)
    cdef Py_ssize_t n = req.shape[0]
    if hour + n != horizon:
        raise ValueError("requested actions must cover the rest of the horizon")
    eff_arr = np.zeros(n, dtype=np.int8)
    cum_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int8_t[::1] eff = eff_arr
    cdef double[::1] cum = cum_arr
    cdef double total = start_cost
    cdef int r = remaining
    cdef Py_ssize_t i, h
    cdef int a
    for i in range(n):
        h = hour + i
        a = req[i]
        if r >= horizon - h:
            a = 1
        if a == 1 and r > 0:
            total += cost_on[h]
            r -= 1
            eff[i] = 1
        else:
            total += cost_off[h]
        cum[i] = total
    return eff_arr, cum_arr


def batch_costs(const double[::1] cost_off, const double[::1] cost_on, int required,
                requested):
    cdef const cnp.int8_t[:, ::1] req = np.ascontiguousarray(requested, dtype=np.int8)
    cdef Py_ssize_t horizon = cost_off.shape[0]
    cdef Py_ssize_t rows = req.shape[0]
    out_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, h
    cdef int r
    cdef double total
    for k in range(rows):
        total = 0.0
        r = required
        for h in range(horizon):
            if r > 0 and (req[k, h] == 1 or r >= horizon - h):
                total += cost_on[h]
                r -= 1
            else:
                total += cost_off[h]
        out[k] = total
    return out_arr


def backward_induction(const double[::1] cost_off, const double[::1] cost_on, int required):
    cdef Py_ssize_t horizon = cost_off.shape[0]
    value_arr = np.full((horizon + 1, required + 1), np.inf)
    policy_arr = np.full((horizon, required + 1), -1, dtype=np.int8)
    cdef double[:, ::1] value = value_arr
    cdef cnp.int8_t[:, ::1] policy = policy_arr
    cdef Py_ssize_t h, r, left, top
    cdef double on, off
    value[horizon, 0] = 0.0
    for h in range(horizon - 1, -1, -1):
        left = horizon - h
        top = required if required < left else left
        for r in range(top + 1):
            if r == 0:
                value[h, r] = cost_off[h] + value[h + 1, 0]
                policy[h, r] = 0
                continue
            on = cost_on[h] + value[h + 1, r - 1]
            if r == left:
                value[h, r] = on
                policy[h, r] = 1
                continue
            off = cost_off[h] + value[h + 1, r]
            if off <= on:
                value[h, r] = off
                policy[h, r] = 0
            else:
                value[h, r] = on
                policy[h, r] = 1
    return value_arr, policy_arr
