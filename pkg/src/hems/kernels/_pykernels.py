"""Pure-Python kernels. Reference semantics for the compiled ``_ckernels``."""

import numpy as np

INF = float("inf")


def rollout(cost_off, cost_on, hour, remaining, requested, start_cost=0.0):
    """Roll the forcing rule forward from ``(hour, remaining)``.

    Returns the effective actions and the cumulative billed cost after each
    step, starting from ``start_cost``.
    """
    horizon = len(cost_off)
    n = len(requested)
    if hour + n != horizon:
        raise ValueError("requested actions must cover the rest of the horizon")
    eff = np.zeros(n, dtype=np.int8)
    cum = np.empty(n, dtype=np.float64)
    total = float(start_cost)
    r = int(remaining)
    for i in range(n):
        h = hour + i
        a = int(requested[i])
        if r >= horizon - h:
            a = 1
        if a == 1 and r > 0:
            total += cost_on[h]
            r -= 1
            eff[i] = 1
        else:
            total += cost_off[h]
        cum[i] = total
    return eff, cum


def batch_costs(cost_off, cost_on, required, requested):
    """Total episode cost for each row of requested actions, from reset."""
    horizon = len(cost_off)
    rows = requested.shape[0]
    out = np.empty(rows, dtype=np.float64)
    for k in range(rows):
        total = 0.0
        r = int(required)
        row = requested[k]
        for h in range(horizon):
            if r > 0 and (row[h] == 1 or r >= horizon - h):
                total += cost_on[h]
                r -= 1
            else:
                total += cost_off[h]
        out[k] = total
    return out


def backward_induction(cost_off, cost_on, required):
    """Cost-to-go table over (hour, remaining) and the tie-to-off policy.

    Infeasible cells (remaining > hours left) hold ``inf`` / ``-1``.
    """
    horizon = len(cost_off)
    value = np.full((horizon + 1, required + 1), INF)
    policy = np.full((horizon, required + 1), -1, dtype=np.int8)
    value[horizon, 0] = 0.0
    for h in range(horizon - 1, -1, -1):
        left = horizon - h
        for r in range(min(required, left) + 1):
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
    return value, policy
