"""Exact minimum-cost schedules for a single day.

``solve_day`` runs backward induction over ``(hour, remaining)``;
``brute_force`` enumerates every action sequence on short horizons. Both
break ties toward leaving the appliance off (running later), so on exact
ties they return the lexicographically smallest optimal schedule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from hems import kernels
from hems.env import ApplianceSpec, DayProfile, replay
from hems.errors import ValidationError

MAX_BRUTE_FORCE_HOURS = 16


@dataclass
class OracleResult:
    optimal_cost: float
    optimal_actions: list[int]
    value_table: np.ndarray  # (hours + 1, required + 1); inf where infeasible

    def to_dict(self, date: str | None = None) -> dict:
        d = {
            "optimal_cost": self.optimal_cost,
            "optimal_actions": list(self.optimal_actions),
            "value_table": [[None if not np.isfinite(v) else float(v) for v in row] for row in self.value_table],
        }
        if date is not None:
            d = {"date": date, **d}
        return d


def solve_day(day: DayProfile, spec: ApplianceSpec) -> OracleResult:
    if spec.required_hours > day.hours:
        raise ValidationError("required_hours exceeds the horizon")
    off, on = day.stage_costs(spec)
    value, policy = kernels.backward_induction(off, on, spec.required_hours)
    actions = []
    r = spec.required_hours
    for h in range(day.hours):
        a = int(policy[h, r])
        actions.append(a)
        r -= a
    # report the forward-billed cost so it matches any replay bit for bit
    cost = replay(day, spec, actions).total_cost
    return OracleResult(cost, actions, value)


def _enumerate(off: np.ndarray, on: np.ndarray, required: int) -> tuple[np.ndarray, np.ndarray]:
    """Forward-simulate every requested action sequence at once.

    Returns (effective actions, total cost) per sequence, rows in
    lexicographic order of the requested sequence.
    """
    H = len(off)
    requested = np.array(list(itertools.product((0, 1), repeat=H)), dtype=np.int8).reshape(-1, H)
    n = requested.shape[0]
    remaining = np.full(n, required)
    total = np.zeros(n)
    eff = np.zeros((n, H), dtype=np.int8)
    for h in range(H):
        forced = remaining >= H - h
        run = (remaining > 0) & ((requested[:, h] == 1) | forced)
        total = total + np.where(run, on[h], off[h])
        remaining = remaining - run
        eff[:, h] = run
    return eff, total


def brute_force(day: DayProfile, spec: ApplianceSpec) -> OracleResult:
    if day.hours > MAX_BRUTE_FORCE_HOURS:
        raise ValidationError(f"brute force limited to {MAX_BRUTE_FORCE_HOURS} hours, got {day.hours}")
    if spec.required_hours > day.hours:
        raise ValidationError("required_hours exceeds the horizon")
    off, on = day.stage_costs(spec)
    eff, total = _enumerate(off, on, spec.required_hours)
    best = total.min()
    tied = eff[total == best]
    # lexicographically smallest effective schedule among exact ties
    pick = tied[np.lexsort(tied.T[::-1])[0]]
    actions = [int(a) for a in pick]
    run = replay(day, spec, actions)
    if run.total_cost != best or run.actions != actions:
        raise AssertionError("enumeration disagrees with simulator replay")
    H, R = day.hours, spec.required_hours
    value = np.full((H + 1, R + 1), np.inf)
    value[H, 0] = 0.0
    for h in range(H):
        for r in range(min(R, H - h) + 1):
            value[h, r] = _enumerate(off[h:], on[h:], r)[1].min()
    return OracleResult(float(best), actions, value)


def random_policy_costs(day: DayProfile, spec: ApplianceSpec, rollouts: int, rng: np.random.Generator) -> np.ndarray:
    """Episode costs of the uniform random policy (forcing applied)."""
    off, on = day.stage_costs(spec)
    requested = rng.integers(0, 2, size=(rollouts, day.hours), dtype=np.int8)
    return kernels.batch_costs(off, on, spec.required_hours, requested)
