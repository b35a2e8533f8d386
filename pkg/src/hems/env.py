"""Household-day scheduling MDP.

One shiftable appliance runs at rated power for a fixed number of hours per
day on top of an exogenous background load, offset by renewable generation
and billed at a dynamic hourly price. Unmet hours are forced into the end of
the day. Everything here is deterministic: ``step`` is a pure function of
``(state, action, day, spec)``.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hems.errors import ValidationError

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class ApplianceSpec:
    rated_power: float = 1.0  # kW
    required_hours: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.rated_power) and self.rated_power > 0):
            raise ValidationError(f"rated_power must be > 0, got {self.rated_power}")
        if int(self.required_hours) != self.required_hours or not (
            0 < self.required_hours <= HOURS_PER_DAY
        ):
            raise ValidationError(
                f"required_hours must be an integer in (0, 24], got {self.required_hours}"
            )


def _as_series(name: str, values: Sequence[float], hours: int) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != hours:
        raise ValidationError(f"{name} has {len(out)} entries, expected {hours}")
    for h, v in enumerate(out):
        if not math.isfinite(v) or v < 0:
            raise ValidationError(f"{name}[{h}] = {v} is not a finite non-negative value")
    return out


@dataclass(frozen=True)
class DayProfile:
    """Hourly exogenous data for one day.

    ``hours`` is 24 for real days. Shorter horizons exist only for the
    oracle cross-checks and toy examples and must be requested explicitly.
    """

    date: str
    price: tuple[float, ...]  # currency / kWh
    background: tuple[float, ...]  # kW
    renewable: tuple[float, ...]  # kW
    hours: int = HOURS_PER_DAY

    def __post_init__(self):
        if not (1 <= self.hours <= HOURS_PER_DAY):
            raise ValidationError(f"hours must be in [1, 24], got {self.hours}")
        try:
            _dt.date.fromisoformat(self.date)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad date {self.date!r}") from exc
        for name in ("price", "background", "renewable"):
            object.__setattr__(self, name, _as_series(name, getattr(self, name), self.hours))

    def to_dict(self) -> dict:
        d = {
            "date": self.date,
            "price": list(self.price),
            "background": list(self.background),
            "renewable": list(self.renewable),
        }
        if self.hours != HOURS_PER_DAY:
            d["hours"] = self.hours
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DayProfile":
        extra = set(d) - {"date", "price", "background", "renewable", "hours"}
        if extra:
            raise ValidationError(f"unknown profile keys: {sorted(extra)}")
        try:
            return cls(
                date=d["date"],
                price=d["price"],
                background=d["background"],
                renewable=d["renewable"],
                hours=d.get("hours", HOURS_PER_DAY),
            )
        except KeyError as exc:
            raise ValidationError(f"profile missing key {exc}") from exc

    def stage_costs(self, spec: ApplianceSpec) -> tuple[np.ndarray, np.ndarray]:
        """Billed cost of each hour with the appliance off and on.

        Computed through :func:`hourly_reward` so every fast path (kernels,
        oracle) bills exactly like :func:`step`.
        """
        off = np.empty(self.hours)
        on = np.empty(self.hours)
        for h in range(self.hours):
            p, b, r = self.price[h], self.background[h], self.renewable[h]
            off[h] = -hourly_reward(p, 0.0, b, r)
            on[h] = -hourly_reward(p, spec.rated_power, b, r)
        return off, on


@dataclass(frozen=True)
class EnvState:
    price_obs: float
    renewable_obs: float
    background_obs: float
    remaining_task: int
    hour: int


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    done: bool
    effective_action: int  # 1 iff the appliance drew power this hour


@dataclass(frozen=True)
class Snapshot:
    env_state: EnvState
    day_ref: str
    accrued_cost: float = 0.0


def hourly_reward(price: float, shiftable: float, background: float, renewable: float) -> float:
    """Negative cost of one hour: ``-price * max(shiftable + background - renewable, 0)``."""
    if price < 0 or shiftable < 0 or background < 0 or renewable < 0:
        raise ValidationError(
            f"negative input to hourly_reward: {(price, shiftable, background, renewable)}"
        )
    net = shiftable + background - renewable
    if net < 0.0:
        net = 0.0
    return -(price * net)


def observe(day: DayProfile, hour: int, remaining: int) -> EnvState:
    # terminal state repeats the final hour's observations
    h = min(hour, day.hours - 1)
    return EnvState(day.price[h], day.renewable[h], day.background[h], remaining, hour)


def is_terminal(state: EnvState, horizon: int = HOURS_PER_DAY) -> bool:
    return state.hour >= horizon


def force_action(state: EnvState, requested: int, horizon: int = HOURS_PER_DAY) -> int:
    """Override ``requested`` with 1 when the remaining task has no slack left."""
    if state.hour >= horizon:
        raise ValidationError("cannot act in a terminal state")
    if requested not in (0, 1):
        raise ValidationError(f"action must be 0 or 1, got {requested!r}")
    if state.remaining_task >= horizon - state.hour:
        return 1
    return requested


def reset(day: DayProfile, spec: ApplianceSpec) -> EnvState:
    if not isinstance(day, DayProfile):
        raise ValidationError("reset expects a DayProfile")
    if spec.required_hours > day.hours:
        raise ValidationError(
            f"required_hours={spec.required_hours} exceeds the {day.hours}-hour horizon"
        )
    return observe(day, 0, spec.required_hours)


def step(state: EnvState, action: int, day: DayProfile, spec: ApplianceSpec) -> StepOutcome:
    a = force_action(state, action, day.hours)
    h = state.hour
    power = spec.rated_power if (a == 1 and state.remaining_task > 0) else 0.0
    reward = hourly_reward(day.price[h], power, day.background[h], day.renewable[h])
    ran = 1 if power > 0 else 0
    nxt = observe(day, h + 1, state.remaining_task - ran)
    return StepOutcome(nxt, reward, nxt.hour >= day.hours, ran)


@dataclass
class Replay:
    states: list[EnvState]
    actions: list[int]  # effective
    rewards: list[float]
    total_cost: float


def replay(day: DayProfile, spec: ApplianceSpec, actions: Sequence[int]) -> Replay:
    """Run a full episode from reset with the given requested actions."""
    if len(actions) != day.hours:
        raise ValidationError(f"need {day.hours} actions, got {len(actions)}")
    s = reset(day, spec)
    states, eff, rewards = [s], [], []
    cost = 0.0
    for a in actions:
        out = step(s, int(a), day, spec)
        s = out.next_state
        states.append(s)
        eff.append(out.effective_action)
        rewards.append(out.reward)
        cost += -out.reward
    return Replay(states, eff, rewards, cost)


@dataclass
class HomeEnergyEnv:
    """Stateful wrapper around :func:`step` with snapshot/restore.

    Days are registered by date so that snapshots carry only a reference.
    """

    spec: ApplianceSpec = field(default_factory=ApplianceSpec)
    days: dict[str, DayProfile] = field(default_factory=dict)
    state: EnvState | None = None
    day: DayProfile | None = None
    accrued_cost: float = 0.0

    def register(self, day: DayProfile) -> None:
        known = self.days.get(day.date)
        if known is not None and known != day:
            raise ValidationError(f"a different profile is already registered for {day.date}")
        self.days[day.date] = day

    def reset(self, day: DayProfile | str) -> EnvState:
        if isinstance(day, str):
            if day not in self.days:
                raise ValidationError(f"unknown day {day!r}")
            day = self.days[day]
        else:
            self.register(day)
        self.day = day
        self.state = reset(day, self.spec)
        self.accrued_cost = 0.0
        return self.state

    def step(self, action: int) -> StepOutcome:
        if self.state is None or self.day is None:
            raise ValidationError("step() before reset()")
        out = step(self.state, action, self.day, self.spec)
        self.state = out.next_state
        self.accrued_cost += -out.reward
        return out

    @property
    def done(self) -> bool:
        return self.state is not None and self.day is not None and self.state.hour >= self.day.hours

    def snapshot(self) -> Snapshot:
        if self.state is None or self.day is None:
            raise ValidationError("snapshot() before reset()")
        return Snapshot(self.state, self.day.date, self.accrued_cost)

    def restore(self, snap: Snapshot) -> EnvState:
        day = self.days.get(snap.day_ref)
        if day is None:
            raise ValidationError(f"snapshot refers to unknown day {snap.day_ref!r}")
        self.day = day
        self.state = snap.env_state
        self.accrued_cost = snap.accrued_cost
        return self.state
