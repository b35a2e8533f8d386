"""Learner-facing environment, observation scaling and greedy evaluation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hems.env import ApplianceSpec, DayProfile, EnvState, Replay, reset, step
from hems.errors import ValidationError

OBS_DIM = 5


@dataclass(frozen=True)
class Normalizer:
    """Scales observations to roughly [0, 1] using training-set maxima."""

    price_max: float = 1.0
    renewable_max: float = 1.0
    background_max: float = 1.0
    required_hours: int = 2
    horizon: int = 24

    @classmethod
    def fit(cls, days: Sequence[DayProfile], spec: ApplianceSpec) -> "Normalizer":
        def peak(values):
            m = max(values)
            return m if m > 0 else 1.0

        return cls(
            price_max=peak([v for d in days for v in d.price]),
            renewable_max=peak([v for d in days for v in d.renewable]),
            background_max=peak([v for d in days for v in d.background]),
            required_hours=spec.required_hours,
            horizon=days[0].hours,
        )

    def encode(self, s: EnvState) -> np.ndarray:
        return np.array(
            [
                s.price_obs / self.price_max,
                s.renewable_obs / self.renewable_max,
                s.background_obs / self.background_max,
                s.remaining_task / self.required_hours,
                s.hour / self.horizon,
            ]
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad normalizer block: {exc}") from exc


class TrainingEnv:
    """Episodic wrapper over the simulator with vector observations.

    Episodes cycle through ``days`` in order. ``step`` returns
    ``(obs, reward, done, info)``; ``info`` carries the raw state and the
    effective action.
    """

    def __init__(self, days: Sequence[DayProfile], spec: ApplianceSpec, normalizer: Normalizer):
        if not days:
            raise ValidationError("TrainingEnv needs at least one day")
        self.days = list(days)
        self.spec = spec
        self.normalizer = normalizer
        self.horizon = self.days[0].hours
        self._next_day = 0
        self.day: DayProfile | None = None
        self.state: EnvState | None = None

    def reset(self) -> np.ndarray:
        self.day = self.days[self._next_day % len(self.days)]
        self._next_day += 1
        self.state = reset(self.day, self.spec)
        return self.normalizer.encode(self.state)

    def true_step(self, action: int):
        out = step(self.state, action, self.day, self.spec)
        self.state = out.next_state
        return out

    def has_choice(self) -> bool:
        """False when the requested action cannot change the outcome."""
        s = self.state
        return 0 < s.remaining_task < self.day.hours - s.hour

    def step(self, action: int):
        choice = self.has_choice()
        out = self.true_step(action)
        info = {"state": out.next_state, "effective_action": out.effective_action, "choice": choice}
        return self.normalizer.encode(out.next_state), out.reward, out.done, info


def greedy_rollout(net, day: DayProfile, spec: ApplianceSpec, normalizer: Normalizer) -> Replay:
    """Argmax rollout from reset (ties to action 0)."""
    s = reset(day, spec)
    states, eff, rewards = [s], [], []
    cost = 0.0
    for _ in range(day.hours):
        out = step(s, net.greedy(normalizer.encode(s)), day, spec)
        s = out.next_state
        states.append(s)
        eff.append(out.effective_action)
        rewards.append(out.reward)
        cost += -out.reward
    return Replay(states, eff, rewards, cost)


def greedy_cost(net, days: Sequence[DayProfile], spec: ApplianceSpec, normalizer: Normalizer) -> float:
    return sum(greedy_rollout(net, d, spec, normalizer).total_cost for d in days)


@dataclass
class TrainReport:
    phase: str
    returns: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    entropy: list[float] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    final_cost: float | None = None
    warning: str | None = None
    restarts: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.epsilon:
            w.writerow(["phase", "episode", "return", "epsilon"])
            for i, (r, e) in enumerate(zip(self.returns, self.epsilon)):
                w.writerow([self.phase, i, repr(float(r)), repr(float(e))])
        else:
            w.writerow(["phase", "episode", "return", "kl", "entropy"])
            for i, (r, k, h) in enumerate(zip(self.returns, self.kl, self.entropy)):
                w.writerow([self.phase, i, repr(float(r)), repr(float(k)), repr(float(h))])
        return buf.getvalue()
