"""Phase 2: clone the Phase 1 demonstration with PPO, then fine-tune on the real cost.

During cloning the agent is rewarded 1 for every step whose next cell
``(remaining task, hour)`` matches the demonstration's and 0 otherwise; the
billed cost is never shown to it. Robustification continues from the cloned
weights with the ordinary cost reward.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from hems.env import ApplianceSpec, DayProfile, EnvState
from hems.errors import ValidationError
from hems.goexplore import Demonstration, cell_of
from hems.nn import Network
from hems.ppo import PpoConfig, PpoTrainer
from hems.rl import Normalizer, TrainReport, TrainingEnv, greedy_rollout

log = logging.getLogger(__name__)


@dataclass
class Phase2Config:
    clone_episodes: int = 4000  # total cloning budget; training stops as soon as alignment is perfect
    clone_attempt_episodes: int | None = 400  # fresh re-initialisation after this many episodes; None = never
    robust_episodes: int = 60
    clone_kl_stop_factor: float | None = 4.0  # PPO early stop used while cloning only

    def __post_init__(self):
        if self.clone_episodes < 0 or self.robust_episodes < 0:
            raise ValidationError("episode budgets must be >= 0")
        if self.clone_attempt_episodes is not None and self.clone_attempt_episodes < 1:
            raise ValidationError("clone_attempt_episodes must be >= 1 or null")
        if self.clone_kl_stop_factor is not None and not self.clone_kl_stop_factor > 0:
            raise ValidationError("clone_kl_stop_factor must be > 0 or null")


def cloning_reward(next_state: EnvState, t: int, demo: Demonstration) -> int:
    if not 1 <= t <= len(demo.actions):
        raise ValidationError(f"timestep {t} outside 1..{len(demo.actions)}")
    return int(cell_of(next_state) == cell_of(demo.states[t]))


class CloningEnv(TrainingEnv):
    """The demonstration's day with the cost reward swapped for alignment."""

    def __init__(self, demo: Demonstration, day: DayProfile, spec: ApplianceSpec, normalizer: Normalizer):
        if day.date != demo.date or len(demo.actions) != day.hours:
            raise ValidationError("demonstration does not belong to this day")
        super().__init__([day], spec, normalizer)
        self.demo = demo

    def step(self, action: int):
        # the episode runs on after a mismatch; later steps can re-align
        obs, _, done, info = super().step(action)
        s = info["state"]
        return obs, float(cloning_reward(s, s.hour, self.demo)), done, info


def alignment(policy: Network, demo: Demonstration, day: DayProfile, spec: ApplianceSpec, normalizer: Normalizer) -> int:
    """Number of greedy steps whose next cell matches the demonstration."""
    run = greedy_rollout(policy, day, spec, normalizer)
    return sum(cloning_reward(run.states[t], t, demo) for t in range(1, day.hours + 1))


def train_clone(
    demo: Demonstration,
    day: DayProfile,
    spec: ApplianceSpec,
    normalizer: Normalizer,
    ppo_config: PpoConfig,
    seed: int,
    episodes: int = 4000,
    attempt_episodes: int | None = 400,
    kl_stop_factor: float | None = 4.0,
) -> tuple[Network, TrainReport]:
    """PPO on the cloning reward until greedy alignment is perfect or the budget runs out.

    A softmax policy can saturate on the wrong action at a state before ever
    sampling the right one, after which it never recovers. Training therefore
    restarts from fresh weights (seeded ``[seed, attempt]``) every
    ``attempt_episodes`` episodes; the first attempt uses ``seed`` itself.
    The returned policy is the best-aligned one seen (earliest on ties).
    ``kl_stop_factor`` overrides the PPO config's early stop; without it the
    40 epochs per batch can saturate the policy within a single update.
    """
    ppo_config = replace(ppo_config, kl_stop_factor=kl_stop_factor)
    env = CloningEnv(demo, day, spec, normalizer)
    report = TrainReport("clone")
    full = day.hours
    best: tuple[int, Network] | None = None
    used, attempt = 0, 0

    def aligned(tr: PpoTrainer) -> bool:
        nonlocal best
        score = alignment(tr.policy, demo, day, spec, normalizer)
        if best is None or score > best[0]:
            best = (score, tr.policy.copy())
        return score == full

    while True:
        trainer = PpoTrainer(env, ppo_config, seed if attempt == 0 else [seed, attempt])
        if aligned(trainer):
            break
        budget = episodes - used
        if attempt_episodes is not None:
            budget = min(budget, attempt_episodes)
        if budget <= 0:
            break
        before = len(report.returns)
        trainer.train(budget, report, after_update=aligned)
        used += len(report.returns) - before
        if best[0] == full or used >= episodes:
            break
        attempt += 1
    report.restarts = attempt
    score, policy = best
    if score < full:
        report.warning = f"episode budget exhausted at alignment {score}/{full}"
        log.warning("policy cloning: %s", report.warning)
    report.final_cost = greedy_rollout(policy, day, spec, normalizer).total_cost
    return policy, report


def robustify(
    policy: Network,
    day: DayProfile,
    spec: ApplianceSpec,
    normalizer: Normalizer,
    ppo_config: PpoConfig,
    seed: int,
    episodes: int = 60,
) -> tuple[Network, TrainReport]:
    """Continue PPO from ``policy`` on the billed-cost reward.

    The greedy training-day cost is checked after every update and the
    cheapest policy seen (starting with the input) is returned.
    """
    env = TrainingEnv([day], spec, normalizer)
    trainer = PpoTrainer(env, ppo_config, seed, policy=policy)
    best = {"cost": greedy_rollout(policy, day, spec, normalizer).total_cost, "net": policy.copy()}

    def keep_best(tr: PpoTrainer) -> bool:
        cost = greedy_rollout(tr.policy, day, spec, normalizer).total_cost
        if cost < best["cost"]:
            best["cost"], best["net"] = cost, tr.policy.copy()
        return False

    report = trainer.train(episodes, TrainReport("robustify"), after_update=keep_best)
    report.final_cost = best["cost"]
    return best["net"], report
