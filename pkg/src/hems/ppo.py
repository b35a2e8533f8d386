"""PPO with an adaptive KL penalty.

The surrogate maximised per minibatch is

    mean(ratio * advantage) - beta * mean(KL(old || new)) + entropy_weight * mean(H(new))

and after each batch ``beta`` doubles when the measured KL exceeds
``1.5 * kl_target`` and halves when it falls below ``kl_target / 1.5``.
Returns-to-go are plain discounted suffix sums (no GAE).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from hems.errors import NumericalError, ValidationError
from hems.nn import Adam, MlpSpec, Network, backward_logits, forward_cache, softmax
from hems.rl import OBS_DIM, TrainReport, TrainingEnv, greedy_cost

BETA_MIN, BETA_MAX = 1e-6, 1e6


@dataclass
class PpoConfig:
    episodes: int = 60
    learning_rate: float = 0.001
    discount: float = 1.0
    batch_size: int = 64
    kl_target: float = 0.01
    entropy_weight: float = 0.001
    epochs_per_batch: int = 40
    value_epochs: int = 256
    hidden: tuple[int, ...] = (32, 32, 32)
    initial_beta: float = 1.0
    kl_stop_factor: float | None = None  # end a batch's epochs once KL > factor * kl_target

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.episodes < 0:
            raise ValidationError("episodes must be >= 0")
        if not (0 < self.discount <= 1):
            raise ValidationError("discount must be in (0, 1]")
        for name in ("learning_rate", "batch_size", "kl_target", "epochs_per_batch", "value_epochs", "initial_beta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if self.entropy_weight < 0:
            raise ValidationError("entropy_weight must be >= 0")
        if self.kl_stop_factor is not None and not self.kl_stop_factor > 0:
            raise ValidationError("kl_stop_factor must be > 0 or null")


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    logp: float
    choice: bool = True  # False when the action had no effect (task done or forced)


def policy_spec(hidden) -> MlpSpec:
    return MlpSpec(OBS_DIM, tuple(hidden), 2, head="softmax-policy")


def value_spec(hidden) -> MlpSpec:
    return MlpSpec(OBS_DIM, tuple(hidden), 1, head="linear-value")


def collect_rollouts(
    policy: Network,
    env: TrainingEnv,
    n_transitions: int,
    rng: np.random.Generator,
    max_episodes: int | None = None,
) -> tuple[list[Transition], list[float]]:
    """Whole episodes until at least ``n_transitions`` are gathered.

    Returns the transitions and each episode's undiscounted return.
    """
    transitions: list[Transition] = []
    returns = []
    while len(transitions) < n_transitions and (max_episodes is None or len(returns) < max_episodes):
        obs = env.reset()
        done, total = False, 0.0
        while not done:
            p = policy(obs)
            a = int(rng.random() < p[1])
            nxt, r, done, info = env.step(a)
            transitions.append(
                Transition(obs, a, float(r), nxt, bool(done), float(np.log(p[a])), bool(info.get("choice", True)))
            )
            total += r
            obs = nxt
        returns.append(total)
    return transitions, returns


def compute_advantages(
    transitions: list[Transition], value_net: Network, discount: float, normalize: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Per-transition (advantage, return-to-go); episodes split at ``done``."""
    n = len(transitions)
    returns = np.zeros(n)
    running = 0.0
    for i in range(n - 1, -1, -1):
        if transitions[i].done:
            running = 0.0
        running = transitions[i].reward + discount * running
        returns[i] = running
    states = np.array([t.state for t in transitions])
    adv = returns - value_net(states)[:, 0]
    if normalize and n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv, returns


def surrogate_loss(
    policy: Network,
    states: np.ndarray,
    actions: np.ndarray,
    old_probs: np.ndarray,
    adv: np.ndarray,
    beta: float,
    entropy_weight: float,
):
    """Negated penalised surrogate, its d/d(logits), and the layer cache."""
    acts, z = forward_cache(policy.params, policy.spec, states)
    p = softmax(z)
    n = len(actions)
    idx = np.arange(n)
    logp = np.log(p)
    ratio = p[idx, actions] / old_probs[idx, actions]
    kl = (old_probs * (np.log(old_probs) - logp)).sum(axis=1)
    ent = -(p * logp).sum(axis=1)
    loss = -(ratio * adv).mean() + beta * kl.mean() - entropy_weight * ent.mean()

    onehot = np.zeros_like(p)
    onehot[idx, actions] = 1.0
    g = -(ratio * adv)[:, None] * (onehot - p)
    g += beta * (p - old_probs)
    g += entropy_weight * p * (logp + ent[:, None])
    return loss, g / n, acts


def adapt_beta(beta: float, kl: float, kl_target: float) -> float:
    if kl > 1.5 * kl_target:
        beta *= 2.0
    elif kl < kl_target / 1.5:
        beta /= 2.0
    return min(max(beta, BETA_MIN), BETA_MAX)


@dataclass
class UpdateStats:
    kl: float
    entropy: float
    beta: float
    value_losses: list[float] = field(default_factory=list)  # full batch, before each epoch and after the last


def _value_loss(value_net: Network, states: np.ndarray, targets: np.ndarray) -> float:
    return float(0.5 * np.mean((value_net(states)[:, 0] - targets) ** 2))


def _mean_kl(old: np.ndarray, new: np.ndarray) -> float:
    return float((old * (np.log(old) - np.log(new))).sum(axis=1).mean())


def ppo_update(
    policy: Network,
    value_net: Network,
    batch: list[Transition],
    config: PpoConfig,
    beta: float,
    rng: np.random.Generator,
    policy_opt: Adam,
    value_opt: Adam,
) -> UpdateStats:
    """Epochs of minibatch steps on one batch; nets updated in place."""
    if len(batch) < 2:
        raise ValidationError("ppo_update needs at least 2 transitions")
    states = np.array([t.state for t in batch])
    actions = np.array([t.action for t in batch])
    raw_adv, targets = compute_advantages(batch, value_net, config.discount, normalize=False)
    n = len(batch)
    # the policy only learns from steps where its action could matter
    pol = np.array([i for i, t in enumerate(batch) if t.choice], dtype=int)
    if len(pol) == 0:
        pol = np.arange(n)
    adv = raw_adv[pol]
    if len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    pstates, pactions = states[pol], actions[pol]
    old_probs = policy(pstates)

    vlosses = [_value_loss(value_net, states, targets)]
    n_pol_mb = max(1, round(len(pol) / config.batch_size))
    for _ in range(config.epochs_per_batch):
        for mb in np.array_split(rng.permutation(len(pol)), n_pol_mb):
            loss, g, acts = surrogate_loss(
                policy, pstates[mb], pactions[mb], old_probs[mb], adv[mb], beta, config.entropy_weight
            )
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite PPO loss (beta={beta})")
            policy_opt.step(policy.params, backward_logits(policy.params, acts, g))
        if config.kl_stop_factor is not None:
            if _mean_kl(old_probs, policy(pstates)) > config.kl_stop_factor * config.kl_target:
                break
    n_mb = max(1, round(n / config.batch_size))
    for _ in range(config.value_epochs):
        for mb in np.array_split(rng.permutation(n), n_mb):
            vacts, v = forward_cache(value_net.params, value_net.spec, states[mb])
            gv = (v[:, 0] - targets[mb])[:, None] / len(mb)
            value_opt.step(value_net.params, backward_logits(value_net.params, vacts, gv))
        vlosses.append(_value_loss(value_net, states, targets))
    new_probs = policy(pstates)
    kl = _mean_kl(old_probs, new_probs)
    ent = float(-(new_probs * np.log(new_probs)).sum(axis=1).mean())
    if not (math.isfinite(kl) and math.isfinite(vlosses[-1])):
        raise NumericalError("non-finite KL or value loss after PPO update")
    return UpdateStats(kl, ent, adapt_beta(beta, kl, config.kl_target), vlosses)


class PpoTrainer:
    """Holds the policy/value nets, optimizers and ``beta`` across batches."""

    def __init__(self, env: TrainingEnv, config: PpoConfig, seed, policy: Network | None = None):
        """``seed`` is anything ``np.random.default_rng`` accepts."""
        self.env = env
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.policy = policy.copy() if policy is not None else Network.create(policy_spec(config.hidden), self.rng)
        self.value_net = Network.create(value_spec(config.hidden), self.rng)
        self.policy_opt = Adam(config.learning_rate)
        self.value_opt = Adam(config.learning_rate)
        self.beta = config.initial_beta
        self.updates: list[UpdateStats] = []

    def train(
        self,
        episodes: int,
        report: TrainReport,
        after_update: Callable[["PpoTrainer"], bool] | None = None,
    ) -> TrainReport:
        """Run ``episodes`` episodes; ``after_update`` returning True stops early."""
        done_eps = 0
        while done_eps < episodes:
            batch, rets = collect_rollouts(
                self.policy, self.env, self.config.batch_size, self.rng, max_episodes=episodes - done_eps
            )
            done_eps += len(rets)
            stats = ppo_update(
                self.policy, self.value_net, batch, self.config, self.beta, self.rng,
                self.policy_opt, self.value_opt,
            )
            self.beta = stats.beta
            self.updates.append(stats)
            report.returns.extend(float(r) for r in rets)
            report.kl.extend([stats.kl] * len(rets))
            report.entropy.extend([stats.entropy] * len(rets))
            if after_update is not None and after_update(self):
                break
        return report


def train_ppo(env: TrainingEnv, config: PpoConfig, seed: int) -> tuple[Network, TrainReport]:
    trainer = PpoTrainer(env, config, seed)
    report = trainer.train(config.episodes, TrainReport("ppo"))
    report.final_cost = greedy_cost(trainer.policy, env.days, env.spec, env.normalizer)
    return trainer.policy, report
