"""DQN baseline: uniform replay, periodic hard target sync, linear epsilon decay."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hems.errors import NumericalError, ValidationError
from hems.nn import Adam, MlpSpec, Network, backward_logits, copy_params, forward_cache
from hems.rl import OBS_DIM, TrainReport, TrainingEnv, greedy_cost


@dataclass
class DqnConfig:
    episodes: int = 5000
    learning_rate: float = 0.001
    discount: float = 1.0
    batch_size: int = 64
    hidden: tuple[int, ...] = (32, 32, 16)
    replay_capacity: int = 10000
    target_sync_interval: int = 100
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.episodes < 0:
            raise ValidationError("episodes must be >= 0")
        for name in ("learning_rate", "batch_size", "replay_capacity", "target_sync_interval"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if not (0 <= self.discount <= 1):
            raise ValidationError("discount must be in [0, 1]")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay_fraction"):
            if not (0 <= getattr(self, name) <= 1):
                raise ValidationError(f"{name} must be in [0, 1]")


def q_spec(hidden) -> MlpSpec:
    return MlpSpec(OBS_DIM, tuple(hidden), 2, head="linear-q")


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored in flat arrays."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM):
        if capacity < 1:
            raise ValidationError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, done) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def oldest_index(self) -> int:
        return self._next if self.size == self.capacity else 0

    def sample(self, rng: np.random.Generator, n: int):
        idx = rng.integers(0, self.size, size=n)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]


def td_target(reward: float, next_state, done: bool, target_net: Network, discount: float) -> float:
    if done:
        return float(reward)
    return float(reward + discount * np.max(target_net(next_state)))


def td_targets(rewards, next_states, dones, target_net: Network, discount: float) -> np.ndarray:
    q_next = target_net(next_states).max(axis=1)
    return rewards + discount * np.where(dones, 0.0, q_next)


def epsilon_at(step: int, total_steps: int, start: float, end: float, decay_fraction: float) -> float:
    window = decay_fraction * total_steps
    if step >= window:
        return end
    return start + (end - start) * (step / window)


def train_dqn(env: TrainingEnv, config: DqnConfig, seed: int) -> tuple[Network, TrainReport]:
    rng = np.random.default_rng(seed)
    q = Network.create(q_spec(config.hidden), rng)
    target = q.copy()
    opt = Adam(config.learning_rate)
    buf = ReplayBuffer(config.replay_capacity)
    report = TrainReport("dqn")
    total_steps = config.episodes * env.horizon
    t = 0
    for _ in range(config.episodes):
        obs = env.reset()
        done, ret = False, 0.0
        eps = epsilon_at(t, total_steps, config.epsilon_start, config.epsilon_end, config.epsilon_decay_fraction)
        while not done:
            e = epsilon_at(t, total_steps, config.epsilon_start, config.epsilon_end, config.epsilon_decay_fraction)
            if rng.random() < e:
                a = int(rng.integers(0, 2))
            else:
                a = q.greedy(obs)
            nxt, r, done, _ = env.step(a)
            buf.add(obs, a, r, nxt, done)
            ret += r
            obs = nxt
            t += 1
            if len(buf) >= config.batch_size:
                _learn(q, target, opt, buf, rng, config)
            if t % config.target_sync_interval == 0:
                target.params = copy_params(q.params)
        report.returns.append(float(ret))
        report.epsilon.append(float(eps))
    report.final_cost = greedy_cost(q, env.days, env.spec, env.normalizer)
    return q, report


def _learn(q: Network, target: Network, opt: Adam, buf: ReplayBuffer, rng, config: DqnConfig) -> float:
    s, a, r, s2, d = buf.sample(rng, config.batch_size)
    y = td_targets(r, s2, d, target, config.discount)
    acts, out = forward_cache(q.params, q.spec, s)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite Q-values")
    n = len(a)
    idx = np.arange(n)
    err = out[idx, a] - y
    loss = 0.5 * float(np.mean(err**2))
    if not math.isfinite(loss):
        raise NumericalError("non-finite DQN loss")
    g = np.zeros_like(out)
    g[idx, a] = err / n
    opt.step(q.params, backward_logits(q.params, acts, g))
    return loss
