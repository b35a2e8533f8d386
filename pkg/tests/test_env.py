import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hems.env import (
    ApplianceSpec,
    DayProfile,
    EnvState,
    HomeEnergyEnv,
    Snapshot,
    force_action,
    hourly_reward,
    replay,
    reset,
    step,
)
from hems.errors import ValidationError

from conftest import random_day, toy_day


def test_appliance_defaults():
    s = ApplianceSpec()
    assert s.rated_power == 1.0 and s.required_hours == 2


@pytest.mark.parametrize("kw", [dict(rated_power=0.0), dict(required_hours=0), dict(required_hours=25)])
def test_appliance_invalid(kw):
    with pytest.raises(ValidationError):
        ApplianceSpec(**kw)


def test_reset_initial_state(day, spec):
    s = reset(day, spec)
    assert s.hour == 0 and s.remaining_task == 2
    assert (s.price_obs, s.background_obs, s.renewable_obs) == (day.price[0], day.background[0], day.renewable[0])
    assert reset(day, spec) == s


def test_profile_wrong_length_rejected(day):
    with pytest.raises(ValidationError):
        DayProfile(day.date, day.price[:23], day.background[:23], day.renewable[:23])


def test_profile_negative_rejected(day):
    price = list(day.price)
    price[5] = -0.01
    with pytest.raises(ValidationError):
        DayProfile(day.date, price, day.background, day.renewable)


@pytest.mark.parametrize(
    "hour,remaining,requested,expected",
    [(22, 2, 0, 1), (23, 1, 0, 1), (10, 2, 0, 0), (10, 2, 1, 1), (23, 0, 0, 0)],
)
def test_force_action(hour, remaining, requested, expected):
    s = EnvState(0.1, 0.0, 0.0, remaining, hour)
    assert force_action(s, requested) == expected


def test_force_action_terminal():
    with pytest.raises(ValidationError):
        force_action(EnvState(0.1, 0.0, 0.0, 0, 24), 0)


@pytest.mark.parametrize(
    "args,expected",
    [((0.10, 1.0, 0.5, 0.2), -0.13), ((0.10, 0.0, 0.3, 1.0), 0.0), ((0.0, 1.0, 1.0, 0.0), 0.0)],
)
def test_hourly_reward(args, expected):
    assert hourly_reward(*args) == pytest.approx(expected, abs=1e-15)


def test_hourly_reward_negative_input():
    with pytest.raises(ValidationError):
        hourly_reward(0.1, -1.0, 0.0, 0.0)


def test_step_decrements(day, spec):
    s = EnvState(day.price[5], day.renewable[5], day.background[5], 2, 5)
    out = step(s, 1, day, spec)
    assert out.next_state.hour == 6 and out.next_state.remaining_task == 1
    assert out.effective_action == 1 and not out.done


def test_step_task_done_is_noop(day, spec):
    s = EnvState(day.price[5], day.renewable[5], day.background[5], 0, 5)
    on, off = step(s, 1, day, spec), step(s, 0, day, spec)
    assert on.next_state.remaining_task == 0
    assert on.reward == off.reward and on.effective_action == 0


def test_all_zero_actions_run_last_two_hours(day, spec):
    run = replay(day, spec, [0] * 24)
    on_hours = [h for h, a in enumerate(run.actions) if a]
    assert on_hours == [22, 23]


def test_terminal_state_repeats_last_observation(day, spec):
    run = replay(day, spec, [1] * 24)
    last = run.states[-1]
    assert last.hour == 24 and last.price_obs == day.price[23]


def test_step_terminal_raises(day, spec):
    with pytest.raises(ValidationError):
        step(EnvState(0.1, 0.0, 0.0, 0, 24), 0, day, spec)


def test_episode_return_is_negative_bill(day, spec):
    rng = np.random.default_rng(0)
    acts = rng.integers(0, 2, 24).tolist()
    run = replay(day, spec, acts)
    bill = 0.0
    for h, a in enumerate(run.actions):
        bill += day.price[h] * max(a * spec.rated_power + day.background[h] - day.renewable[h], 0.0)
    assert sum(run.rewards) == pytest.approx(-bill, rel=1e-12)
    assert sum(run.actions) == spec.required_hours


def test_snapshot_restore_round_trip(day, spec):
    env = HomeEnergyEnv(spec)
    env.reset(day)
    for a in [0, 0, 1, 0]:
        env.step(a)
    snap = env.snapshot()
    tail = [0, 1, 0, 0, 1, 1]
    first = [env.step(a) for a in tail]
    env.restore(snap)
    second = [env.step(a) for a in tail]
    assert first == second


def test_snapshot_at_hour_zero_matches_reset(day, spec):
    env = HomeEnergyEnv(spec)
    s = env.reset(day)
    snap = env.snapshot()
    assert snap.env_state == s == reset(day, spec)
    assert snap.accrued_cost == 0.0


def test_restore_unknown_day(spec, day):
    env = HomeEnergyEnv(spec)
    with pytest.raises(ValidationError):
        env.restore(Snapshot(reset(day, spec), "1999-01-01"))


def test_short_horizon_forcing():
    d = toy_day()
    spec = ApplianceSpec(required_hours=2)
    assert replay(d, spec, [0, 0, 0, 0]).actions == [0, 0, 1, 1]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), req=st.integers(1, 4), split=st.integers(0, 24))
def test_snapshot_replay_identity_property(seed, req, split):
    rng = np.random.default_rng(seed)
    d = random_day(rng, 24)
    spec = ApplianceSpec(required_hours=req)
    acts = rng.integers(0, 2, 24).tolist()
    env = HomeEnergyEnv(spec)
    env.reset(d)
    for a in acts[:split]:
        env.step(a)
    snap = env.snapshot()
    tail1 = [env.step(a) for a in acts[split:]]
    cost1 = env.accrued_cost
    env.restore(snap)
    tail2 = [env.step(a) for a in acts[split:]]
    assert tail1 == tail2 and env.accrued_cost == cost1
    assert all(o.reward <= 0 for o in tail1)
