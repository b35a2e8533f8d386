import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hems.env import ApplianceSpec, DayProfile, replay
from hems.errors import ValidationError
from hems.oracle import brute_force, random_policy_costs, solve_day

from conftest import random_day, toy_day


def _enumerate_by_hand(day, spec):
    # independent of both oracles: every request sequence through the simulator
    best = None
    for seq in itertools.product((0, 1), repeat=day.hours):
        run = replay(day, spec, seq)
        if best is None or run.total_cost < best[0]:
            best = (run.total_cost, run.actions)
    return best


def test_toy_day_optimum():
    d = toy_day()
    spec = ApplianceSpec()
    hand_cost, hand_actions = _enumerate_by_hand(d, spec)
    assert hand_cost == pytest.approx(0.30, abs=1e-12)
    assert hand_actions == [1, 0, 1, 0]
    res = solve_day(d, spec)
    assert res.optimal_cost == pytest.approx(0.30, abs=1e-12)
    assert res.optimal_actions == [1, 0, 1, 0]
    assert res.value_table[4, 0] == 0.0
    assert replay(d, spec, res.optimal_actions).total_cost == res.optimal_cost


def test_zero_prices_cost_zero():
    d = toy_day(prices=[0.0] * 6)
    assert solve_day(d, ApplianceSpec()).optimal_cost == 0.0


def test_renewable_surplus_costs_zero(spec):
    d = toy_day(prices=[0.3] * 5, background=[0.5] * 5, renewable=[1.5] * 5)
    assert solve_day(d, spec).optimal_cost == 0.0
    # every schedule is optimal: tie-break runs as late as possible
    assert solve_day(d, spec).optimal_actions == [0, 0, 0, 1, 1]
    assert brute_force(d, spec).optimal_actions == [0, 0, 0, 1, 1]


def test_one_hour_day():
    d = toy_day(prices=[0.2], background=[0.5], renewable=[0.1])
    res = brute_force(d, ApplianceSpec(required_hours=1))
    assert res.optimal_actions == [1]
    assert res.optimal_cost == pytest.approx(0.2 * 1.4)


def test_required_equals_horizon():
    d = toy_day(prices=[0.1, 0.2, 0.3])
    spec = ApplianceSpec(required_hours=3)
    assert brute_force(d, spec).optimal_actions == [1, 1, 1]
    assert solve_day(d, spec).optimal_actions == [1, 1, 1]


def test_brute_force_horizon_limit():
    d = DayProfile("2021-05-01", [0.1] * 17, [0.0] * 17, [0.0] * 17, hours=17)
    with pytest.raises(ValidationError):
        brute_force(d, ApplianceSpec())


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), hours=st.integers(4, 10), req=st.integers(1, 3))
def test_dp_matches_brute_force(seed, hours, req):
    d = random_day(np.random.default_rng(seed), hours)
    spec = ApplianceSpec(required_hours=req)
    a, b = solve_day(d, spec), brute_force(d, spec)
    assert a.optimal_cost == b.optimal_cost
    assert a.optimal_actions == b.optimal_actions
    np.testing.assert_allclose(a.value_table, b.value_table, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), hour=st.integers(0, 23), bump=st.floats(0.0, 0.5))
def test_raising_a_price_never_lowers_optimum(seed, hour, bump):
    rng = np.random.default_rng(seed)
    d = random_day(rng, 24)
    price = list(d.price)
    price[hour] += bump
    d2 = DayProfile(d.date, price, d.background, d.renewable)
    spec = ApplianceSpec()
    assert solve_day(d2, spec).optimal_cost >= solve_day(d, spec).optimal_cost - 1e-12


def test_oracle_lower_bounds_random_rollouts(day, spec):
    opt = solve_day(day, spec).optimal_cost
    costs = random_policy_costs(day, spec, 2000, np.random.default_rng(0))
    assert costs.min() >= opt - 1e-12


def test_result_json_round(day, spec):
    d = solve_day(day, spec).to_dict(day.date)
    assert d["date"] == day.date and len(d["optimal_actions"]) == 24
    assert d["value_table"][24][0] == 0.0 and d["value_table"][24][1] is None
