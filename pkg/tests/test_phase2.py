import numpy as np
import pytest

from hems.env import ApplianceSpec, observe
from hems.errors import ValidationError
from hems.goexplore import demonstration_from_actions, run_phase1
from hems.phase2 import CloningEnv, Phase2Config, alignment, cloning_reward, robustify, train_clone
from hems.ppo import PpoConfig, PpoTrainer
from hems.rl import Normalizer, greedy_rollout

from conftest import toy_day


@pytest.fixture(scope="module")
def setup(month):
    spec = ApplianceSpec()
    day = month[0]
    return day, spec, Normalizer.fit([day], spec), run_phase1(day, spec, 0).demonstration


def test_reward_cases(setup):
    day, spec, _, demo = setup
    t = 5
    assert cloning_reward(demo.states[t], t, demo) == 1
    s = demo.states[t]
    off = observe(day, s.hour, s.remaining_task - 1 if s.remaining_task else 1)
    assert cloning_reward(off, t, demo) == 0
    with pytest.raises(ValidationError):
        cloning_reward(s, 0, demo)
    with pytest.raises(ValidationError):
        cloning_reward(s, 25, demo)


def test_replaying_demo_scores_full_return(setup):
    day, spec, norm, demo = setup
    env = CloningEnv(demo, day, spec, norm)
    env.reset()
    total = 0.0
    for a in demo.actions:
        _, r, done, _ = env.step(a)
        total += r
    assert done and total == 24.0


def test_env_rejects_foreign_demo(month, setup):
    _, spec, norm, demo = setup
    with pytest.raises(ValidationError):
        CloningEnv(demo, month[1], spec, norm)


def test_cloning_reward_ignores_prices(setup):
    day, spec, norm, demo = setup
    from hems.env import DayProfile

    pricier = DayProfile(day.date, [p * 10 for p in day.price], day.background, day.renewable)
    env_a, env_b = CloningEnv(demo, day, spec, norm), CloningEnv(demo, pricier, spec, norm)
    env_a.reset(), env_b.reset()
    rng = np.random.default_rng(0)
    for _ in range(24):
        a = int(rng.integers(0, 2))
        assert env_a.step(a)[1] == env_b.step(a)[1]


def test_zero_budget_returns_untrained_with_warning(setup):
    day, spec, norm, demo = setup
    init = PpoTrainer(CloningEnv(demo, day, spec, norm), PpoConfig(), 4).policy
    pol, rep = train_clone(demo, day, spec, norm, PpoConfig(), 4, episodes=0)
    for (a, _), (b, _) in zip(pol.params, init.params):
        assert np.array_equal(a, b)
    if alignment(pol, demo, day, spec, norm) < 24:
        assert rep.warning and "budget" in rep.warning


def test_robustify_zero_budget_unchanged(setup):
    day, spec, norm, demo = setup
    pol, _ = train_clone(demo, day, spec, norm, PpoConfig(), 0, episodes=3)
    out, rep = robustify(pol, day, spec, norm, PpoConfig(), 0, episodes=0)
    for (a, _), (b, _) in zip(out.params, pol.params):
        assert np.array_equal(a, b)
    assert rep.final_cost == greedy_rollout(pol, day, spec, norm).total_cost


def test_robustify_never_worse(setup):
    day, spec, norm, demo = setup
    pol, rep = train_clone(demo, day, spec, norm, PpoConfig(), 0, episodes=9)
    out, rrep = robustify(pol, day, spec, norm, PpoConfig(), 0, episodes=9)
    assert rrep.final_cost <= rep.final_cost + 1e-6
    assert greedy_rollout(out, day, spec, norm).total_cost == rrep.final_cost
    assert rrep.phase == "robustify" and rep.phase == "clone"


def test_toy_day_clone_matches_demo_cost():
    d = toy_day()
    spec = ApplianceSpec()
    norm = Normalizer.fit([d], spec)
    demo = demonstration_from_actions(d, spec, [1, 0, 1, 0])
    pol, rep = train_clone(demo, d, spec, norm, PpoConfig(), 0, episodes=300)
    assert alignment(pol, demo, d, spec, norm) == 4 and rep.warning is None
    assert rep.final_cost == demo.total_cost


def test_phase2_config_validation():
    with pytest.raises(ValidationError):
        Phase2Config(clone_episodes=-1)


def test_restarts_split_the_budget(setup):
    day, spec, norm, demo = setup
    a, rep = train_clone(demo, day, spec, norm, PpoConfig(), 1, episodes=12, attempt_episodes=3)
    b, rep2 = train_clone(demo, day, spec, norm, PpoConfig(), 1, episodes=12, attempt_episodes=3)
    if rep.warning:
        assert rep.restarts == 3 and len(rep.returns) == 12
    assert rep.to_csv() == rep2.to_csv() and rep.restarts == rep2.restarts
    for (w1, _), (w2, _) in zip(a.params, b.params):
        assert np.array_equal(w1, w2)


def test_restart_config_validation():
    with pytest.raises(ValidationError):
        Phase2Config(clone_attempt_episodes=0)
    assert Phase2Config(clone_attempt_episodes=None).clone_attempt_episodes is None
    with pytest.raises(ValidationError):
        Phase2Config(clone_kl_stop_factor=-1.0)
