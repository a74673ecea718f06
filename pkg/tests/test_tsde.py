import csv
import json
import math

import numpy as np
import pytest

from rblab import bayes, envgen, simulate, tsde
from rblab.harness import _learner_prior


def make_env(kind="A", n=2, S=4, seed=0, known=(1,)):
    inst = envgen.make_environment(kind, n, S, np.random.default_rng(seed))
    return simulate.Simulator(inst, known_actions=known)


def test_episode_should_end_boundaries():
    zeros = [np.zeros((2, 2), dtype=int)]
    assert tsde.episode_should_end(5, 2, 3, zeros, zeros) == (False, None)
    done, trigger = tsde.episode_should_end(6, 2, 3, zeros, zeros)
    assert done and trigger == tsde.LENGTH_RULE


def test_episode_should_end_doubling_strict():
    then = [np.array([[2, 0], [0, 0]])]
    now_eq = [np.array([[4, 0], [0, 0]])]
    assert tsde.episode_should_end(3, 2, 9, now_eq, then) == (False, None)
    now_over = [np.array([[5, 0], [0, 0]])]
    assert tsde.episode_should_end(3, 2, 9, now_over, then)[1] == tsde.DOUBLING_RULE


def test_episode_should_end_zero_visit_trigger():
    then = [np.zeros((2, 2), dtype=int)]
    now = [np.array([[1, 0], [0, 0]])]
    assert tsde.episode_should_end(3, 2, 9, now, then)[1] == tsde.DOUBLING_RULE


def test_doubling_takes_precedence_over_length():
    then = [np.zeros((2, 2), dtype=int)]
    now = [np.array([[1, 0], [0, 0]])]
    done, trigger = tsde.episode_should_end(10, 2, 3, now, then)
    assert done and trigger == tsde.DOUBLING_RULE


def test_episode_count_bound_formula():
    assert tsde.episode_count_bound(6, 5000) == pytest.approx(
        2.0 * math.sqrt(6 * 5000 * math.log(5000))
    )


def test_run_tsde_episode_structure():
    env = make_env()
    trace = tsde.run_tsde(env, _learner_prior(env), 1000, 7)
    assert trace.horizon == 1000
    assert trace.episodes[0].length == 1  # T_0 = 0 fires immediately
    lens = [e.length for e in trace.episodes]
    assert sum(lens) == 1000
    for prev, cur in zip(lens, lens[1:]):
        assert cur <= prev + 1
    assert trace.num_episodes <= tsde.episode_count_bound(8, 1000)
    assert trace.episodes[-1].trigger == tsde.HORIZON_END
    assert all(
        e.trigger in (tsde.LENGTH_RULE, tsde.DOUBLING_RULE)
        for e in trace.episodes[:-1]
    )


def test_run_tsde_deterministic():
    t1 = tsde.run_tsde(make_env(seed=1), _learner_prior(make_env(seed=1)), 400, 5)
    t2 = tsde.run_tsde(make_env(seed=1), _learner_prior(make_env(seed=1)), 400, 5)
    assert np.array_equal(t1.rewards, t2.rewards)
    assert np.array_equal(t1.states, t2.states)
    assert t1.episodes == t2.episodes


def test_run_tsde_distinct_seeds_differ():
    env_a = make_env(seed=2)
    env_b = make_env(seed=2)
    t1 = tsde.run_tsde(env_a, _learner_prior(env_a), 400, 5)
    t2 = tsde.run_tsde(env_b, _learner_prior(env_b), 400, 6)
    assert not np.array_equal(t1.actions, t2.actions)


def test_cumulative_reward_non_decreasing():
    env = make_env(kind="B", seed=3)
    trace = tsde.run_tsde(env, _learner_prior(env), 500, 9)
    assert np.all(np.diff(trace.cumulative_reward) >= 0.0)
    assert trace.cumulative_reward[-1] == pytest.approx(trace.rewards.sum())


def test_learner_never_touches_hidden_dynamics():
    # an environment disclosing nothing still runs when the prior learns both
    # actions; asking for a known matrix raises instead of leaking
    inst = envgen.make_environment("A", 2, 3, np.random.default_rng(4))
    env = simulate.Simulator(inst, known_actions=())
    with pytest.raises(PermissionError):
        env.known_matrix(0, 1)
    prior = bayes.init_prior(env.sizes, learned_actions=(0, 1))
    trace = tsde.run_tsde(env, prior, 300, 11)
    assert trace.horizon == 300


def test_posterior_counts_match_trace():
    env = make_env(seed=5)
    prior = _learner_prior(env)
    trace = tsde.run_tsde(env, prior, 600, 13)
    assert bayes.check_count_invariants(prior) == []
    assert int(prior.steps.sum()) == 600 * env.num_arms


def test_write_trace_csv(tmp_path):
    env = make_env(seed=6)
    trace = tsde.run_tsde(env, _learner_prior(env), 50, 3)
    csv_path = tmp_path / "trace.csv"
    ep_path = tmp_path / "episodes.json"
    tsde.write_trace_csv(trace, csv_path, ep_path)
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "episode", "reward", "cumulative_reward"]
    assert len(rows) == 51
    assert float(rows[-1][3]) == pytest.approx(trace.cumulative_reward[-1])
    doc = json.loads(ep_path.read_text())
    assert doc["algorithm"] == "rb-tsde"
    assert len(doc["episodes"]) == trace.num_episodes
