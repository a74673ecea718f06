"""Posterior-sampling learner with dynamic episodes."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import bayes, mdp, whittle

LENGTH_RULE = "length_rule"
DOUBLING_RULE = "doubling_rule"
HORIZON_END = "horizon_end"


class EpisodeBoundViolation(RuntimeError):
    """The episode count exceeded its theoretical cap; the run is invalid."""


@dataclass(frozen=True)
class EpisodeRecord:
    k: int
    t_start: int
    length: int
    trigger: str
    sampled_model_seed: int  # spawn index of the rng substream used


@dataclass
class RunTrace:
    algorithm: str
    states: np.ndarray  # (T, n)
    actions: np.ndarray  # (T, n)
    rewards: np.ndarray  # (T,)
    episode_of_t: np.ndarray  # (T,)
    episodes: list
    cumulative_reward: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.cumulative_reward is None:
            self.cumulative_reward = np.cumsum(self.rewards)

    @property
    def horizon(self) -> int:
        return len(self.rewards)

    @property
    def num_episodes(self) -> int:
        return len(self.episodes)


def episode_count_bound(total_states: int, horizon: int) -> float:
    """Cap on the number of episodes: 2 * sqrt(sum_i S^i * T * ln T)."""
    return 2.0 * math.sqrt(total_states * horizon * math.log(horizon))


def episode_should_end(t, t_k, T_prev, visits_now, visits_at_tk):
    """Pure stopping predicate; doubling takes precedence in the label.

    Fires when the running episode is one step longer than the previous one,
    or when any tracked (arm, state, action) visit count has more than
    doubled since the episode started.
    """
    doubling = any(
        (np.asarray(now) > 2 * np.asarray(then)).any()
        for now, then in zip(visits_now, visits_at_tk)
    )
    if doubling:
        return True, DOUBLING_RULE
    if t - t_k > T_prev:
        return True, LENGTH_RULE
    return False, None


def _sample_tables(env, prior, seed_seq, spawn_counter, episode):
    """Sample a model and compute its Whittle tables; one retry on failure."""
    last_exc = None
    for attempt in range(2):
        sub = seed_seq.spawn(1)[0]
        spawn_counter[0] += 1
        rng = np.random.default_rng(sub)
        sampled = bayes.sample_model(prior, rng)
        try:
            if len(set(env.sizes)) == 1:
                W = whittle.whittle_indices_stack(
                    np.stack([p0 for p0, _ in sampled]),
                    np.stack([p1 for _, p1 in sampled]),
                    np.stack([r[:, 0] for r in env.rewards]),
                    np.stack([r[:, 1] for r in env.rewards]),
                )
                indices = tuple(W)
            else:
                indices = tuple(
                    whittle.whittle_indices(
                        bayes.sampled_arm(prior, i, sampled, env.rewards[i])
                    )
                    for i in range(env.num_arms)
                )
            return whittle.WhittleTable(indices=indices), spawn_counter[0] - 1
        except (whittle.DegenerateArmError, mdp.MultichainError) as exc:
            last_exc = exc
    raise RuntimeError(
        f"episode {episode}: whittle computation failed twice on sampled models: "
        f"{last_exc}"
    )


def run_tsde(env, prior: bayes.PosteriorState, T: int, seed,
             check_bound: bool = True) -> RunTrace:
    """Run the posterior-sampling learner for T steps against ``env``.

    Episodes end on the length rule (one step longer than the previous
    episode) or when a visit count more than doubles; each episode plays the
    Whittle policy of a fresh posterior sample. Deterministic in
    (env instance, prior, seed, T).
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    env_ss, learn_ss = ss.spawn(2)
    env_rng = np.random.default_rng(env_ss)
    n = env.num_arms
    total_states = sum(env.sizes)

    states = np.empty((T, n), dtype=np.int64)
    actions = np.empty((T, n), dtype=np.int64)
    rewards = np.empty(T)
    episode_of_t = np.empty(T, dtype=np.int64)
    episodes = []

    state = env.initial_state()
    visits = prior.visits
    snapshot = [v.copy() for v in visits]
    k = 0
    t_start = 0
    T_prev = 0
    doubling_flag = False
    tables = None
    model_seed = -1
    spawn_counter = [0]

    for t in range(1, T + 1):
        if doubling_flag or (t - t_start > T_prev):
            trigger = DOUBLING_RULE if doubling_flag else LENGTH_RULE
            if k >= 1:
                episodes.append(
                    EpisodeRecord(k, t_start, t - t_start, trigger, model_seed)
                )
                T_prev = t - t_start
            k += 1
            t_start = t
            snapshot = [v.copy() for v in visits]
            doubling_flag = False
            tables, model_seed = _sample_tables(env, prior, learn_ss, spawn_counter, k)
        a = whittle.select_actions(tables, state, env.budget)
        nxt, reward = env.step(state, a, env_rng)
        states[t - 1] = state
        actions[t - 1] = a
        rewards[t - 1] = reward
        episode_of_t[t - 1] = k
        for i in range(n):
            bayes.observe(prior, i, int(state[i]), int(a[i]), int(nxt[i]))
            if visits[i][state[i], a[i]] > 2 * snapshot[i][state[i], a[i]]:
                doubling_flag = True
        state = nxt
    episodes.append(EpisodeRecord(k, t_start, T + 1 - t_start, HORIZON_END, model_seed))

    if check_bound:
        bound = episode_count_bound(total_states, T)
        if k > bound:
            raise EpisodeBoundViolation(
                f"episode count {k} exceeds bound {bound:.1f}"
            )
        for prev, cur in zip(episodes, episodes[1:]):
            if cur.length > prev.length + 1:
                raise EpisodeBoundViolation(
                    f"episode {cur.k} length {cur.length} exceeds "
                    f"previous length {prev.length} + 1"
                )
    return RunTrace(
        algorithm="rb-tsde",
        states=states,
        actions=actions,
        rewards=rewards,
        episode_of_t=episode_of_t,
        episodes=episodes,
    )


def write_trace_csv(trace: RunTrace, csv_path, episodes_path=None) -> None:
    """Trace export: (t, episode, reward, cumulative_reward) plus episode JSON."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "episode", "reward", "cumulative_reward"])
        for t in range(trace.horizon):
            writer.writerow(
                [
                    t + 1,
                    int(trace.episode_of_t[t]),
                    repr(float(trace.rewards[t])),
                    repr(float(trace.cumulative_reward[t])),
                ]
            )
    if episodes_path is not None:
        doc = {
            "algorithm": trace.algorithm,
            "episodes": [
                {
                    "k": e.k,
                    "t_start": e.t_start,
                    "length": e.length,
                    "trigger": e.trigger,
                    "sampled_model_seed": e.sampled_model_seed,
                }
                for e in trace.episodes
            ],
        }
        with open(episodes_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
