"""Two-timescale Q-learning baseline that tracks Whittle indices online."""

from __future__ import annotations

import numpy as np

from .tsde import RunTrace

DIVERGENCE_FACTOR = 1e6


def select_by_estimates(values: np.ndarray, m: int) -> np.ndarray:
    """Top-m activation by current index estimates, ties to smallest arm id."""
    order = np.argsort(-values, kind="stable")
    actions = np.zeros(len(values), dtype=np.int64)
    actions[order[:m]] = 1
    return actions


def run_qwi(env, T: int, seed, step_fast: float = 0.3, step_slow: float = 0.1,
            epsilon: float = 0.1, q_init: float = 0.0) -> RunTrace:
    """Run the Q-learning index baseline for T steps.

    Per arm, one relative Q-table per anchor state learns the problem charged
    with that anchor's index estimate on the fast timescale; the estimate
    itself relaxes toward the anchor's action indifference point on the slow
    timescale. The slow update fires only for the anchor matching the arm's
    current state (so the estimate never integrates stale Q-differences
    between visits) and is projected onto the reward range, which contains
    every index. Actions activate the m largest current estimates with
    epsilon-greedy exploration. Deterministic in (env instance, seed).
    """
    if not (0.0 <= step_fast <= 1.0 and 0.0 <= step_slow <= 1.0):
        raise ValueError("step sizes must lie in [0, 1]")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    env_ss, explore_ss = ss.spawn(2)
    env_rng = np.random.default_rng(env_ss)
    explore_rng = np.random.default_rng(explore_ss)

    n = env.num_arms
    m = env.budget
    sizes = env.sizes
    r_max = max(float(np.max(np.abs(r))) for r in env.rewards)
    q_cap = DIVERGENCE_FACTOR * max(r_max, 1.0)
    # q[i] indexed [anchor, state, action]
    q = [np.full((S, S, 2), float(q_init)) for S in sizes]
    lam = [np.zeros(S) for S in sizes]
    lam_lo, lam_hi = -2.0 * r_max, 2.0 * r_max

    states = np.empty((T, n), dtype=np.int64)
    actions_log = np.empty((T, n), dtype=np.int64)
    rewards = np.empty(T)

    state = env.initial_state()
    for t in range(T):
        if explore_rng.random() < epsilon:
            chosen = explore_rng.permutation(n)[:m]
            actions = np.zeros(n, dtype=np.int64)
            actions[chosen] = 1
        else:
            values = np.array([lam[i][state[i]] for i in range(n)])
            actions = select_by_estimates(values, m)
        nxt, reward = env.step(state, actions, env_rng)
        for i in range(n):
            s, u, s_next = int(state[i]), int(actions[i]), int(nxt[i])
            r_i = env.rewards[i][s, u]
            target = (
                r_i
                - lam[i] * u
                + q[i][:, s_next, :].max(axis=-1)
                - q[i][:, 0, 0]
            )
            q[i][:, s, u] += step_fast * (target - q[i][:, s, u])
            lam[i][s] += step_slow * (q[i][s, s, 1] - q[i][s, s, 0])
            lam[i][s] = min(max(lam[i][s], lam_lo), lam_hi)
            if np.abs(q[i]).max() > q_cap:
                raise RuntimeError(
                    f"qwi diverged at t={t + 1}, arm {i}: |Q| exceeded "
                    f"{DIVERGENCE_FACTOR:g} * R_max"
                )
        states[t] = state
        actions_log[t] = actions
        rewards[t] = reward
        state = nxt
    return RunTrace(
        algorithm="qwi",
        states=states,
        actions=actions_log,
        rewards=rewards,
        episode_of_t=np.zeros(T, dtype=np.int64),
        episodes=[],
    )
