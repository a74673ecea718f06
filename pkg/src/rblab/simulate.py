"""Environment simulator and vectorized index-policy rollouts."""

from __future__ import annotations

import numpy as np

from .arms import BanditInstance


class Simulator:
    """Steps the true dynamics while hiding them from learners.

    Learner-visible surface: ``num_arms``, ``budget``, ``reward_model``,
    ``sizes``, ``rewards`` (per-arm (S, 2) tables), ``known_matrix`` for
    actions listed in ``known_actions``, ``initial_state`` and ``step``.
    """

    def __init__(self, instance: BanditInstance, known_actions=()):
        self._instance = instance
        self.num_arms = instance.num_arms
        self.budget = instance.budget
        self.reward_model = instance.reward_model
        self.sizes = instance.sizes
        self.rewards = [arm.rewards() for arm in instance.arms]
        self.known_actions = tuple(known_actions)
        self._cum = [
            np.stack([np.cumsum(arm.p_passive, axis=1), np.cumsum(arm.p_active, axis=1)])
            for arm in instance.arms
        ]
        for c in self._cum:
            c[:, :, -1] = 1.0

    def known_matrix(self, arm: int, action: int) -> np.ndarray:
        if action not in self.known_actions:
            raise PermissionError(f"action {action} dynamics are hidden from the learner")
        return self._instance.arms[arm].transition(action).copy()

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.num_arms, dtype=np.int64)

    def step(self, state, actions, rng: np.random.Generator):
        state = np.asarray(state, dtype=int)
        actions = np.asarray(actions, dtype=int)
        u = rng.random(self.num_arms)
        nxt = np.empty(self.num_arms, dtype=np.int64)
        reward = 0.0
        for i in range(self.num_arms):
            row = self._cum[i][actions[i], state[i]]
            nxt[i] = np.searchsorted(row, u[i], side="right")
            reward += self.rewards[i][state[i], actions[i]]
        return nxt, reward


def batched_index_rollout(cum, index_tables, reward_tables, m, horizon, reps,
                          rng: np.random.Generator, burn_in=None):
    """Average per-step reward of fixed index policies, batched over paths.

    ``cum`` is (P, n, 2, S, S) cumulative transition rows, ``index_tables``
    (P, n, S), ``reward_tables`` (P, n, S, 2). All paths start from state 0.
    Returns (gain (P,), stderr (P,)) with stderr taken across the ``reps``
    independent chains per path.
    """
    P, n, _, S, _ = cum.shape
    if burn_in is None:
        burn_in = horizon // 10
    p_ix = np.arange(P)[:, None, None]
    a_ix = np.arange(n)[None, None, :]
    state = np.zeros((P, reps, n), dtype=np.int64)
    totals = np.zeros((P, reps))
    for t in range(burn_in + horizon):
        vals = index_tables[p_ix, a_ix, state]  # (P, reps, n)
        if m == 1:
            actions = np.zeros((P, reps, n), dtype=np.int64)
            np.put_along_axis(
                actions, vals.argmax(axis=-1, keepdims=True), 1, axis=-1
            )
        else:
            order = np.argsort(-vals, axis=-1, kind="stable")
            actions = np.zeros((P, reps, n), dtype=np.int64)
            np.put_along_axis(actions, order[..., :m], 1, axis=-1)
        if t >= burn_in:
            totals += reward_tables[p_ix, a_ix, state, actions].sum(axis=-1)
        rows = cum[p_ix, a_ix, actions, state]  # (P, reps, n, S)
        u = rng.random((P, reps, n))
        state = (rows < u[..., None]).sum(axis=-1)
    means = totals / horizon  # (P, reps)
    gain = means.mean(axis=1)
    stderr = means.std(axis=1, ddof=1) / np.sqrt(reps) if reps > 1 else np.zeros(P)
    return gain, stderr


def rollout_arrays(instances, tables_list):
    """Pack instances and their index tables into batched rollout arrays."""
    P = len(instances)
    n = instances[0].num_arms
    S = instances[0].sizes[0]
    for inst in instances:
        if inst.num_arms != n or set(inst.sizes) != {S}:
            raise ValueError("batched rollout needs homogeneous instance shapes")
    cum = np.empty((P, n, 2, S, S))
    W = np.empty((P, n, S))
    R = np.empty((P, n, S, 2))
    for p, (inst, tables) in enumerate(zip(instances, tables_list)):
        for i, arm in enumerate(inst.arms):
            cum[p, i, 0] = np.cumsum(arm.p_passive, axis=1)
            cum[p, i, 1] = np.cumsum(arm.p_active, axis=1)
            W[p, i] = tables.indices[i]
            R[p, i] = arm.rewards()
    cum[:, :, :, :, -1] = 1.0
    return cum, W, R
