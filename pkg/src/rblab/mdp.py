"""Average-reward policy evaluation and exact small-scale MDP solvers.

Single-arm evaluation solves the gain/bias linear system; the joint-chain
solvers are test oracles and guarded to tiny state spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .arms import BanditInstance

BELLMAN_TOL = 1e-9
RCOND_MIN = 1e-13
JOINT_POLICY_MAX_STATES = 10**4
JOINT_OPTIMAL_MAX = 10**5


class MultichainError(ValueError):
    """Raised when a policy induces a singular (multichain/degenerate) system."""


@dataclass(frozen=True)
class EvalResult:
    gain: float
    bias: np.ndarray  # normalized so bias[0] == 0


def _policy_matrix_reward(arm, actions):
    actions = np.asarray(actions, dtype=int)
    act = actions.astype(bool)
    P = np.where(act[:, None], arm.p_active, arm.p_passive)
    r = np.where(act, arm.r_active, arm.r_passive)
    return P, r


def gain_bias(P: np.ndarray, r: np.ndarray, what: str = "policy") -> EvalResult:
    """Solve J + D(s) = r(s) + <P_s, D> with D(0) = 0.

    Raises MultichainError when the normalized system is singular or badly
    conditioned (reciprocal condition below 1e-13).
    """
    S = P.shape[0]
    A = np.empty((S, S))
    A[:, 0] = 1.0
    if S > 1:
        A[:, 1:] = np.eye(S)[:, 1:] - P[:, 1:]
    try:
        x = np.linalg.solve(A, r)
    except np.linalg.LinAlgError as exc:
        raise MultichainError(f"multichain or degenerate {what}") from exc
    if S <= 400 and 1.0 / np.linalg.cond(A) < RCOND_MIN:
        raise MultichainError(f"multichain or degenerate {what}")
    bias = np.concatenate([[0.0], x[1:]])
    res = np.abs(x[0] + bias - r - P @ bias).max()
    if not np.isfinite(res) or res > BELLMAN_TOL:
        raise MultichainError(f"multichain or degenerate {what} (residual {res:.2e})")
    return EvalResult(gain=float(x[0]), bias=bias)


def gain_bias_batch(Ps: np.ndarray, rs: np.ndarray) -> tuple:
    """Batched gain/bias solve: Ps is (C, S, S), rs is (C, S, k).

    Returns (gains (C, k), biases (C, S, k)); raises MultichainError on a
    singular batch member.
    """
    C, S, _ = Ps.shape
    A = np.broadcast_to(np.eye(S), (C, S, S)).copy()
    A -= Ps
    A[:, :, 0] = 1.0
    try:
        x = np.linalg.solve(A, rs)
    except np.linalg.LinAlgError as exc:
        raise MultichainError("multichain or degenerate policy in batch") from exc
    if not np.isfinite(x).all():
        raise MultichainError("multichain or degenerate policy in batch")
    gains = x[:, 0, :]
    biases = x.copy()
    biases[:, 0, :] = 0.0
    return gains, biases


def evaluate_reward(arm, policy) -> EvalResult:
    """Gain and differential reward of a Markov policy on one arm."""
    P, r = _policy_matrix_reward(arm, policy)
    return gain_bias(P, r, what=f"policy {np.asarray(policy, dtype=int).tolist()}")


def evaluate_activity(arm, policy) -> EvalResult:
    """Gain and differential count of active selections under a policy."""
    P, _ = _policy_matrix_reward(arm, policy)
    pi = np.asarray(policy, dtype=float)
    return gain_bias(P, pi, what=f"policy {np.asarray(policy, dtype=int).tolist()}")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of a unichain stochastic matrix."""
    P = np.asarray(P, dtype=float)
    S = P.shape[0]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    b = np.zeros(S)
    b[-1] = 1.0
    try:
        xi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise MultichainError("matrix has multiple closed classes") from exc
    if 1.0 / np.linalg.cond(A) < RCOND_MIN or xi.min() < -1e-10:
        raise MultichainError("matrix has multiple closed classes")
    xi = np.clip(xi, 0.0, None)
    xi /= xi.sum()
    if np.abs(xi @ P - xi).max() > 1e-12:
        raise MultichainError("stationary residual exceeds tolerance")
    return xi


def optimal_policy_average(P: np.ndarray, r: np.ndarray, tie_tol: float = 1e-12):
    """Optimal deterministic policy of a 2-action average-reward MDP.

    ``P`` is (2, S, S) indexed by action, ``r`` is (S, 2). Policy iteration
    starting from all-passive; ties in the improvement step resolve to the
    passive action. Returns (actions, EvalResult of the optimal policy).
    """
    S = P.shape[1]
    actions = np.zeros(S, dtype=int)
    seen = set()
    for _ in range(200):
        Ppi = np.where(actions[:, None].astype(bool), P[1], P[0])
        rpi = r[np.arange(S), actions]
        res = gain_bias(Ppi, rpi)
        q0 = r[:, 0] + P[0] @ res.bias
        q1 = r[:, 1] + P[1] @ res.bias
        new_actions = (q1 > q0 + tie_tol).astype(int)
        if np.array_equal(new_actions, actions):
            return actions, res
        key = new_actions.tobytes()
        if key in seen:
            # equal-gain cycle at an indifference point; either policy is optimal
            return actions, res
        seen.add(key)
        actions = new_actions
    raise MultichainError("policy iteration failed to converge")


def _joint_states(sizes):
    return list(product(*[range(s) for s in sizes]))


def _joint_row(instance, state, action_vec, states, index):
    """One row of the joint transition matrix via successive outer products."""
    row = np.array([1.0])
    for i, arm in enumerate(instance.arms):
        p = arm.transition(int(action_vec[i]))[state[i]]
        row = np.multiply.outer(row, p).ravel()
    return row


def build_joint_chain(instance: BanditInstance, action_fn):
    """Joint chain (P, r) under a stationary joint policy.

    ``action_fn(state_tuple) -> binary action vector``. Reward follows the
    instance's reward model (Model B instances have r_passive == 0 already).
    """
    sizes = instance.sizes
    states = _joint_states(sizes)
    N = len(states)
    index = {s: i for i, s in enumerate(states)}
    P = np.empty((N, N))
    r = np.empty(N)
    for i, s in enumerate(states):
        a = action_fn(s)
        P[i] = _joint_row(instance, s, a, states, index)
        r[i] = sum(
            instance.arms[j].reward(int(a[j]))[s[j]] for j in range(len(sizes))
        )
    return P, r, states


def joint_policy_gain(instance: BanditInstance, tables) -> float:
    """Exact long-run average reward of the Whittle index policy (oracle scale)."""
    from .whittle import select_actions

    N = int(np.prod(instance.sizes))
    if N > JOINT_POLICY_MAX_STATES:
        raise ValueError(
            f"joint space {N} exceeds {JOINT_POLICY_MAX_STATES}; "
            "use harness.estimate_baseline_gain with method='long_rollout'"
        )
    P, r, _ = build_joint_chain(
        instance,
        lambda s: select_actions(tables, np.asarray(s), instance.budget),
    )
    return gain_bias(P, r, what="whittle joint policy").gain


def joint_optimal_gain(instance: BanditInstance, span_tol: float = 1e-10,
                       max_sweeps: int = 10**6):
    """Optimal average reward over the feasible joint action set.

    Relative value iteration with span-seminorm stopping, value anchored at
    joint state 0; returns (gain of the exactly evaluated greedy policy,
    greedy policy as a dict state-tuple -> action vector).
    """
    n = instance.num_arms
    sizes = instance.sizes
    actions = [
        tuple(1 if i in c else 0 for i in range(n))
        for c in combinations(range(n), instance.budget)
    ]
    N = int(np.prod(sizes))
    if N * len(actions) > JOINT_OPTIMAL_MAX:
        raise ValueError(
            f"joint problem size {N * len(actions)} exceeds {JOINT_OPTIMAL_MAX}"
        )
    states = _joint_states(sizes)
    index = {s: i for i, s in enumerate(states)}
    A = len(actions)
    P = np.empty((A, N, N))
    r = np.empty((A, N))
    for ai, a in enumerate(actions):
        for si, s in enumerate(states):
            P[ai, si] = _joint_row(instance, s, a, states, index)
            r[ai, si] = sum(instance.arms[j].reward(a[j])[s[j]] for j in range(n))
    # aperiodicity transform: preserves gain and greedy policy, rescales bias
    P = 0.5 * (P + np.eye(N))
    r = 0.5 * r
    h = np.zeros(N)
    span = np.inf
    for _ in range(max_sweeps):
        Q = r + P @ h
        h_new = Q.max(axis=0)
        diff = h_new - h
        span = float(diff.max() - diff.min())
        h = h_new - h_new[0]
        if span < span_tol:
            break
    else:
        raise MultichainError(
            f"relative value iteration did not converge (final span {span:.2e})"
        )
    greedy = Q.argmax(axis=0)
    P_g = P[greedy, np.arange(N)]
    r_g = r[greedy, np.arange(N)]
    gain = 2.0 * gain_bias(P_g, r_g, what="greedy joint policy").gain
    policy = {states[i]: actions[greedy[i]] for i in range(N)}
    return gain, policy
