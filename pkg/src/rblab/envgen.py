"""Benchmark environments and random stochastically monotone matrices."""

from __future__ import annotations

import math

import numpy as np

from .arms import Arm, BanditInstance


def upper_tail_sums(P: np.ndarray) -> np.ndarray:
    """F[i, j] = sum_{y >= j} P[i, y]."""
    return np.cumsum(P[:, ::-1], axis=1)[:, ::-1]


def is_stochastically_monotone(P: np.ndarray) -> bool:
    """Upper-tail sums non-decreasing down the rows, checked on stored floats.

    The leading tail column equals the row sum (1 for a stochastic matrix up
    to accumulation order), so the comparison runs over columns >= 1;
    stochasticity is a separate check.
    """
    F = upper_tail_sums(np.asarray(P, dtype=float))
    return bool((np.diff(F[:, 1:], axis=0) >= 0.0).all())


def random_monotone_matrix(S: int, d: float, rng: np.random.Generator) -> np.ndarray:
    """Random row-stochastic, stochastically monotone S x S matrix.

    Row 1 is filled left to right with the diagonal head drawn from
    [1 - d, 1]; the last column ascends within steps of at most d; remaining
    entries are drawn backward per row inside the feasibility interval
    implied by monotonicity, and the first column takes the leftover mass.
    """
    if S < 2:
        raise ValueError("S must be at least 2")
    if not 0.0 <= d <= 1.0:
        raise ValueError("d must lie in [0, 1]")
    for _ in range(10):
        P = _draw_monotone(S, d, rng)
        if P is not None:
            return P
    raise RuntimeError("generated matrix failed the monotonicity re-check")


def exact_row_sums(P: np.ndarray) -> bool:
    """Every row's correctly rounded sum is exactly 1.0."""
    return all(math.fsum(row) == 1.0 for row in np.asarray(P, dtype=float))


def _force_exact_unit_sum(row: np.ndarray) -> bool:
    """Nudge the largest entry until the row's correctly rounded sum is 1.0.

    A first-order correction followed by an ulp walk; the walk terminates
    because fsum is a monotone step function of the entry with steps of one
    ulp of the sum, larger than one ulp of the entry.
    """
    j = int(np.argmax(row))
    s = math.fsum(row)
    if s != 1.0:
        row[j] += 1.0 - s
    for _ in range(200):
        s = math.fsum(row)
        if s == 1.0:
            return True
        row[j] = np.nextafter(row[j], np.inf if s < 1.0 else -np.inf)
    return False


def _draw_monotone(S: int, d: float, rng: np.random.Generator):
    P = np.zeros((S, S))
    P[0, 0] = rng.uniform(1.0 - d, 1.0)
    remaining = 1.0 - P[0, 0]
    for j in range(1, S - 1):
        P[0, j] = rng.uniform(0.0, remaining)
        remaining -= P[0, j]
    P[0, S - 1] = remaining
    for i in range(1, S):
        P[i, S - 1] = rng.uniform(P[i - 1, S - 1], min(1.0, P[i - 1, S - 1] + d))
    F = upper_tail_sums(P)
    for i in range(1, S):
        tail = P[i, S - 1]  # F_{i, j+1} as columns fill backward
        for j in range(S - 2, 0, -1):
            lb = max(0.0, F[i - 1, j] - tail)
            ub = min(1.0, max(lb, min(lb + d, 1.0 - tail)))
            P[i, j] = rng.uniform(lb, ub)
            tail += P[i, j]
        P[i, 0] = max(0.0, 1.0 - tail)
        F[i] = upper_tail_sums(P[i : i + 1])[0]
    P /= P.sum(axis=1, keepdims=True)
    for i in range(S):
        if not _force_exact_unit_sum(P[i]):
            return None
    if (P >= 0.0).all() and exact_row_sums(P) and is_stochastically_monotone(P):
        return P
    return None


def environment_rewards(kind: str, S: int) -> tuple:
    """(r_passive, r_active) for benchmark kind 'A' or 'B'; states 0..S-1."""
    s = np.arange(S, dtype=float)
    if kind == "A":
        return (S - 1.0) ** 2 - s**2, np.full(S, 0.5 * (S - 1.0) ** 2)
    if kind == "B":
        return np.zeros(S), s**2
    raise ValueError(f"unknown environment kind {kind!r}")


def reset_matrix(S: int) -> np.ndarray:
    """Active action resets to state 0 from everywhere."""
    P = np.zeros((S, S))
    P[:, 0] = 1.0
    return P


def make_environment(kind: str, n: int, S: int, rng: np.random.Generator,
                     d: float = None) -> BanditInstance:
    """Benchmark instance: m = 1, reset-on-active, random monotone passive dynamics."""
    if n < 1 or S < 2:
        raise ValueError("need n >= 1 and S >= 2")
    if d is None:
        d = 0.5 / S
    r_passive, r_active = environment_rewards(kind, S)
    arms = tuple(
        Arm(
            p_passive=random_monotone_matrix(S, d, rng),
            p_active=reset_matrix(S),
            r_passive=r_passive,
            r_active=r_active,
        )
        for _ in range(n)
    )
    return BanditInstance(arms=arms, budget=1, reward_model=kind)
