"""Core domain types: arms, bandit instances, and mixing diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance for row sums of stored transition matrices.
ROW_SUM_TOL = 1e-12


class ValidationError(ValueError):
    pass


def _readonly(a, dtype=float):
    out = np.ascontiguousarray(np.asarray(a, dtype=dtype))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Arm:
    """One controlled two-action Markov chain.

    ``p_passive``/``p_active`` are S x S row-stochastic matrices for actions
    0 and 1; ``r_passive``/``r_active`` are the per-state rewards.
    Instances are immutable and safe to share across workers.
    """

    p_passive: np.ndarray
    p_active: np.ndarray
    r_passive: np.ndarray
    r_active: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_passive", _readonly(self.p_passive))
        object.__setattr__(self, "p_active", _readonly(self.p_active))
        object.__setattr__(self, "r_passive", _readonly(self.r_passive))
        object.__setattr__(self, "r_active", _readonly(self.r_active))
        S = self.p_passive.shape[0]
        if S < 1 or self.p_passive.shape != (S, S) or self.p_active.shape != (S, S):
            raise ValidationError("transition matrices must be square and equal-sized")
        if self.r_passive.shape != (S,) or self.r_active.shape != (S,):
            raise ValidationError("reward vectors must have length S")

    @property
    def num_states(self) -> int:
        return self.p_passive.shape[0]

    def transition(self, action: int) -> np.ndarray:
        return self.p_active if action else self.p_passive

    def reward(self, action: int) -> np.ndarray:
        return self.r_active if action else self.r_passive

    def rewards(self) -> np.ndarray:
        """(S, 2) reward table indexed [state, action]."""
        return np.stack([self.r_passive, self.r_active], axis=1)


@dataclass(frozen=True)
class BanditInstance:
    """n independent arms with a hard per-step activation budget m."""

    arms: tuple
    budget: int
    reward_model: str  # "A" or "B"
    r_max: float = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if self.r_max is None:
            r_max = max(
                float(max(a.r_passive.max(), a.r_active.max())) for a in self.arms
            )
            object.__setattr__(self, "r_max", r_max)

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def sizes(self) -> tuple:
        return tuple(a.num_states for a in self.arms)


@dataclass(frozen=True)
class JointState:
    """Vector of per-arm states, entry i in {0, ..., S^i - 1}."""

    states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _readonly(self.states, dtype=np.int64))


def validate_joint_state(instance: BanditInstance, state: JointState) -> None:
    s = state.states
    if s.shape != (instance.num_arms,):
        raise ValidationError("joint state length must equal number of arms")
    for i, size in enumerate(instance.sizes):
        if not 0 <= s[i] < size:
            raise ValidationError(f"arm {i}: state {s[i]} outside [0, {size})")


def validate(instance: BanditInstance) -> list:
    """Check all instance invariants; returns a list of violation strings.

    Returns an empty list iff the instance is well formed. Violations name
    the offending arm, row, and numeric defect; nothing is raised.
    """
    violations = []
    if not 1 <= instance.budget <= instance.num_arms:
        violations.append(
            f"budget {instance.budget} outside [1, {instance.num_arms}]"
        )
    if instance.reward_model not in ("A", "B"):
        violations.append(f"unknown reward model {instance.reward_model!r}")
    for i, arm in enumerate(instance.arms):
        if arm.num_states < 2:
            violations.append(f"arm {i}: needs at least 2 states")
        for name, P in (("p_passive", arm.p_passive), ("p_active", arm.p_active)):
            if (P < 0).any():
                row = int(np.argwhere(P < 0)[0][0])
                violations.append(f"arm {i}: {name} row {row} has a negative entry")
            rowsums = P.sum(axis=1)
            bad = np.abs(rowsums - 1.0) > ROW_SUM_TOL
            for row in np.flatnonzero(bad):
                violations.append(
                    f"arm {i}: {name} row {int(row)} sums to 1{rowsums[row] - 1.0:+.3e}"
                )
        for name, r in (("r_passive", arm.r_passive), ("r_active", arm.r_active)):
            if (r < 0).any() or (r > instance.r_max).any():
                violations.append(
                    f"arm {i}: {name} has entries outside [0, {instance.r_max}]"
                )
        if instance.reward_model == "B" and np.any(arm.r_passive != 0):
            violations.append(
                f"arm {i}: Model B requires r_passive identically 0"
            )
    return violations


def _check_stochastic(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("transition matrix must be square")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
        raise ValidationError("matrix is not row-stochastic")
    return P


def ergodicity_coefficient(P: np.ndarray) -> float:
    """1 - min over row pairs (s, s') of sum_z min(P(z|s), P(z|s'))."""
    P = _check_stochastic(P)
    overlap = np.minimum(P[:, None, :], P[None, :, :]).sum(axis=2)
    return float(1.0 - overlap.min())


def arm_contraction_factor(arm: Arm) -> float:
    """Per-arm contraction factor: worst-case overlap over all (state, action) row pairs."""
    rows = np.vstack([arm.p_passive, arm.p_active])
    overlap = np.minimum(rows[:, None, :], rows[None, :, :]).sum(axis=2)
    return float(1.0 - overlap.min())


def minorization_lower_bound(instance: BanditInstance) -> float:
    """Product over arms of (1 - contraction factor).

    Lower-bounds the joint chain's one-step minorization mass; reported as a
    mixing diagnostic because the exact joint coefficient is exponential in n.
    """
    out = 1.0
    for arm in instance.arms:
        out *= 1.0 - arm_contraction_factor(arm)
    return out


def instance_to_dict(instance: BanditInstance) -> dict:
    return {
        "n": instance.num_arms,
        "m": instance.budget,
        "reward_model": instance.reward_model,
        "arms": [
            {
                "S": arm.num_states,
                "p_passive": arm.p_passive.tolist(),
                "p_active": arm.p_active.tolist(),
                "r_passive": arm.r_passive.tolist(),
                "r_active": arm.r_active.tolist(),
            }
            for arm in instance.arms
        ],
    }


def instance_from_dict(doc: dict) -> BanditInstance:
    arms = tuple(
        Arm(
            p_passive=a["p_passive"],
            p_active=a["p_active"],
            r_passive=a["r_passive"],
            r_active=a["r_active"],
        )
        for a in doc["arms"]
    )
    if len(arms) != doc["n"]:
        raise ValidationError("field n does not match number of arms")
    return BanditInstance(arms=arms, budget=doc["m"], reward_model=doc["reward_model"])


def save_model(instance: BanditInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def load_model(path) -> BanditInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
