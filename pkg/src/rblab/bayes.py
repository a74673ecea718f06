"""Dirichlet posteriors over unknown transition rows and visit bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arms import Arm, instance_to_dict


@dataclass
class PosteriorState:
    """Per-(arm, state, action) Dirichlet counts plus raw visit counters.

    ``counts[i]`` is (S_i, 2, S_i) Dirichlet parameters; rows for actions not
    in ``learned_actions`` are ignored and the known matrix from
    ``known_transitions`` is used instead. ``visits``/``transitions`` track
    every observation regardless of mode. Single-writer within a run.
    """

    counts: list
    visits: list
    transitions: list
    prior_counts: list
    learned_actions: tuple = (0, 1)
    known_transitions: list = None  # per arm: {action: matrix} for unlearned actions
    steps: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.steps is None:
            self.steps = np.zeros(len(self.counts), dtype=np.int64)

    @property
    def num_arms(self) -> int:
        return len(self.counts)

    @property
    def sizes(self) -> tuple:
        return tuple(c.shape[0] for c in self.counts)


def init_prior(sizes, prior_counts=None, learned_actions=(0, 1),
               known_transitions=None) -> PosteriorState:
    """Fresh posterior: counts equal the prior, all observation counters zero.

    ``prior_counts`` defaults to all-ones (uninformed Dirichlet) and may be a
    scalar, a per-arm list of (S, 2, S) arrays, or a single array reused for
    every arm. All prior entries must be strictly positive.
    """
    sizes = tuple(int(s) for s in sizes)
    counts = []
    for i, S in enumerate(sizes):
        if prior_counts is None:
            c = np.ones((S, 2, S))
        elif np.isscalar(prior_counts):
            c = np.full((S, 2, S), float(prior_counts))
        elif isinstance(prior_counts, (list, tuple)):
            c = np.array(prior_counts[i], dtype=float)
        else:
            c = np.array(prior_counts, dtype=float)
        if c.shape != (S, 2, S):
            raise ValueError(f"arm {i}: prior must have shape {(S, 2, S)}")
        if (c <= 0).any():
            raise ValueError(f"arm {i}: prior counts must be strictly positive")
        counts.append(c)
    if known_transitions is None:
        known_transitions = [{} for _ in sizes]
    for a in (0, 1):
        if a not in learned_actions:
            for i, known in enumerate(known_transitions):
                if a not in known:
                    raise ValueError(
                        f"arm {i}: action {a} is not learned and has no known matrix"
                    )
    return PosteriorState(
        counts=counts,
        visits=[np.zeros((S, 2), dtype=np.int64) for S in sizes],
        transitions=[np.zeros((S, 2, S), dtype=np.int64) for S in sizes],
        prior_counts=[c.copy() for c in counts],
        learned_actions=tuple(learned_actions),
        known_transitions=known_transitions,
    )


def observe(post: PosteriorState, arm: int, s: int, a: int, s_next: int) -> PosteriorState:
    """Record one transition; conjugate in-place update, returns ``post``."""
    S = post.sizes[arm]
    if not (0 <= s < S and 0 <= s_next < S and a in (0, 1)):
        raise IndexError(f"observation ({arm}, {s}, {a}, {s_next}) out of range")
    post.counts[arm][s, a, s_next] += 1.0
    post.visits[arm][s, a] += 1
    post.transitions[arm][s, a, s_next] += 1
    post.steps[arm] += 1
    return post


def sample_model(post: PosteriorState, rng: np.random.Generator) -> list:
    """Draw (p_passive, p_active) per arm from the posterior.

    Learned rows are independent Dirichlet draws from their count vectors,
    renormalized to exact row sums; unlearned actions use the known matrices.
    """
    out = []
    for i, S in enumerate(post.sizes):
        mats = []
        for a in (0, 1):
            if a in post.learned_actions:
                # Dirichlet rows via normalized gamma draws, one call per matrix
                M = rng.standard_gamma(post.counts[i][:, a, :])
                M /= M.sum(axis=1, keepdims=True)
            else:
                M = post.known_transitions[i][a]
            mats.append(M)
        out.append((mats[0], mats[1]))
    return out


def sampled_arm(post: PosteriorState, arm_index: int, sampled, rewards) -> Arm:
    p0, p1 = sampled[arm_index]
    return Arm(p_passive=p0, p_active=p1, r_passive=rewards[:, 0], r_active=rewards[:, 1])


def posterior_mean(post: PosteriorState, arm: int, s: int, a: int) -> np.ndarray:
    """Normalized Dirichlet counts row (posterior mean transition row)."""
    row = post.counts[arm][s, a]
    return row / row.sum()


def empirical_row(post: PosteriorState, arm: int, s: int, a: int) -> tuple:
    """Counts-only estimate with the 1-or-N guard.

    Returns (row, visited). With zero visits the row is all zeros and
    ``visited`` is False rather than substituting a uniform row.
    """
    n = int(post.visits[arm][s, a])
    row = post.transitions[arm][s, a] / max(1, n)
    return row, n > 0


def check_count_invariants(post: PosteriorState) -> list:
    """Count-conservation diagnostics; empty list when consistent."""
    bad = []
    for i in range(post.num_arms):
        expect = post.prior_counts[i] + post.transitions[i]
        if not np.allclose(post.counts[i], expect, rtol=0, atol=1e-9):
            bad.append(f"arm {i}: counts != prior + transitions")
        if not np.array_equal(post.transitions[i].sum(axis=2), post.visits[i]):
            bad.append(f"arm {i}: transition totals != visits")
        if post.visits[i].sum() != post.steps[i]:
            bad.append(f"arm {i}: visit totals != observed steps")
    return bad


def snapshot(post: PosteriorState, instance=None) -> dict:
    """JSON-serializable checkpoint: optional model document plus counts."""
    doc = {} if instance is None else instance_to_dict(instance)
    doc["posterior"] = {
        "learned_actions": list(post.learned_actions),
        "arms": [
            {
                "counts": post.counts[i].tolist(),
                "visits": post.visits[i].tolist(),
                "transitions": post.transitions[i].tolist(),
                "prior_counts": post.prior_counts[i].tolist(),
            }
            for i in range(post.num_arms)
        ],
    }
    return doc


def from_snapshot(doc: dict, known_transitions=None) -> PosteriorState:
    p = doc["posterior"]
    arms = p["arms"]
    post = PosteriorState(
        counts=[np.array(a["counts"], dtype=float) for a in arms],
        visits=[np.array(a["visits"], dtype=np.int64) for a in arms],
        transitions=[np.array(a["transitions"], dtype=np.int64) for a in arms],
        prior_counts=[np.array(a["prior_counts"], dtype=float) for a in arms],
        learned_actions=tuple(p["learned_actions"]),
        known_transitions=known_transitions,
    )
    post.steps = np.array([v.sum() for v in post.visits], dtype=np.int64)
    return post
