"""Whittle index computation, action selection, and an independent bisection oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mdp
from .arms import Arm, BanditInstance

# |difference of (J_N + N)| below this counts as "no activity change" in
# the candidate test; avoids float-equality and reference-state sensitivity.
ACTIVITY_TOL = 1e-9
# candidates within this of the minimizing ratio are assigned in the same pass
ASSIGN_TOL = 1e-9
BISECTION_ITERS = 60


class DegenerateArmError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class PassiveSetPolicy:
    """Policy that is passive exactly on ``passive_states``."""

    passive_states: frozenset

    def actions(self, num_states: int) -> np.ndarray:
        a = np.ones(num_states, dtype=int)
        a[list(self.passive_states)] = 0
        return a


@dataclass(frozen=True)
class WhittleTable:
    """Per-arm, per-state index values; ``indexable`` is None when unchecked."""

    indices: tuple
    indexable: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "indices", tuple(np.asarray(v, dtype=float) for v in self.indices)
        )
        if self.indexable is None:
            object.__setattr__(self, "indexable", (None,) * len(self.indices))


def _combo_pairs(arm, passive_sets):
    """Batched (J_D + D, J_N + N) for a list of passive sets."""
    S = arm.num_states
    C = len(passive_sets)
    Ps = np.empty((C, S, S))
    rs = np.empty((C, S, 2))
    for c, ps in enumerate(passive_sets):
        act = np.ones(S, dtype=bool)
        act[list(ps)] = False
        Ps[c] = np.where(act[:, None], arm.p_active, arm.p_passive)
        rs[c, :, 0] = np.where(act, arm.r_active, arm.r_passive)
        rs[c, :, 1] = act
    gains, biases = mdp.gain_bias_batch(Ps, rs)
    combos = gains[:, None, :] + biases  # (C, S, 2)
    return combos[:, :, 0], combos[:, :, 1]


def whittle_indices(arm: Arm) -> np.ndarray:
    """Index every state by the adaptive-greedy passive-set construction.

    Grows the passive set from empty; at each pass the candidate state(s)
    with the smallest indifference charge receive that charge as index.
    """
    S = arm.num_states
    w = np.full(S, np.nan)
    passive = frozenset()
    cache = {}

    def combos_for(sets):
        missing = [ps for ps in sets if ps not in cache]
        if missing:
            try:
                cD, cN = _combo_pairs(arm, missing)
            except mdp.MultichainError as exc:
                raise mdp.MultichainError(
                    f"{exc} (passive sets {[sorted(ps) for ps in missing]})"
                ) from exc
            for i, ps in enumerate(missing):
                cache[ps] = (cD[i], cN[i])
        return [cache[ps] for ps in sets]

    while len(passive) < S:
        candidates = [y for y in range(S) if y not in passive]
        (base_D, base_N), = combos_for([passive])
        cand_sets = [passive | {y} for y in candidates]
        cand_combos = combos_for(cand_sets)
        best = {}
        for y, (cD, cN) in zip(candidates, cand_combos):
            dN = base_N - cN
            mask = np.abs(dN) > ACTIVITY_TOL
            if not mask.any():
                continue
            ratios = (base_D - cD)[mask] / dN[mask]
            best[y] = ratios.min()
        if not best:
            raise DegenerateArmError(
                f"degenerate: no activity change (passive set {sorted(passive)})"
            )
        xi_star = min(best.values())
        chosen = [y for y, v in best.items() if v <= xi_star + ASSIGN_TOL]
        for y in chosen:
            w[y] = xi_star
        passive = passive | set(chosen)
    return w


def whittle_indices_stack(Pp, Pa, rp, ra) -> np.ndarray:
    """Adaptive-greedy indices for n same-size arms, one batched solve per pass.

    ``Pp``/``Pa`` are (n, S, S) passive/active kernels, ``rp``/``ra`` (n, S)
    rewards. Equivalent to calling :func:`whittle_indices` per arm; the linear
    systems of every arm's pass are stacked into a single solve.
    """
    Pp = np.asarray(Pp, dtype=float)
    Pa = np.asarray(Pa, dtype=float)
    rp = np.asarray(rp, dtype=float)
    ra = np.asarray(ra, dtype=float)
    n, S, _ = Pp.shape
    w = np.full((n, S), np.nan)
    passive = np.zeros((n, S), dtype=bool)
    while True:
        open_arms = np.flatnonzero(~passive.all(axis=1))
        if len(open_arms) == 0:
            return w
        entries = []  # (arm, candidate); candidate -1 is the base set
        for a in open_arms:
            entries.append((a, -1))
            entries.extend((a, int(y)) for y in np.flatnonzero(~passive[a]))
        C = len(entries)
        Ps = np.empty((C, S, S))
        rs = np.empty((C, S, 2))
        for c, (a, y) in enumerate(entries):
            act = ~passive[a]
            if y >= 0:
                act = act.copy()
                act[y] = False
            Ps[c] = np.where(act[:, None], Pa[a], Pp[a])
            rs[c, :, 0] = np.where(act, ra[a], rp[a])
            rs[c, :, 1] = act
        gains, biases = mdp.gain_bias_batch(Ps, rs)
        combos = gains[:, None, :] + biases  # (C, S, 2)
        pos = 0
        for a in open_arms:
            base = combos[pos]
            cands = np.flatnonzero(~passive[a])
            block = combos[pos + 1 : pos + 1 + len(cands)]
            pos += 1 + len(cands)
            dD = base[:, 0] - block[:, :, 0]  # (k, S)
            dN = base[:, 1] - block[:, :, 1]
            mask = np.abs(dN) > ACTIVITY_TOL
            ratios = np.where(mask, dD / np.where(mask, dN, 1.0), np.inf)
            best = ratios.min(axis=1)
            usable = mask.any(axis=1)
            if not usable.any():
                raise DegenerateArmError(
                    f"degenerate: no activity change (arm {a}, passive set "
                    f"{np.flatnonzero(passive[a]).tolist()})"
                )
            xi_star = best[usable].min()
            chosen = cands[usable & (best <= xi_star + ASSIGN_TOL)]
            w[a, chosen] = xi_star
            passive[a, chosen] = True


def passive_set(arm: Arm, lam: float) -> frozenset:
    """Passive set of the activation-charged single-arm problem at charge lam.

    States where the optimal action of the MDP with reward r(s, a) - lam * a
    is passive; ties classify as passive.
    """
    P = np.stack([arm.p_passive, arm.p_active])
    r = np.stack([arm.r_passive, arm.r_active - lam], axis=1)
    actions, _ = mdp.optimal_policy_average(P, r)
    return frozenset(np.flatnonzero(actions == 0).tolist())


def default_bracket(arm: Arm) -> tuple:
    r_max = float(max(arm.r_passive.max(), arm.r_active.max(), 0.0))
    return (-r_max - 1.0, 2.0 * r_max + 1.0)


def straddling_bracket(arm: Arm, max_doublings: int = 60) -> tuple:
    """Widen the default bracket until it straddles every state's index.

    Indices of slowly mixing arms can exceed the reward-based default; each
    endpoint doubles its distance from the center until the passive set is
    empty at the low end and full at the high end.
    """
    lo, hi = default_bracket(arm)
    S = arm.num_states
    step = hi - lo
    for _ in range(max_doublings):
        if not passive_set(arm, lo):
            break
        lo -= step
        step *= 2.0
    else:
        raise BracketError(f"no charge empties the passive set above {lo}")
    step = hi - lo
    for _ in range(max_doublings):
        if len(passive_set(arm, hi)) == S:
            break
        hi += step
        step *= 2.0
    else:
        raise BracketError(f"no charge fills the passive set below {hi}")
    return lo, hi


def whittle_bisection_oracle(arm: Arm, state: int, lam_lo: float, lam_hi: float) -> float:
    """Smallest activation charge at which ``state`` turns passive, by bisection.

    Independent of the adaptive-greedy path: each probe solves the charged
    single-arm MDP from scratch and reads the optimal action at ``state``.
    """
    if lam_lo == lam_hi:
        return lam_lo
    if lam_lo > lam_hi:
        raise BracketError("bracket does not straddle index (lo > hi)")
    if state in passive_set(arm, lam_lo) or state not in passive_set(arm, lam_hi):
        raise BracketError(
            f"bracket does not straddle index for state {state}: "
            f"[{lam_lo}, {lam_hi}]"
        )
    lo, hi = lam_lo, lam_hi
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if state in passive_set(arm, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def indexability_check(arm: Arm, lam_grid) -> tuple:
    """Monotone growth of the passive set along an ascending charge grid.

    Returns (True, None) when passive sets are nested along the grid;
    otherwise (False, (lam_j, lam_j1, state)) for the first state that
    drops out of the passive set as the charge increases.
    """
    grid = np.asarray(lam_grid, dtype=float)
    prev_lam = None
    prev_set = None
    for lam in grid:
        cur = passive_set(arm, float(lam))
        if prev_set is not None and not prev_set <= cur:
            state = min(prev_set - cur)
            return False, (float(prev_lam), float(lam), int(state))
        prev_lam, prev_set = lam, cur
    return True, None


def select_actions(tables: WhittleTable, state, m: int) -> np.ndarray:
    """Activate the m arms with the largest current-state indices.

    Ties break toward the smallest arm id; output always has exactly m ones.
    """
    state = np.asarray(state, dtype=int)
    values = np.array(
        [tables.indices[i][state[i]] for i in range(len(tables.indices))]
    )
    order = np.argsort(-values, kind="stable")
    actions = np.zeros(len(values), dtype=int)
    actions[order[:m]] = 1
    return actions


def compute_tables(instance: BanditInstance) -> WhittleTable:
    if len(set(instance.sizes)) == 1:
        W = whittle_indices_stack(
            np.stack([a.p_passive for a in instance.arms]),
            np.stack([a.p_active for a in instance.arms]),
            np.stack([a.r_passive for a in instance.arms]),
            np.stack([a.r_active for a in instance.arms]),
        )
        return WhittleTable(indices=tuple(W))
    return WhittleTable(indices=tuple(whittle_indices(a) for a in instance.arms))
