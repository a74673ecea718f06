"""Self-contained verification suites: index oracle, gain cross-check, generator."""

from __future__ import annotations

import numpy as np

from . import envgen, mdp, simulate, whittle
from .arms import Arm, BanditInstance

WHITTLE_TOL = 1e-6
MAX_SKIP_FRACTION = 0.05
GAIN_GAP_TOL = 1e-10


def _random_reset_arm(S: int, d: float, rng: np.random.Generator) -> Arm:
    r_passive, r_active = envgen.environment_rewards("A", S)
    return Arm(
        p_passive=envgen.random_monotone_matrix(S, d, rng),
        p_active=envgen.reset_matrix(S),
        r_passive=r_passive,
        r_active=r_active,
    )


def verify_whittle(instances: int = 100, seed: int = 0, S: int = 5,
                   d: float = 0.1, tol: float = WHITTLE_TOL) -> dict:
    """Adaptive-greedy indices vs the bisection oracle on random arms.

    Arms the grid check flags as non-indexable are skipped (and counted);
    the suite fails if more than 5% are skipped or any index disagrees.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    skipped = 0
    failures = []
    max_err = 0.0
    for j in range(instances):
        arm = _random_reset_arm(S, d, rng)
        lo, hi = whittle.straddling_bracket(arm)
        ok, _ = whittle.indexability_check(arm, np.linspace(lo, hi, 41))
        if not ok:
            skipped += 1
            continue
        idx = whittle.whittle_indices(arm)
        for s in range(S):
            oracle = whittle.whittle_bisection_oracle(arm, s, lo, hi)
            err = abs(idx[s] - oracle)
            max_err = max(max_err, err)
            if err > tol:
                failures.append({"arm": j, "state": s, "error": err})
    passed = not failures and skipped <= MAX_SKIP_FRACTION * instances
    return {
        "suite": "whittle",
        "instances": instances,
        "skipped": skipped,
        "failures": failures,
        "max_abs_error": max_err,
        "passed": passed,
    }


def _random_tiny_instance(S: int, rng: np.random.Generator):
    """n=2, m=1 instance with dense random dynamics; retried until indexable."""
    for _ in range(50):
        arms = []
        for _ in range(2):
            arms.append(
                Arm(
                    p_passive=rng.dirichlet(np.ones(S), size=S),
                    p_active=rng.dirichlet(np.ones(S), size=S),
                    r_passive=rng.random(S),
                    r_active=rng.random(S),
                )
            )
        inst = BanditInstance(arms=tuple(arms), budget=1, reward_model="A")
        try:
            tables = whittle.compute_tables(inst)
        except (whittle.DegenerateArmError, mdp.MultichainError):
            continue
        return inst, tables
    raise RuntimeError("could not draw a usable tiny instance")


def verify_gain(instances: int = 50, seed: int = 0, horizon: int = 10**5,
                reps: int = 16) -> dict:
    """Exact joint gain vs optimality gap and vs long-rollout estimates.

    Checks, on random tiny instances (n=2, S in {2,3}, m=1): the index
    policy's exact gain never exceeds the optimal gain, and the rollout
    estimate of the index policy's gain lands within 3 standard errors of
    the exact value.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    failures = []
    by_size = {2: [], 3: []}
    for j in range(instances):
        S = 2 if j % 2 == 0 else 3
        inst, tables = _random_tiny_instance(S, rng)
        exact = mdp.joint_policy_gain(inst, tables)
        optimal, _ = mdp.joint_optimal_gain(inst)
        if exact > optimal + GAIN_GAP_TOL:
            failures.append(
                {"instance": j, "kind": "gap",
                 "detail": f"policy gain {exact!r} > optimal {optimal!r}"}
            )
        by_size[S].append((j, inst, tables, exact))
    for S, group in by_size.items():
        if not group:
            continue
        cum, W, R = simulate.rollout_arrays(
            [g[1] for g in group], [g[2] for g in group]
        )
        gains, stderrs = simulate.batched_index_rollout(
            cum, W, R, 1, horizon, reps, rng
        )
        for (j, _, _, exact), est, se in zip(group, gains, stderrs):
            if abs(est - exact) > 3.0 * max(se, 1e-12):
                failures.append(
                    {"instance": j, "kind": "rollout",
                     "detail": f"estimate {est!r} vs exact {exact!r} (stderr {se!r})"}
                )
    return {
        "suite": "gain",
        "instances": instances,
        "failures": failures,
        "passed": not failures,
    }


def verify_monotone(count: int = 1000, seed: int = 0,
                    sizes=(3, 10, 25)) -> dict:
    """Exact stochasticity and tail-monotonicity of the matrix generator."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    failures = []
    for j in range(count):
        S = sizes[j % len(sizes)]
        P = envgen.random_monotone_matrix(S, 0.5 / S, rng)
        if not np.all(P >= 0.0):
            failures.append({"matrix": j, "detail": "negative entry"})
        if not envgen.exact_row_sums(P):
            failures.append({"matrix": j, "detail": "row sums off"})
        if not envgen.is_stochastically_monotone(P):
            failures.append({"matrix": j, "detail": "tail monotonicity violated"})
    return {
        "suite": "monotone",
        "count": count,
        "failures": failures,
        "passed": not failures,
    }


SUITES = {
    "whittle": verify_whittle,
    "gain": verify_gain,
    "monotone": verify_monotone,
}


def run_suite(suite: str, **kwargs) -> dict:
    if suite == "all":
        reports = [run_suite(name, **kwargs) for name in SUITES]
        return {
            "suite": "all",
            "reports": reports,
            "passed": all(r["passed"] for r in reports),
        }
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from "
                         f"{sorted(SUITES)} or 'all'")
    fn = SUITES[suite]
    allowed = fn.__code__.co_varnames[: fn.__code__.co_argcount]
    return fn(**{k: v for k, v in kwargs.items() if k in allowed and v is not None})
