from itertools import product

import numpy as np
import pytest

from rblab import mdp, whittle
from rblab.arms import Arm, BanditInstance


def random_arm(S, seed):
    rng = np.random.default_rng(seed)
    return Arm(
        p_passive=rng.dirichlet(np.ones(S), size=S),
        p_active=rng.dirichlet(np.ones(S), size=S),
        r_passive=rng.random(S),
        r_active=rng.random(S),
    )


def power_iteration_gain(P, r, steps=200000):
    """Oracle: gain as the Cesaro average of expected rewards from state 0."""
    dist = np.zeros(P.shape[0])
    dist[0] = 1.0
    total = 0.0
    for _ in range(steps):
        total += dist @ r
        dist = dist @ P
    return total / steps


def test_single_state_gain():
    arm = Arm(p_passive=[[1.0]], p_active=[[1.0]], r_passive=[0.3], r_active=[0.9])
    res = mdp.evaluate_reward(arm, [0])
    assert res.gain == pytest.approx(0.3)
    assert res.bias == pytest.approx([0.0])


def test_constant_reward_gain_and_flat_bias():
    arm = random_arm(4, 0)
    c = 2.5
    arm = Arm(p_passive=arm.p_passive, p_active=arm.p_active,
              r_passive=np.full(4, c), r_active=np.full(4, c))
    res = mdp.evaluate_reward(arm, [0, 1, 0, 1])
    assert res.gain == pytest.approx(c)
    assert np.allclose(res.bias, 0.0, atol=1e-12)


def test_gain_matches_power_iteration_oracle():
    arm = random_arm(2, 1)
    res = mdp.evaluate_reward(arm, [0, 0])
    oracle = power_iteration_gain(arm.p_passive, arm.r_passive)
    assert res.gain == pytest.approx(oracle, abs=1e-6)


def test_bellman_residual_property():
    for seed in range(5):
        arm = random_arm(5, seed)
        policy = np.random.default_rng(seed).integers(0, 2, size=5)
        res = mdp.evaluate_reward(arm, policy)
        P = np.where(policy[:, None].astype(bool), arm.p_active, arm.p_passive)
        r = np.where(policy.astype(bool), arm.r_active, arm.r_passive)
        residual = np.abs(res.gain + res.bias - r - P @ res.bias).max()
        assert residual <= 1e-9
        assert res.bias[0] == 0.0


def test_reward_linearity():
    arm = random_arm(4, 2)
    policy = [1, 0, 0, 1]
    base = mdp.evaluate_reward(arm, policy)
    a, b = 3.0, -1.25
    scaled = Arm(p_passive=arm.p_passive, p_active=arm.p_active,
                 r_passive=a * arm.r_passive + b, r_active=a * arm.r_active + b)
    res = mdp.evaluate_reward(scaled, policy)
    assert res.gain == pytest.approx(a * base.gain + b, abs=1e-9)
    assert np.allclose(res.bias, a * base.bias, atol=1e-9)


def test_evaluate_activity_boundaries():
    arm = random_arm(3, 3)
    passive = mdp.evaluate_activity(arm, [0, 0, 0])
    assert passive.gain == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(passive.bias, 0.0, atol=1e-10)
    active = mdp.evaluate_activity(arm, [1, 1, 1])
    assert active.gain == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(active.bias, 0.0, atol=1e-10)


def test_activity_gain_is_stationary_active_mass():
    arm = random_arm(3, 4)
    policy = np.array([0, 1, 1])
    res = mdp.evaluate_activity(arm, policy)
    P = np.where(policy[:, None].astype(bool), arm.p_active, arm.p_passive)
    xi = mdp.stationary_distribution(P)
    assert res.gain == pytest.approx(xi[1] + xi[2], abs=1e-9)


def test_multichain_policy_rejected():
    P = np.eye(2)  # two absorbing states
    arm = Arm(p_passive=P, p_active=P, r_passive=[0.0, 1.0], r_active=[0.0, 1.0])
    with pytest.raises(mdp.MultichainError):
        mdp.evaluate_reward(arm, [0, 0])


def test_gain_bias_batch_matches_single():
    rng = np.random.default_rng(5)
    Ps = rng.dirichlet(np.ones(4), size=(6, 4))
    rs = rng.random((6, 4, 2))
    gains, biases = mdp.gain_bias_batch(Ps, rs)
    for c in range(6):
        for k in range(2):
            res = mdp.gain_bias(Ps[c], rs[c, :, k])
            assert gains[c, k] == pytest.approx(res.gain, abs=1e-11)
            assert np.allclose(biases[c, :, k], res.bias, atol=1e-11)


def test_stationary_distribution_examples():
    rho = np.array([0.2, 0.5, 0.3])
    assert np.allclose(mdp.stationary_distribution(np.tile(rho, (3, 1))), rho)
    cycle = np.roll(np.eye(4), 1, axis=1)
    assert np.allclose(mdp.stationary_distribution(cycle), 0.25)


def test_stationary_distribution_simulation_oracle():
    rng = np.random.default_rng(6)
    from rblab.envgen import random_monotone_matrix

    P = random_monotone_matrix(5, 0.3, rng)
    xi = mdp.stationary_distribution(P)
    cum = np.cumsum(P, axis=1)
    s = 0
    counts = np.zeros(5)
    for _ in range(10**6):
        counts[s] += 1
        s = int(np.searchsorted(cum[s], rng.random(), side="right"))
    assert np.abs(counts / 10**6 - xi).max() < 1e-3


def test_stationary_rejects_two_closed_classes():
    with pytest.raises(mdp.MultichainError):
        mdp.stationary_distribution(np.eye(2))


def test_optimal_policy_matches_policy_enumeration():
    for seed in range(8):
        arm = random_arm(3, 10 + seed)
        P = np.stack([arm.p_passive, arm.p_active])
        r = arm.rewards()
        actions, res = mdp.optimal_policy_average(P, r)
        best = max(
            mdp.evaluate_reward(arm, list(pol)).gain
            for pol in product((0, 1), repeat=3)
        )
        assert res.gain == pytest.approx(best, abs=1e-9)


def test_joint_policy_gain_forced_action_model_b():
    arm = random_arm(3, 20)
    arm = Arm(p_passive=arm.p_passive, p_active=arm.p_active,
              r_passive=np.zeros(3), r_active=arm.r_active)
    inst = BanditInstance(arms=(arm,), budget=1, reward_model="B")
    tables = whittle.compute_tables(inst)
    assert mdp.joint_policy_gain(inst, tables) == pytest.approx(
        mdp.evaluate_reward(arm, [1, 1, 1]).gain, abs=1e-10
    )


def test_joint_policy_gain_constant_rewards():
    c = 1.75
    arms_ = tuple(
        Arm(p_passive=random_arm(2, 30 + i).p_passive,
            p_active=random_arm(2, 40 + i).p_active,
            r_passive=np.full(2, c), r_active=np.full(2, c))
        for i in range(3)
    )
    inst = BanditInstance(arms=arms_, budget=1, reward_model="A")
    tables = whittle.WhittleTable(indices=tuple(np.zeros(2) for _ in range(3)))
    assert mdp.joint_policy_gain(inst, tables) == pytest.approx(3 * c, abs=1e-9)


def test_joint_policy_gain_symmetric_under_arm_swap():
    a1, a2 = random_arm(2, 50), random_arm(2, 51)
    gains = []
    for order in ((a1, a2), (a2, a1)):
        inst = BanditInstance(arms=order, budget=1, reward_model="A")
        tables = whittle.compute_tables(inst)
        gains.append(mdp.joint_policy_gain(inst, tables))
    assert gains[0] == pytest.approx(gains[1], abs=1e-9)


def test_joint_policy_gain_simulation_oracle():
    from rblab import simulate

    a1, a2 = random_arm(3, 52), random_arm(3, 53)
    inst = BanditInstance(arms=(a1, a2), budget=1, reward_model="A")
    tables = whittle.compute_tables(inst)
    exact = mdp.joint_policy_gain(inst, tables)
    cum, W, R = simulate.rollout_arrays([inst], [tables])
    gain, _ = simulate.batched_index_rollout(
        cum, W, R, 1, 10**6, 1, np.random.default_rng(0)
    )
    assert gain[0] == pytest.approx(exact, abs=1e-2)


def test_joint_optimal_single_arm_matches_enumeration():
    arm = random_arm(3, 60)
    inst = BanditInstance(arms=(arm,), budget=1, reward_model="A")
    opt, policy = mdp.joint_optimal_gain(inst)
    # m = n = 1 forces the active action everywhere
    assert opt == pytest.approx(mdp.evaluate_reward(arm, [1, 1, 1]).gain, abs=1e-9)


def test_joint_optimal_dominates_whittle_policy():
    for seed in range(5):
        inst = BanditInstance(
            arms=(random_arm(2, 70 + seed), random_arm(2, 80 + seed)),
            budget=1, reward_model="A",
        )
        tables = whittle.compute_tables(inst)
        opt, _ = mdp.joint_optimal_gain(inst)
        assert mdp.joint_policy_gain(inst, tables) <= opt + 1e-10


def test_joint_guardrails():
    arms_ = tuple(random_arm(10, 90 + i) for i in range(5))
    inst = BanditInstance(arms=arms_, budget=1, reward_model="A")
    tables = whittle.WhittleTable(indices=tuple(np.zeros(10) for _ in range(5)))
    with pytest.raises(ValueError, match="long_rollout"):
        mdp.joint_policy_gain(inst, tables)
    inst2 = BanditInstance(
        arms=tuple(random_arm(8, 95 + i) for i in range(6)), budget=3,
        reward_model="A",
    )
    with pytest.raises(ValueError, match="size"):
        mdp.joint_optimal_gain(inst2)


def test_gain_bounds():
    inst = BanditInstance(
        arms=(random_arm(2, 100), random_arm(2, 101)), budget=1, reward_model="A"
    )
    tables = whittle.compute_tables(inst)
    gain = mdp.joint_policy_gain(inst, tables)
    assert 0.0 <= gain <= 2 * inst.r_max
