import numpy as np
import pytest

from rblab import arms, envgen


def test_upper_tail_sums():
    P = np.array([[0.5, 0.3, 0.2], [0.1, 0.4, 0.5]])
    F = envgen.upper_tail_sums(P)
    assert np.allclose(F, [[1.0, 0.5, 0.2], [1.0, 0.9, 0.5]])


def test_monotone_matrices_pass_exact_checks():
    rng = np.random.default_rng(0)
    for S in (3, 10, 25):
        for _ in range(50):
            P = envgen.random_monotone_matrix(S, 0.5 / S, rng)
            assert (P >= 0.0).all()
            assert envgen.exact_row_sums(P)
            assert envgen.is_stochastically_monotone(P)


def test_monotone_matrix_d_zero_degenerate():
    rng = np.random.default_rng(1)
    P = envgen.random_monotone_matrix(4, 0.0, rng)
    expect = np.zeros((4, 4))
    expect[:, 0] = 1.0
    assert np.array_equal(P, expect)


def test_monotone_matrix_rejects_bad_args():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        envgen.random_monotone_matrix(1, 0.1, rng)
    with pytest.raises(ValueError):
        envgen.random_monotone_matrix(3, 1.5, rng)


def test_monotone_matrices_distinct_across_draws():
    rng = np.random.default_rng(3)
    seen = {envgen.random_monotone_matrix(5, 0.1, rng).tobytes() for _ in range(1000)}
    assert len(seen) == 1000


def test_is_stochastically_monotone_detects_violation():
    P = np.array([[0.2, 0.8], [0.5, 0.5]])  # tails decrease down the rows
    assert not envgen.is_stochastically_monotone(P)
    assert envgen.is_stochastically_monotone(P[::-1])


def test_environment_a_rewards():
    r0, r1 = envgen.environment_rewards("A", 10)
    assert r0[0] == 81.0 and r0[9] == 0.0
    assert np.all(r1 == 40.5)


def test_environment_b_rewards():
    r0, r1 = envgen.environment_rewards("B", 10)
    assert np.all(r0 == 0.0)
    assert r1[0] == 0.0 and r1[9] == 81.0


def test_environment_rewards_unknown_kind():
    with pytest.raises(ValueError):
        envgen.environment_rewards("C", 5)


def test_reset_matrix():
    R = envgen.reset_matrix(4)
    assert np.array_equal(R[:, 0], np.ones(4))
    assert R.sum() == 4.0


def test_make_environment_validates_clean():
    rng = np.random.default_rng(4)
    for kind in ("A", "B"):
        inst = envgen.make_environment(kind, 3, 6, rng)
        assert inst.budget == 1
        assert inst.reward_model == kind
        assert arms.validate(inst) == []
        for arm in inst.arms:
            assert np.array_equal(arm.p_active, envgen.reset_matrix(6))
            assert envgen.is_stochastically_monotone(arm.p_passive)


def test_make_environment_default_spread_matches_paper_scale():
    # d defaults to 0.5/S; with S=10 the first diagonal entry is >= 0.95
    rng = np.random.default_rng(5)
    inst = envgen.make_environment("A", 5, 10, rng)
    for arm in inst.arms:
        assert arm.p_passive[0, 0] >= 1.0 - 0.5 / 10
