"""Exact recursion, lexicographic evaluation, pruning, and the oracle."""

import numpy as np
import pytest

from conftest import random_beliefs, random_model

from momdp import (
    IntractableError,
    MomdpModel,
    PairSet,
    beta_envelope,
    brute_force_oracle,
    exact_backup,
    exact_synth,
    fileio,
    initialize_terminal,
    lexicographic_value,
    prune_dominated,
    quantitative_backup,
    quantitative_synth,
    quantitative_terminal,
)


def pair_set(alphas, betas, actions=None):
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    if actions is None:
        actions = [-1] * len(alphas)
    return PairSet(alphas.shape[1], alphas, betas, actions)


def absorbing_target_model(num_s=2, num_e=2, num_a=2, num_z=2, horizon=3, seed=0):
    """Target state 0 self-loops; the rest is random but stochastic."""
    m = random_model(seed, num_s, num_e, num_a, num_z, horizon)
    t_s = m.t_s.copy()
    t_s[0] = 0.0
    t_s[0, :, :, 0] = 1.0
    return MomdpModel(num_s=num_s, num_e=num_e, num_a=num_a, num_z=num_z,
                      t_s=t_s, t_e=m.t_e, obs=m.obs,
                      target=frozenset({0}), horizon=horizon)


class TestTerminal:
    def test_target_gets_all_ones_pair(self):
        m = random_model(0, 3, 2, 2, 2, 2, n_target=1)
        sets = initialize_terminal(m)
        (t,) = m.target
        assert len(sets[t]) == 1
        assert np.array_equal(sets[t].alphas[0], [1.0, 1.0])
        assert np.array_equal(sets[t].betas[0], [1.0, 1.0])

    def test_non_target_gets_all_zeros_pair(self):
        m = random_model(0, 3, 2, 2, 2, 2, n_target=1)
        sets = initialize_terminal(m)
        s = next(s for s in range(m.num_s) if s not in m.target)
        assert np.array_equal(sets[s].alphas[0], [0.0, 0.0])
        assert np.array_equal(sets[s].betas[0], [0.0, 0.0])

    def test_terminal_value_is_target_indicator(self):
        m = random_model(1, 3, 3, 2, 2, 2)
        sets = initialize_terminal(m)
        for b in random_beliefs(0, 5, m.num_e):
            for s in range(m.num_s):
                v, j, _ = lexicographic_value(sets[s], b)
                expect = 1.0 if s in m.target else 0.0
                assert v == pytest.approx(expect, abs=1e-15)
                assert j == pytest.approx(expect, abs=1e-15)


class TestLexicographicValue:
    def test_singleton(self):
        ps = pair_set([[2.0, 0.0]], [[0.5, 0.5]])
        b = np.array([0.5, 0.5])
        v, j, p = lexicographic_value(ps, b)
        assert (v, j) == (1.0, 0.5)

    def test_alpha_breaks_beta_tie(self):
        ps = pair_set([[3.0], [5.0]], [[0.7], [0.7]])
        v, j, p = lexicographic_value(ps, np.array([1.0]))
        assert (v, j) == (5.0, 0.7)

    def test_constraint_dominates_value(self):
        ps = pair_set([[9.0], [2.0]], [[0.5], [0.9]])
        v, j, p = lexicographic_value(ps, np.array([1.0]))
        assert (v, j) == (2.0, 0.9)
        assert np.array_equal(p.alpha, [2.0])

    def test_tie_breaks_to_lowest_index(self):
        ps = pair_set([[4.0], [4.0]], [[0.7], [0.7]], actions=[0, 1])
        _, _, p = lexicographic_value(ps, np.array([1.0]))
        assert p.action == 0

    def test_empty_set_is_usage_error(self):
        with pytest.raises(ValueError, match="empty"):
            lexicographic_value(PairSet(2), np.array([0.5, 0.5]))


class TestExactBackup:
    def test_degenerate_cross_sum_size(self):
        # |Z| = |S| = 1 collapses the cross-sum: |A| * |successor set| pairs.
        m = random_model(2, 1, 2, 3, 1, 2, n_target=1)
        term = initialize_terminal(m)
        sets = exact_backup(m, term)
        assert len(sets[0]) == m.num_a * 1
        again = exact_backup(m, sets)
        assert len(again[0]) == m.num_a * len(sets[0])

    def test_absorbing_target_beta_is_exactly_one(self):
        # |Z||S| = 4 cells, so the per-cell base terms sum to exactly 1.0.
        m = absorbing_target_model()
        stack = exact_synth(m, prune=False)
        for k in range(m.horizon + 1):
            ps = stack.pair_set(k, 0)
            assert np.all(ps.betas == 1.0)

    def test_pair_count_bound(self):
        m = random_model(3, 2, 2, 2, 2, 2)
        term = initialize_terminal(m)
        level1 = exact_backup(m, term)
        level0 = exact_backup(m, level1)
        g1 = max(len(ps) for ps in level1)
        bound = m.num_a * g1 ** (m.num_z * m.num_s)
        for ps in level0:
            assert len(ps) <= bound

    def test_cap_raises_intractable(self):
        m = random_model(4, 3, 2, 3, 2, 2)
        term = initialize_terminal(m)
        level1 = exact_backup(m, term)
        with pytest.raises(IntractableError, match="point-based"):
            exact_backup(m, level1, cap=10)

    def test_component_ranges(self):
        m = random_model(5, 3, 2, 2, 2, 3)
        stack = exact_synth(m)
        for k in range(m.horizon + 1):
            for s in range(m.num_s):
                ps = stack.pair_set(k, s)
                assert ps.betas.min() >= -1e-12
                assert ps.betas.max() <= 1.0 + 1e-12
                assert ps.alphas.min() >= -1e-12
                assert ps.alphas.max() <= m.horizon - k + 1 + 1e-12


class TestOracleEquivalence:
    def test_toy_matches_oracle_at_vertices_and_midpoints(self):
        m = random_model(7, 2, 2, 2, 2, 2)
        stack = exact_synth(m)
        beliefs = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5])]
        for b in beliefs:
            for s in range(m.num_s):
                res = brute_force_oracle(m, s, b)
                v, j, _ = lexicographic_value(stack.pair_set(0, s), b)
                assert j == pytest.approx(res.max_reach, abs=1e-10)
                assert m.horizon + 1 - v == pytest.approx(res.min_time, abs=1e-10)


class TestQuantitative:
    def test_terminal_envelope_is_indicator(self):
        m = random_model(8, 3, 2, 2, 2, 2)
        term = quantitative_terminal(m)
        for s in range(m.num_s):
            b = random_beliefs(s, 1, m.num_e)[0]
            expect = 1.0 if s in m.target else 0.0
            assert beta_envelope(term[s], b) == expect

    def test_envelope_in_unit_interval(self):
        m = random_model(9, 3, 2, 2, 2, 3)
        stages = quantitative_synth(m)
        for k in range(m.horizon + 1):
            for s in range(m.num_s):
                for b in random_beliefs(k * 7 + s, 5, m.num_e):
                    val = beta_envelope(stages[k][s], b)
                    assert -1e-12 <= val <= 1.0 + 1e-12

    def test_equals_beta_envelope_of_full_recursion(self):
        m = random_model(10, 3, 2, 2, 2, 3)
        stack = exact_synth(m)
        stages = quantitative_synth(m)
        for k in range(m.horizon + 1):
            for s in range(m.num_s):
                for b in random_beliefs(100 + k * 11 + s, 10, m.num_e):
                    full = lexicographic_value(stack.pair_set(k, s), b)[1]
                    only = beta_envelope(stages[k][s], b)
                    assert full == pytest.approx(only, abs=1e-10)

    def test_monotone_time_to_go(self):
        # More remaining stages can never reduce the success probability.
        m = random_model(11, 3, 2, 2, 2, 4)
        stages = quantitative_synth(m)
        for k in range(m.horizon):
            for s in range(m.num_s):
                for b in random_beliefs(200 + k * 5 + s, 10, m.num_e):
                    now = beta_envelope(stages[k][s], b)
                    later = beta_envelope(stages[k + 1][s], b)
                    assert now >= later - 1e-10

    def test_cap_raises(self):
        m = random_model(12, 3, 2, 3, 2, 2)
        term = quantitative_terminal(m)
        level1 = quantitative_backup(m, term)
        with pytest.raises(IntractableError):
            quantitative_backup(m, level1, cap=10)


class TestPruneDominated:
    def test_duplicates_collapse(self):
        ps = pair_set([[1.0, 2.0], [1.0, 2.0]], [[0.5, 0.5], [0.5, 0.5]])
        assert len(prune_dominated(ps)) == 1

    def test_total_dominance_removes_loser(self):
        ps = pair_set([[1.0, 1.0], [0.0, 0.0]], [[1.0, 1.0], [0.0, 0.0]])
        out = prune_dominated(ps)
        assert len(out) == 1
        assert np.array_equal(out.alphas[0], [1.0, 1.0])

    def test_incomparable_alphas_both_kept(self):
        ps = pair_set([[5.0, 0.0], [0.0, 5.0]], [[0.2, 0.2], [0.2, 0.2]])
        assert len(prune_dominated(ps)) == 2

    def test_beta_dominance_alone_is_not_enough(self):
        ps = pair_set([[0.0, 5.0], [5.0, 0.0]], [[0.9, 0.9], [0.1, 0.1]])
        assert len(prune_dominated(ps)) == 2

    def test_values_unchanged_at_random_beliefs(self):
        m = random_model(13, 3, 2, 2, 2, 2)
        raw = exact_backup(m, exact_backup(m, initialize_terminal(m)))
        for s in range(m.num_s):
            pruned = prune_dominated(raw[s])
            assert len(pruned) <= len(raw[s])
            for b in random_beliefs(300 + s, 100, m.num_e):
                v0, j0, _ = lexicographic_value(raw[s], b)
                v1, j1, _ = lexicographic_value(pruned, b)
                assert j0 == pytest.approx(j1, abs=1e-12)
                assert v0 == pytest.approx(v1, abs=1e-12)


class TestOracle:
    def test_horizon_zero_inside_target(self):
        m = random_model(14, 3, 2, 2, 2, 0, n_target=1)
        (t,) = m.target
        res = brute_force_oracle(m, t, random_beliefs(0, 1, m.num_e)[0])
        assert res.max_reach == 1.0
        assert res.min_time == 0.0

    def test_horizon_zero_outside_target(self):
        m = random_model(14, 3, 2, 2, 2, 0, n_target=1)
        s = next(s for s in range(m.num_s) if s not in m.target)
        res = brute_force_oracle(m, s, random_beliefs(1, 1, m.num_e)[0])
        assert res.max_reach == 0.0
        assert res.min_time == 1.0

    def test_deterministic_two_step_chain(self):
        t_s = np.zeros((3, 1, 1, 3))
        t_s[0, 0, 0, 1] = 1.0
        t_s[1, 0, 0, 2] = 1.0
        t_s[2, 0, 0, 2] = 1.0
        t_e = np.ones((3, 1, 1, 3, 1))
        obs = np.ones((3, 1, 1, 1))
        m = MomdpModel(num_s=3, num_e=1, num_a=1, num_z=1,
                       t_s=t_s, t_e=t_e, obs=obs,
                       target=frozenset({2}), horizon=2)
        res = brute_force_oracle(m, 0, np.array([1.0]))
        assert res.max_reach == pytest.approx(1.0)
        assert res.min_time == pytest.approx(2.0)
        assert res.first_actions == (0,)

    def test_cap_exceeded_raises(self):
        m = random_model(15, 3, 2, 3, 2, 3)
        with pytest.raises(IntractableError, match="cap"):
            brute_force_oracle(m, 0, random_beliefs(2, 1, m.num_e)[0], cap=100)


class TestStackSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        m = random_model(16, 2, 2, 2, 2, 2)
        stack = exact_synth(m)
        p1 = tmp_path / "stack.json"
        p2 = tmp_path / "stack2.json"
        fileio.save_stack(stack, p1)
        loaded = fileio.load_stack(p1)
        fileio.save_stack(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded.flavor == stack.flavor
        assert loaded.variant == stack.variant
        for k in range(stack.horizon + 1):
            for s in range(m.num_s):
                assert np.array_equal(loaded.pair_set(k, s).alphas,
                                      stack.pair_set(k, s).alphas)
                assert np.array_equal(loaded.pair_set(k, s).betas,
                                      stack.pair_set(k, s).betas)
                assert np.array_equal(loaded.pair_set(k, s).actions,
                                      stack.pair_set(k, s).actions)
