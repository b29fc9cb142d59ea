"""Grid compilation, observation models, and shipped world sanity."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import corridor_spec, gate_spec

from momdp import (
    GoalRegion,
    GridSpec,
    ModelError,
    UncertainRegion,
    adjacency_accuracy,
    adjacency_observation,
    belief_update,
    brute_force_oracle,
    compile_grid,
    decay_observation_goal,
    decay_observation_region,
    fileio,
    initial_belief_for,
    lexicographic_value,
    parse_ascii_grid,
    sample_environment,
    validate_model,
    validate_spec,
    worlds,
)
from momdp.gridworld import adjacency_goal_accuracy


class TestCompile:
    def test_forced_corridor(self):
        comp = compile_grid(corridor_spec(horizon=2))
        m = comp.model
        res = brute_force_oracle(m, comp.start_state, comp.initial_belief)
        assert res.max_reach == pytest.approx(1.0)
        assert res.min_time == pytest.approx(1.0)
        assert res.first_actions == (2,)  # east

    def test_gate_reach_probability_equals_prior(self):
        prior = 0.9
        comp = compile_grid(gate_spec(horizon=2, prior=prior))
        res = brute_force_oracle(comp.model, comp.start_state, comp.initial_belief)
        assert res.max_reach == pytest.approx(prior, abs=1e-12)

    def test_latent_space_size_is_two_to_the_factors(self):
        for name, m_factors in [("gate1x3", 1), ("grid5x5_r3", 3),
                                ("samples5x5", 3)]:
            comp = compile_grid(worlds.load_world(name))
            assert comp.model.num_e == 2 ** m_factors
            assert comp.model.num_z == 2 ** m_factors

    def test_compiled_models_validate(self):
        for name in worlds.list_worlds():
            if name == "grid15x15_r3":
                continue  # large; compile covered by the shipped spec itself
            comp = compile_grid(worlds.load_world(name))
            assert validate_model(comp.model) == []

    def test_fail_state_is_absorbing_and_not_target(self):
        comp = compile_grid(worlds.load_world("grid5x5_r3"))
        m = comp.model
        f = comp.fail_state
        assert f not in m.target
        assert np.all(m.t_s[f, :, :, f] == 1.0)

    def test_known_obstacle_bump_is_noop(self):
        comp = compile_grid(worlds.load_world("grid5x5_r3"))
        m = comp.model
        s = comp.cell_to_state[(0, 1)]  # north of the (1,1) gate, west wall above
        north = 0
        assert np.all(m.t_s[s, :, north, s] == 1.0)  # off-grid keeps position

    def test_blocked_region_entry_fails(self):
        comp = compile_grid(gate_spec())
        m = comp.model
        east = 2
        s0 = comp.start_state
        assert m.t_s[s0, 0, east, comp.fail_state] == 1.0   # bit 0: blocked
        gate = comp.cell_to_state[(0, 1)]
        assert m.t_s[s0, 1, east, gate] == 1.0              # bit 1: traversable

    def test_inconsistent_spec_lists_violations(self):
        spec = GridSpec(
            width=2, height=2, obstacles=frozenset({(0, 0)}),
            goals=(GoalRegion(((0, 0),), 1.0),),
            regions=(UncertainRegion(((5, 5),), 1.5),),
            horizon=3, start_cell=(1, 1),
        )
        problems = validate_spec(spec)
        assert len(problems) >= 3
        with pytest.raises(ModelError, match="invalid grid spec"):
            compile_grid(spec)

    def test_uncertain_goal_routes_to_success(self):
        comp = compile_grid(worlds.load_world("samples5x5"))
        m = comp.model
        assert comp.success_state is not None
        assert m.target == frozenset({comp.success_state})
        assert np.all(m.t_s[comp.success_state, :, :, comp.success_state] == 1.0)
        goal_state = comp.cell_to_state[(0, 4)]
        goal_bit = next(
            i for i, f in enumerate(comp.factors)
            if f.kind == "goal" and (0, 4) in f.cells
        )
        for e in range(m.num_e):
            present = bool((e >> goal_bit) & 1)
            routed = m.t_s[goal_state, e, :, comp.success_state] == 1.0
            assert routed.all() == present


class TestObservationModels:
    def test_adjacency_values(self):
        region = ((2, 2),)
        assert adjacency_accuracy((2, 1), region) == 1.0   # cardinal neighbor
        assert adjacency_accuracy((2, 2), region) == 1.0   # on the region
        assert adjacency_accuracy((1, 1), region) == 0.8   # diagonal
        assert adjacency_accuracy((2, 4), region) == 0.5   # two away, straight
        assert adjacency_accuracy((0, 0), region) == 0.5   # far

    def test_adjacency_observation_distribution(self):
        region = ((1, 1),)
        adjacent_free = adjacency_observation((1, 0), region, 1)
        assert list(adjacent_free) == [1.0, 0.0, 0.0]
        diagonal_free = adjacency_observation((0, 0), region, 1)
        assert diagonal_free[0] == pytest.approx(0.8)
        assert diagonal_free[1] == pytest.approx(0.2)
        assert diagonal_free[2] == 0.0
        far = adjacency_observation((5, 5), region, 0)
        assert far[0] == far[1] == 0.5
        blocked_adjacent = adjacency_observation((1, 0), region, 0)
        assert list(blocked_adjacent) == [0.0, 1.0, 0.0]

    def test_decay_region_values(self):
        assert decay_observation_region(0) == 1.0
        assert decay_observation_region(1) == 1.0
        assert decay_observation_region(2) == pytest.approx(0.8)
        assert decay_observation_region(7) == pytest.approx(
            0.5 + 0.3 * np.exp(-2.0), abs=1e-12)
        assert decay_observation_region(7) == pytest.approx(0.540601, abs=5e-7)

    def test_decay_goal_values(self):
        assert decay_observation_goal(0) == 1.0
        assert decay_observation_goal(1.5) == pytest.approx(
            0.5 + 0.25 * np.exp(-1.0), abs=1e-12)
        assert decay_observation_goal(1.5) == pytest.approx(0.591970, abs=5e-7)
        assert decay_observation_goal(200.0) == pytest.approx(0.5, abs=1e-12)

    def test_adjacency_goal_accuracy(self):
        goal = ((3, 3),)
        assert adjacency_goal_accuracy((3, 3), goal) == 1.0
        assert adjacency_goal_accuracy((3, 4), goal) == 0.8
        assert adjacency_goal_accuracy((3, 5), goal) == 0.5

    @given(st.floats(min_value=1.0, max_value=60.0),
           st.floats(min_value=0.0, max_value=60.0))
    @settings(deadline=None, max_examples=80)
    def test_decay_region_monotone_toward_half(self, d, extra):
        near, far = decay_observation_region(d), decay_observation_region(d + extra)
        assert near >= far >= 0.5

    @given(st.floats(min_value=0.0, max_value=60.0),
           st.floats(min_value=0.0, max_value=60.0))
    @settings(deadline=None, max_examples=80)
    def test_decay_goal_monotone_toward_half(self, d, extra):
        near, far = decay_observation_goal(d), decay_observation_goal(d + extra)
        assert near >= far >= 0.5

    def test_joint_observation_factorizes(self):
        comp = compile_grid(worlds.load_world("grid5x5_r3"))
        m = comp.model
        for s in (comp.start_state, comp.cell_to_state[(2, 1)], comp.fail_state):
            cell = comp.state_to_cell[s]
            for e in range(m.num_e):
                for z in range(m.num_z):
                    expected = 1.0
                    for i, f in enumerate(comp.factors):
                        if cell is None:
                            acc = 0.5
                        else:
                            acc = adjacency_accuracy(cell, f.cells)
                        agree = ((e >> i) & 1) == ((z >> i) & 1)
                        expected *= acc if agree else 1.0 - acc
                    assert m.obs[s, e, 0, z] == pytest.approx(expected, abs=1e-12)

    def test_far_move_leaves_marginals_unchanged(self):
        # From the 5x5 start, one step north is uninformative about every
        # region, so each latent bit's marginal must be preserved exactly.
        comp = compile_grid(worlds.load_world("grid5x5_r3"))
        m = comp.model
        b = comp.initial_belief
        s0 = comp.start_state
        s1 = comp.cell_to_state[(3, 0)]
        north = 0
        bits = np.array([[(e >> i) & 1 for i in range(3)] for e in range(m.num_e)])
        for z in range(m.num_z):
            b2 = belief_update(m, s0, b, north, s1, z)
            for i in range(3):
                before = float(b[bits[:, i] == 1].sum())
                after = float(b2[bits[:, i] == 1].sum())
                assert after == pytest.approx(before, abs=1e-12)


class TestSampleEnvironment:
    def test_prior_one_always_set(self):
        spec = gate_spec(prior=1.0)
        assert all(sample_environment(spec, seed) == 1 for seed in range(50))

    def test_prior_zero_never_set(self):
        spec = gate_spec(prior=0.0)
        assert all(sample_environment(spec, seed) == 0 for seed in range(50))

    def test_frequency_matches_prior(self):
        spec = gate_spec(prior=0.9)
        hits = sum(sample_environment(spec, seed) for seed in range(10_000))
        assert hits / 10_000 == pytest.approx(0.9, abs=0.01)

    def test_matches_initial_belief_masses(self):
        spec = worlds.load_world("grid5x5_r3")
        b0 = initial_belief_for(spec)
        counts = np.zeros(len(b0))
        for seed in range(20_000):
            counts[sample_environment(spec, seed)] += 1
        assert np.allclose(counts / 20_000, b0, atol=0.02)


class TestAsciiLoader:
    ART = """
G....
12#3#
.....
.....
.....
""".strip("\n")

    def test_matches_shipped_json(self):
        spec = parse_ascii_grid(
            self.ART, region_priors={1: 0.9, 2: 0.4, 3: 0.3},
            horizon=30, start_cell=(4, 0),
        )
        assert spec == worlds.load_world("grid5x5_r3")

    def test_sequence_priors_accepted(self):
        spec = parse_ascii_grid(
            self.ART, region_priors=[0.9, 0.4, 0.3],
            horizon=30, start_cell=(4, 0),
        )
        assert spec.regions[0].traversable_prior == 0.9

    def test_unknown_character_rejected(self):
        with pytest.raises(ModelError, match="unknown grid character"):
            parse_ascii_grid("G.?\n...", region_priors={}, horizon=1,
                             start_cell=(1, 0))

    def test_ragged_rows_rejected(self):
        with pytest.raises(ModelError, match="unequal"):
            parse_ascii_grid("G..\n....", region_priors={}, horizon=1,
                             start_cell=(1, 0))

    def test_missing_prior_rejected(self):
        with pytest.raises(ModelError, match="prior"):
            parse_ascii_grid("G1.", region_priors={}, horizon=1,
                             start_cell=(0, 2))


class TestGridSpecSerialization:
    def test_round_trip_exact(self, tmp_path):
        spec = worlds.load_world("samples5x5")
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        fileio.save_gridspec(spec, p1)
        loaded = fileio.load_gridspec(p1)
        fileio.save_gridspec(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded == spec
