import math

import numpy as np
import pytest

import ladder_oracle
import tempering_sim
from sim_data.models import MINUS, PLUS, Ladder, Mode, ParameterError, TemperConfig, TemperState
from sim_data.streams import make_rng


def config_for(mode, target_acc=0.234, beta_min=0.1, d=100, iterations=2_000_000, seed=5):
    ladder = tempering_sim.build_ladder(beta_min, target_acc, d)
    return TemperConfig(d=d, ladder=ladder, mode=mode, iterations=iterations, seed=seed)


class TestBuildLadder:
    def test_geometric_with_clamped_end(self):
        ladder = tempering_sim.build_ladder(0.1, 0.234, 100)
        r = 1 - tempering_sim.spacing_parameter(0.234) / 10
        assert ladder.betas[0] == 1.0
        assert ladder.betas[-1] == 0.1
        assert ladder.ratios[:-1] == pytest.approx([r] * (ladder.top - 1), rel=1e-12)
        assert r <= ladder.ratios[-1] < 1.0

    def test_wider_spacing_means_fewer_levels(self):
        assert tempering_sim.build_ladder(0.1, 0.1, 100).n_levels < tempering_sim.build_ladder(0.1, 0.5, 100).n_levels

    def test_spacing_parameter_inverts_acceptance(self):
        u = tempering_sim.spacing_parameter(0.3)
        assert ladder_oracle.asymptotic_edge_acceptance(u) == pytest.approx(0.3, abs=1e-12)

    @pytest.mark.parametrize("beta_min, acc, d", [(0.0, 0.3, 100), (1.0, 0.3, 100), (0.1, 1.0, 100),
                                                  (0.1, 0.3, 0), (0.1, 0.01, 4)])
    def test_rejects_invalid(self, beta_min, acc, d):
        with pytest.raises(ParameterError):
            tempering_sim.build_ladder(beta_min, acc, d)

    def test_edge_acceptance_approaches_target_in_high_dimension(self):
        ladder = tempering_sim.build_ladder(0.5, 0.5, 10_000)
        accept = ladder_oracle.edge_acceptance(ladder.betas[0], ladder.betas[1], 10_000)
        assert accept == pytest.approx(0.5, abs=0.01)


class TestSwap:
    def test_identity_move(self):
        assert tempering_sim.swap_log_ratio(0.5, 0.5, 3.0, 10) == 0.0
        assert tempering_sim.swap_acceptance(0.5, 0.5, 3.0, 10) == 1.0

    def test_indifference_point(self):
        b0, b1, d = 0.8, 0.6, 50
        s = d * math.log(b1 / b0) / (b1 - b0)
        assert tempering_sim.swap_log_ratio(b0, b1, s, d) == pytest.approx(0.0, abs=1e-12)

    def test_rejects_invalid(self):
        with pytest.raises(ParameterError):
            tempering_sim.swap_log_ratio(1.2, 0.5, 1.0, 10)
        with pytest.raises(ParameterError):
            tempering_sim.swap_log_ratio(1.0, 0.5, 0.0, 10)

    @pytest.mark.parametrize("b0, b1", [(1.0, 0.85), (0.85, 1.0)])
    def test_mean_acceptance_matches_quadrature(self, b0, b1):
        d, n = 100, 200_000
        rng = make_rng(61)
        s = rng.chisquare(d, size=n) / b0
        mean = np.mean([tempering_sim.swap_acceptance(b0, b1, x, d) for x in s])
        assert mean == pytest.approx(ladder_oracle.edge_acceptance(b0, b1, d), abs=5e-3)


class TestReferenceStep:
    def test_lifted_direction_flips_on_rejection(self):
        config = config_for(Mode.NONREVERSIBLE, iterations=1000)
        rng = make_rng(71)
        state = tempering_sim.initial_state(config, rng)
        for _ in range(5000):
            nxt = tempering_sim.advance(state, config, rng)
            nxt.check(config.ladder)
            if nxt.level == state.level:
                assert nxt.dir == -state.dir
            else:
                assert nxt.level - state.level == state.dir
                assert nxt.dir == state.dir
            state = nxt

    def test_reversible_moves_one_level(self):
        config = config_for(Mode.REVERSIBLE, iterations=1000)
        rng = make_rng(72)
        state = TemperState(level=0, dir=PLUS, s=100.0)
        for _ in range(5000):
            nxt = tempering_sim.advance(state, config, rng)
            assert abs(nxt.level - state.level) <= 1
            assert nxt.dir == PLUS
            state = nxt

    def test_reference_and_fast_runs_agree_on_acceptance(self):
        config = config_for(Mode.NONREVERSIBLE, iterations=100_000)
        rng = make_rng(73)
        state = tempering_sim.initial_state(config, rng)
        moved = 0
        n = 50_000
        for _ in range(n):
            nxt = tempering_sim.advance(state, config, rng)
            moved += nxt.level != state.level
            state = nxt
        fast = tempering_sim.run(config).empirical_acc
        assert moved / n == pytest.approx(fast, abs=0.02)


class TestRun:
    def test_deterministic(self):
        config = config_for(Mode.NONREVERSIBLE, iterations=200_000)
        assert tempering_sim.run(config) == tempering_sim.run(config)

    def test_counters_are_consistent(self):
        stats = tempering_sim.run(config_for(Mode.REVERSIBLE, iterations=300_000))
        assert stats.proposals == 300_000
        assert sum(stats.level_visits) == 300_000
        assert stats.acceptances == sum(stats.up_moves) + sum(stats.down_moves)
        assert 0 < stats.empirical_acc < stats.edge_acc < 1

    def test_level_marginal_is_uniform(self):
        stats = tempering_sim.run(config_for(Mode.NONREVERSIBLE))
        uniform = 1 / len(stats.level_visits)
        assert stats.occupancy == pytest.approx([uniform] * len(stats.level_visits), abs=0.01)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_acceptance_matches_oracle(self, mode):
        config = config_for(mode)
        stats = tempering_sim.run(config)
        edges = ladder_oracle.ladder_edges(config.ladder, config.d)
        assert stats.empirical_acc == pytest.approx(ladder_oracle.stationary_acceptance(edges), abs=0.01)
        assert stats.edge_acc == pytest.approx(edges.mean(), abs=0.02)

    @pytest.mark.parametrize("mode", list(Mode))
    @pytest.mark.parametrize("target_acc", [0.234, 0.5])
    def test_round_trip_rate_matches_oracle(self, mode, target_acc):
        config = config_for(mode, target_acc=target_acc, iterations=4_000_000)
        stats = tempering_sim.run(config)
        oracle = ladder_oracle.round_trip_rate(ladder_oracle.ladder_edges(config.ladder, config.d), mode)
        expected = config.iterations * oracle.rate_per_step
        # cycle lengths are less dispersed than exponential, so sqrt(count) bounds the noise
        assert abs(stats.round_trips - expected) <= 3 * math.sqrt(expected) + 1

    def test_lifted_beats_reversible_on_fine_ladders(self):
        rev = config_for(Mode.REVERSIBLE, target_acc=0.6)
        nonrev = config_for(Mode.NONREVERSIBLE, target_acc=0.6)
        assert rev.ladder.n_levels >= 10
        assert tempering_sim.run(nonrev).round_trips > tempering_sim.run(rev).round_trips

    def test_initial_direction_is_respected(self):
        config = config_for(Mode.NONREVERSIBLE, iterations=1)
        down = TemperConfig(d=config.d, ladder=config.ladder, mode=config.mode, iterations=1,
                            seed=1, initial_dir=MINUS)
        stats = tempering_sim.run(down)
        assert stats.boundary_proposals == 1
        assert stats.level_visits[0] == 1

    @pytest.mark.parametrize("mode", list(Mode))
    @pytest.mark.parametrize("betas", [(1.0, 0.7), (1.0, 0.7, 0.49)])
    def test_short_ladders_match_oracle(self, mode, betas):
        config = TemperConfig(d=10, ladder=Ladder(betas), mode=mode, iterations=2_000_000, seed=3)
        stats = tempering_sim.run(config)
        oracle = ladder_oracle.round_trip_rate(ladder_oracle.ladder_edges(config.ladder, config.d), mode)
        expected = config.iterations * oracle.rate_per_step
        assert len(stats.level_visits) == len(betas)
        assert abs(stats.round_trips - expected) <= 3 * math.sqrt(expected) + 1

    @pytest.mark.parametrize("mode", list(Mode))
    def test_edge_flows_balance(self, mode):
        ladder = Ladder((1.0, 0.8, 0.64))
        config = TemperConfig(d=20, ladder=ladder, mode=mode, iterations=2_000_000, seed=9)
        stats = tempering_sim.run(config)
        edges = ladder_oracle.ladder_edges(ladder, config.d)
        for k in range(ladder.top):
            # a nearest-neighbour path crosses each edge alternately
            assert abs(stats.up_moves[k] - stats.down_moves[k]) <= 1
            # uniform level marginal, half of the proposals go up
            expected = config.iterations / ladder.n_levels / 2 * edges.up[k]
            assert stats.up_moves[k] == pytest.approx(expected, rel=0.02)
            assert stats.down_moves[k] == pytest.approx(expected, rel=0.02)

    def test_rate_does_not_depend_on_initial_direction(self):
        ladder = Ladder((1.0, 0.8, 0.64, 0.5))
        counts = []
        for seed, initial_dir in ((21, PLUS), (22, MINUS)):
            config = TemperConfig(d=20, ladder=ladder, mode=Mode.NONREVERSIBLE, iterations=2_000_000,
                                  seed=seed, initial_dir=initial_dir)
            counts.append(tempering_sim.run(config).round_trips)
        oracle = ladder_oracle.round_trip_rate(ladder_oracle.ladder_edges(ladder, 20), Mode.NONREVERSIBLE)
        expected = 2_000_000 * oracle.rate_per_step
        assert abs(counts[0] - counts[1]) <= 4 * math.sqrt(2 * expected) + 2


class TestMeasureAcceptance:
    def test_matches_oracle(self):
        config = config_for(Mode.REVERSIBLE)
        edges = ladder_oracle.ladder_edges(config.ladder, config.d)
        measured = tempering_sim.measure_acceptance(config, 2_000_000)
        assert measured == pytest.approx(ladder_oracle.stationary_acceptance(edges), abs=0.01)

    def test_modes_agree(self):
        rev = tempering_sim.measure_acceptance(config_for(Mode.REVERSIBLE), 2_000_000)
        nonrev = tempering_sim.measure_acceptance(config_for(Mode.NONREVERSIBLE), 2_000_000)
        assert rev == pytest.approx(nonrev, abs=0.02)

    @pytest.mark.slow
    def test_long_calibration(self):
        config = config_for(Mode.REVERSIBLE)
        edges = ladder_oracle.ladder_edges(config.ladder, config.d)
        measured = tempering_sim.measure_acceptance(config, 10_000_000)
        assert measured == pytest.approx(ladder_oracle.stationary_acceptance(edges), abs=0.005)
