import math

import numpy as np
import pytest

import ladder_oracle as lo
import tempering_sim
from sim_data.models import EdgeAcceptances, Ladder, Mode, ParameterError, SingularSystemError
from sim_data.streams import make_rng


class TestEdgeAcceptance:
    @pytest.mark.parametrize("b0, b1, d", [(1.0, 0.8, 50), (0.3, 0.25, 200), (0.5, 0.6, 20)])
    def test_matches_monte_carlo(self, b0, b1, d):
        n = 1_000_000
        y = make_rng(81).chisquare(d, size=n)
        log_ratio = -(b1 / b0 - 1.0) * y / 2.0 + 0.5 * d * math.log(b1 / b0)
        accept = np.exp(np.minimum(0.0, log_ratio))
        expected = lo.edge_acceptance(b0, b1, d)
        assert abs(accept.mean() - expected) <= 4 * accept.std() / math.sqrt(n)

    @pytest.mark.parametrize("b0, b1, d", [(1.0, 0.8, 50), (0.9, 0.7, 100), (0.2, 0.1, 10)])
    def test_reverse_move_has_equal_acceptance(self, b0, b1, d):
        assert lo.edge_acceptance(b0, b1, d) == pytest.approx(lo.edge_acceptance(b1, b0, d), abs=1e-6)

    def test_depends_only_on_the_ratio(self):
        assert lo.edge_acceptance(1.0, 0.8, 40) == pytest.approx(lo.edge_acceptance(0.5, 0.4, 40), abs=1e-12)

    def test_close_ratios_are_not_merged(self):
        lo._acceptance_for_ratio.cache_clear()
        ratio = 1.0 - 2.0 / math.sqrt(10_000)
        first = lo.edge_acceptance(1.0, ratio, 10_000)
        second = lo.edge_acceptance(1.0, ratio * (1.0 + 1e-14), 10_000)
        assert lo._acceptance_for_ratio.cache_info().currsize == 2
        assert second == pytest.approx(first, abs=1e-9)

    def test_nearby_levels_always_accept(self):
        assert lo.edge_acceptance(1.0, 1.0 - 1e-9, 100) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("target_acc", [0.234, 0.5])
    def test_high_dimension_limit(self, target_acc):
        u = tempering_sim.spacing_parameter(target_acc)
        limit = lo.asymptotic_edge_acceptance(u)
        errors = [abs(lo.edge_acceptance(1.0, 1.0 - u / math.sqrt(d), d) - limit) for d in (1_000, 10_000, 100_000)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[1] < 0.01
        assert errors[2] < 0.005

    @pytest.mark.parametrize("b0, b1, d", [(1.0, 1.0, 10), (0.0, 0.5, 10), (1.0, 1.5, 10), (1.0, 0.5, 0)])
    def test_rejects_invalid(self, b0, b1, d):
        with pytest.raises(ParameterError):
            lo.edge_acceptance(b0, b1, d)


def test_ladder_edges_share_ratio():
    ladder = tempering_sim.build_ladder(0.1, 0.4, 100)
    edges = lo.ladder_edges(ladder, 100)
    assert edges.top == ladder.top
    assert edges.up[:-1] == pytest.approx([edges.up[0]] * (edges.top - 1), abs=1e-12)
    assert edges.up == pytest.approx(edges.down, abs=1e-6)


def test_stationary_acceptance_counts_boundary_rejections():
    edges = EdgeAcceptances.uniform(0.6, 4)
    assert lo.stationary_acceptance(edges) == pytest.approx(0.6 * 4 / 5)


class TestTransitionMatrices:
    edges = EdgeAcceptances(up=(0.3, 0.7, 0.5), down=(0.4, 0.6, 0.2))

    def test_rows_are_stochastic(self):
        for matrix in (lo.level_transition_matrix(self.edges), lo.lifted_transition_matrix(self.edges)):
            np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-15)
            assert matrix.min() >= 0.0

    def test_lifted_chain_keeps_direction_until_rejection(self):
        P = lo.lifted_transition_matrix(self.edges)
        plus0, minus0 = 0, 1
        assert P[plus0, 2] == 0.3
        assert P[plus0, minus0] == pytest.approx(0.7)
        assert P[minus0, plus0] == 1.0

    def test_mean_first_passage_of_a_coin(self):
        P = np.array([[0.75, 0.25], [0.0, 1.0]])
        np.testing.assert_allclose(lo.mean_first_passage(P, [1]), [4.0, 0.0])

    def test_unreachable_target_is_singular(self):
        P = np.array([[1.0, 0.0], [0.5, 0.5]])
        with pytest.raises(SingularSystemError):
            lo.mean_first_passage(P, [1])


class TestReversibleRate:
    def test_single_edge(self):
        rate = lo.round_trip_rate_reversible(EdgeAcceptances.uniform(0.5, 1))
        assert rate.expected_cycle_steps == pytest.approx(8.0)
        assert rate.rate_per_step == pytest.approx(0.125)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
    def test_always_accepting_ladder(self, n):
        rate = lo.round_trip_rate_reversible(EdgeAcceptances.uniform(1.0, n))
        assert rate.expected_cycle_steps == pytest.approx(2 * n * (n + 1))

    def test_halving_acceptance_doubles_cycle(self):
        full = lo.round_trip_rate_reversible(EdgeAcceptances.uniform(0.8, 6))
        half = lo.round_trip_rate_reversible(EdgeAcceptances.uniform(0.4, 6))
        assert half.expected_cycle_steps == pytest.approx(2 * full.expected_cycle_steps)

    def test_zero_edge_is_rejected(self):
        with pytest.raises(SingularSystemError):
            lo.round_trip_rate_reversible(EdgeAcceptances(up=(0.5, 0.0), down=(0.5, 0.5)))


class TestNonreversibleRate:
    def test_single_edge(self):
        rate = lo.round_trip_rate_nonreversible(EdgeAcceptances.uniform(0.5, 1))
        assert rate.expected_cycle_steps == pytest.approx(8.0)
        assert rate.initial_cycle_steps == pytest.approx(7.0)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
    def test_always_accepting_ladder(self, n):
        rate = lo.round_trip_rate_nonreversible(EdgeAcceptances.uniform(1.0, n))
        assert rate.expected_cycle_steps == pytest.approx(2 * n + 2)

    @pytest.mark.parametrize("a, n", [(0.3, 4), (0.5, 10), (0.9, 25)])
    def test_uniform_edges_closed_form(self, a, n):
        rate = lo.round_trip_rate_nonreversible(EdgeAcceptances.uniform(a, n))
        assert rate.expected_cycle_steps == pytest.approx(2 * (n + 1) * (1 + n * (1 - a) / a))

    @pytest.mark.parametrize("a", [0.5, 0.8])
    def test_fixed_acceptance_advantage_tends_to_inverse_rejection(self, a):
        ratios = []
        for n in (10, 20, 40):
            edges = EdgeAcceptances.uniform(a, n)
            ratios.append(lo.round_trip_rate(edges, Mode.NONREVERSIBLE).rate_per_step
                          / lo.round_trip_rate(edges, Mode.REVERSIBLE).rate_per_step)
        assert ratios[0] < ratios[1] < ratios[2] < 1 / (1 - a)
        assert ratios[2] == pytest.approx(1 / (1 - a), rel=0.15)

    def test_advantage_grows_linearly_on_refined_ladders(self):
        ratios = []
        for n in (10, 20, 40):
            edges = EdgeAcceptances.uniform(1 - 1 / n, n)
            ratios.append(lo.round_trip_rate(edges, Mode.NONREVERSIBLE).rate_per_step
                          / lo.round_trip_rate(edges, Mode.REVERSIBLE).rate_per_step)
        assert ratios[1] / ratios[0] == pytest.approx(2.0, rel=0.1)
        assert ratios[2] / ratios[1] == pytest.approx(2.0, rel=0.1)

    def test_dispatch_by_name(self):
        edges = EdgeAcceptances.uniform(0.5, 1)
        assert lo.round_trip_rate(edges, "nonrev").initial_cycle_steps == pytest.approx(7.0)
        assert lo.round_trip_rate(edges, "rev").initial_cycle_steps == pytest.approx(8.0)


def test_rates_on_a_built_ladder_are_finite():
    ladder = Ladder((1.0, 0.8, 0.6, 0.45))
    edges = lo.ladder_edges(ladder, 30)
    for mode in Mode:
        rate = lo.round_trip_rate(edges, mode)
        assert math.isfinite(rate.expected_cycle_steps)
        assert rate.expected_cycle_steps >= 2 * ladder.top + 2


@pytest.mark.parametrize("mode", list(Mode))
def test_raising_an_edge_never_lowers_the_rate(mode):
    rng = make_rng(11, 3)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        accs = rng.uniform(0.05, 0.95, size=n)
        base = lo.round_trip_rate(EdgeAcceptances(up=tuple(accs), down=tuple(accs)), mode).rate_per_step
        k = int(rng.integers(0, n))
        raised = accs.copy()
        raised[k] = rng.uniform(accs[k], 1.0)
        rate = lo.round_trip_rate(EdgeAcceptances(up=tuple(raised), down=tuple(raised)), mode).rate_per_step
        assert rate >= base * (1 - 1e-12)
