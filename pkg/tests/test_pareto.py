import numpy as np
import pytest

from irc_pareto import channel, pareto
from irc_pareto.neutralization import check_in_feasibility
from irc_pareto.pareto import ParetoPoint, RateRegion

PS, PR = 10.0, 100.0


def in_feasible_channel(seed=0):
    for i in range(100):
        ch = channel.draw_channel(2, 2, seed, i)
        if check_in_feasibility(ch, np.full(2, PS), PR).feasible:
            return ch
    raise RuntimeError("no IN-feasible channel found")


class TestSingleUser:
    @pytest.mark.parametrize("seed", range(4))
    def test_at_least_relay_off(self, seed):
        ch = channel.draw_channel(2, 2, seed)
        p = np.full(2, PS)
        for j in range(2):
            g, R = pareto.single_user_solution(ch, p, PR, j)
            assert g >= abs(ch.H[j, j]) ** 2 * PS * (1 - 1e-9)
            assert channel.relay_power(ch, p, R) <= PR * (1 + 1e-6)

    def test_zero_budget_is_relay_off(self):
        ch = channel.draw_channel(2, 2, 1)
        g = pareto.single_user_point(ch, np.full(2, PS), 0.0, 0)
        assert g == pytest.approx(abs(ch.H[0, 0]) ** 2 * PS, rel=1e-6)

    def test_beats_random_relays(self):
        ch = channel.draw_channel(2, 2, 2)
        p = np.full(2, PS)
        g = pareto.single_user_point(ch, p, PR, 1)
        rng = channel.make_rng(2, 3)
        for _ in range(3000):
            R = rng.uniform(0, 2) * channel.complex_gaussian(rng, (2, 2))
            if channel.relay_power(ch, p, R) <= PR:
                noise = np.linalg.norm(ch.G_dr[:, 1].conj() @ R) ** 2 + 1
                assert abs(ch.effective_gains(R)[1, 1]) ** 2 * PS / noise <= g * (1 + 1e-6)

    def test_in_mode_infeasible_channel(self):
        ch = channel.draw_channel(2, 2, 1)
        assert pareto.single_user_solution(ch, np.full(2, PS), 0.0, 0, "in") == (0.0, None)


class TestSolvePb:
    def test_point_invariants(self):
        ch = channel.draw_channel(2, 2, 3)
        p = np.full(2, PS)
        pt = pareto.solve_pb(ch, p, [0.5], PR)
        assert pt.feasible
        s = channel.sinrs(ch, p, pt.relay)
        np.testing.assert_allclose(pt.rates, np.log2(1 + s), rtol=1e-12)
        assert s[1] >= 0.5 * (1 - 1e-6)
        assert channel.relay_power(ch, p, pt.relay) <= PR * (1 + 1e-6)
        assert pt.extraction in ("rank_one_exact", "rank_reduced", "randomized")

    def test_infeasible_target(self):
        ch = channel.draw_channel(2, 2, 3)
        pt = pareto.solve_pb(ch, np.full(2, PS), [1e4], PR)
        assert not pt.feasible and pt.relay is None

    def test_in_mode_neutralizes(self):
        ch = in_feasible_channel()
        pt = pareto.solve_pb(ch, np.full(2, PS), [0.5], PR, mode="in")
        assert pt.feasible and channel.satisfies_in(ch, pt.relay)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            pareto.solve_pb(channel.draw_channel(2, 2, 0), np.ones(2), [0.1], 1.0, mode="x")

    def test_power_refinement_dominates(self):
        ch = channel.draw_channel(2, 2, 4)
        pt = pareto.solve_pb(ch, np.full(2, PS), [0.5], PR)
        ref = pareto.refine_power(pt, ch, PS, PR)
        assert ref.rates[0] >= pt.rates[0]
        assert channel.sinrs(ch, ref.powers, ref.relay)[1] >= 0.5 * (1 - 1e-6)


class TestSweep:
    def test_grid(self):
        g = pareto.target_grid([2.0], 5)
        np.testing.assert_allclose(np.ravel(g), [0, 0.5, 1, 1.5, 2])
        assert len(pareto.target_grid([1.0, 1.0], 3)) == 9
        with pytest.raises(ValueError):
            pareto.target_grid([1.0], 1)

    def test_two_point_grid_in_mode(self):
        ch = in_feasible_channel()
        p = np.full(2, PS)
        region = pareto.sweep_boundary(ch, p, PR, "in", grid_n=2)
        g2 = region.diagnostics["gamma_max"][0]
        np.testing.assert_allclose([pt.targets[0] for pt in region.points], [0.0, g2])
        g1 = pareto.single_user_point(ch, p, PR, 0, "in")
        assert region.points[0].sinr1 == pytest.approx(g1, rel=1e-5)
        assert all(pt.feasible for pt in region.points)

    def test_in_infeasible_channel_all_infeasible(self):
        ch = channel.draw_channel(2, 2, 1)
        region = pareto.sweep_boundary(ch, np.full(2, PS), 0.5, "in", grid_n=4)
        assert len(region.points) == 4
        assert not any(pt.feasible for pt in region.points)

    def test_general_monotone_and_above_in(self):
        ch = in_feasible_channel(1)
        p = np.full(2, PS)
        gen = pareto.sweep_boundary(ch, p, PR, "general", grid_n=6)
        s1 = [pt.sinr1 for pt in gen.points if pt.feasible]
        assert np.all(np.diff(s1) <= 1e-6 * max(s1))
        for g in np.linspace(0, 0.8, 4) * gen.diagnostics["gamma_max"][0]:
            a = pareto.solve_pb(ch, p, [g], PR, "in")
            b = pareto.solve_pb(ch, p, [g], PR, "general")
            if a.feasible:
                assert b.feasible and b.sinr1 >= a.sinr1 * (1 - 1e-6) - 1e-6

    def test_ne_anchor_improves_on_equilibrium(self):
        for i in range(3):
            ch = channel.draw_channel(2, 2, 9, i)
            ne = pareto.nash_equilibrium_rates(ch, PS)
            pt = pareto.solve_pb(ch, np.full(2, PS), [2 ** ne[1] - 1], PR)
            assert pt.feasible and pt.rates[0] >= ne[0] - 1e-6


class TestBaselineAndMetrics:
    def test_ic_envelope(self):
        ch = channel.draw_channel(2, 2, 5)
        region = pareto.ic_baseline_region(ch, PS, grid_n=21)
        ne = pareto.nash_equilibrium_rates(ch, PS)
        r = np.array([pt.rates for pt in region.points])
        for j in range(2):
            single = np.log2(1 + abs(ch.H[j, j]) ** 2 * PS)
            assert np.isclose(r[:, j], single).any()
        # full-power corner is the equilibrium point, and it is on or under the envelope
        assert np.any(np.all(r >= ne - 1e-12, axis=1))
        for a in r:
            assert not np.any(np.all(r >= a, axis=1) & np.any(r > a, axis=1))

    def test_ne_symmetric(self):
        H = np.array([[1.0, 0.5j], [0.5, 1j]])
        ch = channel.ChannelRealization(H, np.eye(2), np.eye(2))
        ne = pareto.nash_equilibrium_rates(ch, PS)
        assert ne[0] == pytest.approx(ne[1], rel=1e-14)

    def test_ne_matches_sinr(self):
        ch = channel.draw_channel(2, 2, 6)
        R = 0.1 * np.ones((2, 2))
        np.testing.assert_allclose(pareto.nash_equilibrium_rates(ch, PS, R),
                                   np.log2(1 + channel.sinrs(ch, np.full(2, PS), R)))

    def _region(self, rates):
        pts = [ParetoPoint(np.array(r, float), np.array([0.0]), None, np.ones(2), True)
               for r in rates]
        return RateRegion(pts, "general_relay")

    def test_max_sum_rate(self):
        assert pareto.max_sum_rate(self._region([[1, 2]])) == 3
        a = pareto.max_sum_rate(self._region([[1, 2], [3, 1], [0, 0]]))
        b = pareto.max_sum_rate(self._region([[0, 0], [3, 1], [1, 2]]))
        assert a == b == 4
        with pytest.raises(ValueError):
            pareto.max_sum_rate(self._region([]))

    def test_fairness(self):
        ne = np.array([1.0, 1.0])
        assert pareto.proportional_fairness(self._region([ne]), ne) == 0.0
        assert pareto.proportional_fairness(self._region([[2.0, 3.0], [0.5, 9]]), ne) >= 2.0

    def test_envelope_drops_dominated(self):
        env = pareto.envelope(self._region([[1, 1], [2, 2], [3, 0], [2, 2]]))
        assert sorted(map(tuple, (pt.rates for pt in env.points))) == [(2, 2), (2, 2), (3, 0)]
        assert env.diagnostics["raw_points"] == 4


class TestSerialization:
    def test_region_json_and_csv(self):
        ch = channel.draw_channel(2, 2, 7)
        region = pareto.sweep_boundary(ch, np.full(2, PS), PR, "general", grid_n=3)
        back = RateRegion.from_json(region.to_json())
        assert back.to_json() == region.to_json()
        lines = region.to_csv().splitlines()
        assert lines[0] == "gamma_2,rate_1,rate_2,feasible,extraction,gap"
        assert len(lines) == 4

    def test_csv_rates_recomputable(self):
        ch = channel.draw_channel(2, 2, 8)
        region = pareto.sweep_boundary(ch, np.full(2, PS), PR, "general", grid_n=3)
        for pt in RateRegion.from_json(region.to_json()).feasible_points:
            s = channel.sinrs(ch, pt.powers, pt.relay)
            np.testing.assert_allclose(pt.rates, np.log2(1 + s), rtol=1e-9)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            RateRegion([], "other")
