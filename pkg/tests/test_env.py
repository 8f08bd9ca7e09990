import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_state
from wpmec.closed_form import local_computing_plan, offloading_plan
from wpmec.config import make_config
from wpmec.env import (DROPPED, LOCAL, MalformedDecision, SlotDecision, WpmecEnv, available_energy,
                       harvested_energy, large_scale_fading, sample_channels, sample_data, step,
                       validate_decision)
from wpmec.rng import make_rng
from wpmec.topology import build_topology

SIGMA_L_25M = 4.476539261166443e-06  # frozen from the free-space formula


def decision(alpha, p_h, x, tau=None, freq=None):
    n = len(x)
    return SlotDecision(alpha, np.asarray(p_h, float), np.asarray(x),
                        np.zeros(n) if tau is None else np.asarray(tau, float),
                        np.zeros(n) if freq is None else np.asarray(freq, float))


class TestChannels:
    def test_large_scale_at_25m(self, table2):
        sigma = large_scale_fading(np.array([[25.0]]), table2)[0, 0]
        assert sigma == pytest.approx(SIGMA_L_25M, rel=1e-12)
        assert sigma == pytest.approx(4.475e-6, rel=1e-3)

    def test_inverse_square(self, table2):
        s = large_scale_fading(np.array([[10.0, 20.0]]), table2)[0]
        assert s[1] == pytest.approx(s[0] / 4, rel=1e-12)

    def test_zero_distance_rejected(self, table2):
        with pytest.raises(ValueError, match="degenerate"):
            large_scale_fading(np.array([[0.0]]), table2)

    def test_small_scale_unit_mean(self, table2):
        rng = make_rng(0, 1)
        topo = build_topology(table2, [[50.0, 50.0]], rng.uniform(0, 100, (100, 2)))
        ls = large_scale_fading(topo.distances, table2)
        ratio = np.concatenate([sample_channels(topo, table2, rng, ls).gains / ls
                                for _ in range(1000)])
        assert ratio.size == 100_000
        assert ratio.mean() == pytest.approx(1.0, rel=0.01)
        assert np.all(ratio > 0)


class TestArrivals:
    def test_mean_and_variance(self, table2):
        d = sample_data(table2, make_rng(0, 1), n=100_000)
        assert d.mean() == pytest.approx(5e4, rel=0.01)
        assert (d / table2.packet_bits).var() == pytest.approx(50, rel=0.05)

    def test_vanishing_rate(self, table2):
        d = sample_data(table2.replace(arrival_rate=1e-12), make_rng(0, 1), n=1000)
        assert not d.any()


class TestEnergy:
    def test_harvest_examples(self):
        assert harvested_energy([3.0], [1e-3], 0.2, 0.51) == pytest.approx(3.06e-4, rel=1e-12)
        assert harvested_energy([1.0, 2.0], [1e-3, 5e-4], 0.1, 0.5) == pytest.approx(1.0e-4, rel=1e-12)
        assert harvested_energy([3.0], [1e-3], 0.0, 0.51) == 0.0

    @pytest.mark.parametrize("ei, eh, cap", [(0.09, 0.02, 0.1), (0, 0.03, 0.1), (0.1, 0, 0.1)])
    def test_available_energy(self, ei, eh, cap):
        assert available_energy(ei, eh, cap) == pytest.approx(min(ei + eh, cap))

    @settings(max_examples=50, deadline=None)
    @given(a1=st.floats(0, 0.4), a2=st.floats(0, 0.4), p=st.floats(0, 3), h=st.floats(1e-9, 1e-2))
    def test_harvest_monotone_in_alpha(self, a1, a2, p, h):
        lo, hi = sorted((a1, a2))
        assert harvested_energy([p], [h], lo, 0.51) <= harvested_energy([p], [h], hi, 0.51)


class TestStep:
    def test_local_from_battery(self, table2, single_link):
        plan = local_computing_plan(5e4, table2)
        state = make_state([[1e-5]], [5e4], [1e-3])
        out = step(state, decision(0.0, [0.0], [LOCAL], freq=[plan.freq]),
                   table2.replace(data_demand=5e4), single_link)
        assert out.psi == 0.0
        assert out.demand_met
        assert out.next_state.battery[0] == pytest.approx(1e-3 - 7.8125e-4, rel=1e-12)

    def test_all_dropped(self, table2, single_link):
        state = make_state([[1e-5]], [5e4], [0.0])
        out = step(state, decision(0.2, [3.0], [DROPPED]), table2, single_link)
        assert out.psi == pytest.approx(0.6)
        assert out.wd_energy[0] == 0.0
        assert out.next_state.battery[0] > 0
        assert out.low_rewards[0] == 0.0

    def test_edge_processing_energy(self, table2, single_link):
        plan = offloading_plan(5e4, 1e-3, table2)
        state = make_state([[1e-3]], [5e4], [0.01])
        out = step(state, decision(0.0, [0.0], [1], tau=[plan.tau]), table2, single_link)
        assert out.e2[0] == pytest.approx(0.05, rel=1e-12)
        assert out.psi == out.e2[0]

    def test_out_of_zone_rejected_before_mutation(self, table2):
        topo = build_topology(table2, [[0.0, 0.0]], [[90.0, 90.0]])
        state = make_state([[1e-9]], [5e4], [0.0])
        with pytest.raises(MalformedDecision, match="out-of-zone"):
            step(state, decision(0.0, [0.0], [1], tau=[0.1]), table2, topo)
        assert state.battery[0] == 0.0

    def test_bounds_rejected(self, table2, single_link):
        state = make_state([[1e-5]], [5e4], [0.0])
        with pytest.raises(MalformedDecision):
            step(state, decision(0.5, [1.0], [DROPPED]), table2, single_link)
        with pytest.raises(MalformedDecision):
            step(state, decision(0.1, [4.0], [DROPPED]), table2, single_link)

    def test_shortest_first_admission(self, table2):
        topo = build_topology(table2, [[50.0, 50.0]], [[55.0, 50.0], [50.0, 56.0], [45.0, 50.0]])
        gains = [[1e-4], [1e-4], [1e-4]]
        state = make_state(gains, [5e4, 5e4, 5e4], [0.1, 0.1, 0.1])
        tau = [0.15, 0.1, 0.1]
        out = step(state, decision(0.2, [0.0], [1, 1, 1], tau=tau), table2, topo)
        assert list(out.assignment) == [DROPPED, 1, 1]
        assert out.rejected == {0: "time_budget"}
        assert out.wd_energy[0] == 0.0

    def test_energy_shortfall_dropped(self, table2, single_link):
        plan = local_computing_plan(5e4, table2)
        state = make_state([[1e-9]], [5e4], [1e-4])
        out = step(state, decision(0.0, [0.0], [LOCAL], freq=[plan.freq]), table2, single_link)
        assert out.assignment[0] == DROPPED and out.rejected[0] == "energy"
        assert out.next_state.battery[0] == 1e-4

    def test_zero_data_dropped(self, table2, single_link):
        state = make_state([[1e-5]], [0.0], [0.01])
        out = step(state, decision(0.0, [0.0], [LOCAL], freq=[1e8]), table2, single_link)
        assert out.assignment[0] == DROPPED and out.low_rewards[0] == 0.0


class TestValidation:
    @pytest.fixture
    def ok(self, table2, single_link):
        state = make_state([[1e-5]], [5e4], [0.0])
        return state, table2.replace(data_demand=0.0), single_link

    def test_wpt_duration(self, ok):
        state, cfg, topo = ok
        assert "wpt_duration" in validate_decision(state, decision(1.1 * 0.4, [0.0], [DROPPED]), cfg, topo)

    def test_hap_power(self, ok):
        state, cfg, topo = ok
        assert validate_decision(state, decision(0.1, [4.5], [DROPPED]), cfg, topo) == {"hap_power"}

    def test_time_budget(self, table2):
        topo = build_topology(table2, [[50.0, 50.0]], [[55.0, 50.0], [45.0, 50.0]])
        state = make_state([[1e-4], [1e-4]], [5e4, 5e4], [0.1, 0.1])
        bad = validate_decision(state, decision(0.2, [0.0], [1, 1], tau=[0.15, 0.1]),
                                table2.replace(data_demand=0.0), topo)
        assert bad == {"hap_time_budget"}

    def test_demand_and_delay(self, ok):
        state, cfg, topo = ok
        bad = validate_decision(state, decision(0.0, [0.0], [LOCAL], freq=[1e8]),
                                cfg.replace(data_demand=1e5), topo)
        assert {"demand", "local_delay", "local_energy"} <= bad


def random_decision(rng, state, cfg, topo):
    n, m = topo.n_wds, topo.m_haps
    x = np.array([rng.choice([DROPPED, LOCAL, *(np.flatnonzero(topo.zone_mask[i]) + 1)])
                  for i in range(n)])
    tau = rng.uniform(0, cfg.slot_duration / 2, n) * (x > 0)
    freq = rng.uniform(0, 1.2 * cfg.f_max, n) * (x == 0)
    return decision(rng.uniform(0, cfg.slot_duration), rng.uniform(0, cfg.p_max, m), x, tau, freq)


def test_invariants_over_random_steps(desk):
    """Battery bounds, energy conservation and repaired-decision feasibility."""
    env = WpmecEnv(desk, build_topology(desk, [[2, 2], [6, 2]], make_rng(0, 0).uniform(0, 8, (6, 2))))
    rng = make_rng(0, 99)
    state = env.reset(0)
    for t in range(2000):
        if env.done:
            state = env.reset(t)
        d = random_decision(rng, state, desk, env.topology)
        out = env.step(d)
        b = out.next_state.battery
        assert np.all((b >= 0) & (b <= desk.battery_capacity))
        assert np.array_equal(b, out.available - out.wd_energy)
        assert out.psi == float(np.sum(out.e1 + out.e2))
        assert np.all(out.wd_energy[out.assignment < 0] == 0)
        repaired = decision(d.alpha, d.p_h, out.assignment, d.tau_o * (out.assignment > 0),
                            d.freq * (out.assignment == 0))
        bad = validate_decision(state, repaired, desk.replace(data_demand=0.0), env.topology)
        assert not bad
        state = out.next_state
