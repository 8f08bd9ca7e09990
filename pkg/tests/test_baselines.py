import numpy as np
import pytest

from conftest import make_state
from wpmec.baselines import fixed_high_action, greedy_policy, lc_policy, random_policy, rec_policy
from wpmec.closed_form import local_computing_plan, offloading_plan, resource_plan
from wpmec.env import DROPPED, LOCAL, SlotDecision, sample_channels, sample_data, step
from wpmec.rng import TOPOLOGY, make_rng
from wpmec.topology import build_topology, generate_topology

ALL = np.array([True, True, True])


@pytest.fixture(scope="module")
def line(table2):
    """Three WDs near HAP 1; WD 2 is also inside HAP 2's zone."""
    return build_topology(table2, [[0.0, 0.0], [60.0, 0.0]], [[5.0, 0.0], [10.0, 0.0], [40.0, 0.0]])


def run(state, x, alpha, p, cfg, topo):
    tau, freq = resource_plan(state.data, state.channels.gains, x, cfg)
    return step(state, SlotDecision(alpha, np.asarray(p, float), x, tau, freq), cfg, topo)


class TestLocal:
    def test_all_local(self, table2):
        state = make_state(np.full((3, 2), 1e-3), [5e4, 5e4, 0.0], [1.0] * 3)
        x = lc_policy(state, ALL, np.full(3, 0.1), table2)
        assert list(x) == [LOCAL, LOCAL, DROPPED]

    def test_overload_dropped(self, table2):
        state = make_state(np.full((2, 1), 1e-3), [1.2e5 + 1, 5e4], [1.0, 1.0])
        assert list(lc_policy(state, ALL[:2], np.full(2, 0.1), table2)) == [DROPPED, LOCAL]

    def test_energy_short_dropped(self, table2):
        e = local_computing_plan(5e4, table2).energy
        state = make_state(np.full((2, 1), 1e-3), [5e4, 5e4], [0.0, 0.0])
        assert list(lc_policy(state, ALL[:2], np.array([e / 2, e]), table2)) == [DROPPED, LOCAL]

    def test_unscheduled_dropped(self, table2):
        state = make_state(np.full((3, 1), 1e-3), [5e4] * 3, [1.0] * 3)
        x = lc_policy(state, np.array([True, False, True]), np.full(3, 0.1), table2)
        assert list(x) == [LOCAL, DROPPED, LOCAL]

    def test_no_processing_energy(self, table2):
        topo = generate_topology(table2, make_rng(4, TOPOLOGY))
        rng = np.random.default_rng(0)
        for _ in range(20):
            state = make_state(sample_channels(topo, table2, rng).gains,
                               sample_data(table2, rng, topo.n_wds), np.full(topo.n_wds, 0.05))
            x = lc_policy(state, np.ones(topo.n_wds, bool), state.battery, table2)
            out = run(state, x, 0.1, np.full(topo.m_haps, 1.0), table2, topo)
            assert np.all(out.e2 == 0.0)
            assert out.n_edge == 0


class TestRandomEdge:
    def test_single_hap(self, table2):
        state = make_state(np.full((3, 1), 1e-3), [5e4, 5e4, 5e4], [0.0] * 3)
        x = rec_policy(state, ALL, 1, np.random.default_rng(0))
        assert list(x) == [1, 1, 1]

    def test_uniform_choice(self):
        state = make_state(np.full((1, 3), 1e-3), [5e4], [0.0])
        rng = np.random.default_rng(11)
        picks = np.array([rec_policy(state, ALL[:1], 3, rng)[0] for _ in range(100_000)])
        freq = np.bincount(picks, minlength=4)[1:] / len(picks)
        assert np.all(np.abs(freq - 1 / 3) < 0.02 / 3)

    def test_never_local(self):
        rng = np.random.default_rng(0)
        state = make_state(np.full((3, 2), 1e-3), [5e4, 0.0, 5e4], [0.0] * 3)
        for _ in range(100):
            x = rec_policy(state, ALL, 2, rng)
            assert LOCAL not in x
            assert x[1] == DROPPED


class TestRandom:
    def test_respects_zones(self, table2, line):
        state = make_state(np.full((3, 2), 1e-3), [5e4] * 3, [0.0] * 3)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(300):
            x = random_policy(state, ALL, line, rng)
            assert x[0] in (LOCAL, 1) and x[1] in (LOCAL, 1)
            seen.update(x.tolist())
        assert seen == {LOCAL, 1, 2}


class TestGreedy:
    def test_no_zone_goes_local(self, table2):
        topo = build_topology(table2, [[0.0, 0.0]], [[90.0, 90.0]])
        state = make_state([[1e-6]], [5e4], [1.0])
        assert list(greedy_policy(state, ALL[:1], np.array([0.1]), table2, topo)) == [LOCAL]

    def test_strong_link_comparison(self, table2, single_link):
        d = 5e4
        state = make_state([[1e3]], [d], [1.0])
        e_l = local_computing_plan(d, table2).energy
        e_o = offloading_plan(d, 1e3, table2).energy
        expected = 1 if table2.e_m * d + e_o < e_l else LOCAL
        assert greedy_policy(state, ALL[:1], np.array([1.0]), table2, single_link)[0] == expected
        cheap = table2.replace(e_m=1e-9)
        assert greedy_policy(state, ALL[:1], np.array([1.0]), cheap, single_link)[0] == 1

    def test_infeasible_both_ways(self, table2, single_link):
        state = make_state([[1e-12]], [2e5], [0.0])
        assert greedy_policy(state, ALL[:1], np.array([0.0]), table2, single_link)[0] == DROPPED


class TestFixedHigh:
    def test_layout_and_ranking(self, table2):
        state = make_state([[1e-3, 1e-5], [1e-2, 1e-4], [1e-4, 1e-6]], [5e4] * 3, [0.0] * 3)
        a = fixed_high_action(state, table2)
        assert a[0] == table2.slot_duration / 2
        np.testing.assert_array_equal(a[1:3], [table2.p_max] * 2)
        np.testing.assert_array_equal(a[3:], [table2.cost_max / 2, 0.0, table2.cost_max])


def test_baselines_pass_admission(table2):
    topo = generate_topology(table2, make_rng(2, TOPOLOGY))
    rng = np.random.default_rng(5)
    for _ in range(30):
        state = make_state(sample_channels(topo, table2, rng).gains,
                           sample_data(table2, rng, topo.n_wds),
                           rng.uniform(0, table2.battery_capacity, topo.n_wds))
        sched = rng.random(topo.n_wds) < 0.7
        avail = state.battery
        for x in (lc_policy(state, sched, avail, table2),
                  random_policy(state, sched, topo, rng),
                  greedy_policy(state, sched, avail, table2, topo)):
            run(state, x, 0.2, np.full(topo.m_haps, 2.0), table2, topo)
        # REC ignores zones, so it runs against an unlimited-zone copy
        run(state, rec_policy(state, sched, topo.m_haps, rng), 0.2, np.full(topo.m_haps, 2.0),
            table2, topo.with_zone_radius(np.inf))
