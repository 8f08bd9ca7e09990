import numpy as np
import pytest

from grid_oracle import grid_optimum
from conftest import make_state
from wpmec import baselines
from wpmec.agents.features import derive_feasible_set
from wpmec.closed_form import local_computing_plan, offloading_plan, resource_plan
from wpmec.config import make_config
from wpmec.env import DROPPED, LOCAL, SlotDecision, step
from wpmec.oracle import (OracleBudgetError, SlotInstance, assignment_string, oracle_gap,
                          random_instance, solve_slot)
from wpmec.topology import build_topology


@pytest.fixture(scope="module")
def tiny():
    return make_config("desk", n_wds=3, m_haps=2)


@pytest.fixture(scope="module")
def tiny_instances(tiny):
    return [random_instance(tiny, 3, i, battery_scale=0.1) for i in range(20)]


def fixed_high_decision(inst, choose):
    """Fixed high-level action, cost-ranked scheduling and ``choose`` for the assignment."""
    state, cfg = inst.state, inst.cfg
    a = baselines.fixed_high_action(state, cfg)
    m = inst.topology.m_haps
    scheduled, _ = derive_feasible_set(a[1 + m:], state.data, cfg.data_demand)
    x = choose(state, scheduled)
    tau, freq = resource_plan(state.data, state.channels.gains, x, cfg)
    return SlotDecision(float(a[0]), a[1:1 + m], x, tau, freq)


class TestSingleLink:
    def test_charged_battery_local_is_free(self, table2, single_link):
        cfg = table2.replace(data_demand=5e4)
        state = make_state([[1e-3]], [5e4], [1e-3])
        sol = solve_slot(SlotInstance(state, cfg, single_link))
        assert sol.feasible
        assert sol.psi == 0.0
        assert list(sol.assignment) == [LOCAL]

    def test_empty_battery_edge_covering(self, table2, single_link):
        cfg = table2.replace(data_demand=1.3e5)
        d, h = 1.3e5, 1e-2
        assert not local_computing_plan(d, cfg).feasible
        state = make_state([[h]], [d], [0.0])
        inst = SlotInstance(state, cfg, single_link)
        sol = solve_slot(inst)
        e_o = offloading_plan(d, h, cfg).energy
        expected = e_o / (cfg.eh_efficiency * h) + cfg.e_m * d
        assert list(sol.assignment) == [1]
        assert sol.psi == pytest.approx(expected, rel=1e-12)
        assert sol.psi == pytest.approx(grid_optimum(inst), rel=1e-3)

    def test_unsatisfiable_demand(self, table2, single_link):
        cfg = table2.replace(data_demand=1e6)
        sol = solve_slot(SlotInstance(make_state([[1e-3]], [5e4], [0.0]), cfg, single_link))
        assert not sol.feasible
        assert sol.psi == 0.0
        assert list(sol.assignment) == [DROPPED]


class TestSearch:
    def test_budget(self, desk):
        cfg = desk.replace(n_wds=9)
        with pytest.raises(OracleBudgetError, match="heuristic"):
            solve_slot(random_instance(cfg, 0))

    def test_examined_count(self, tiny):
        inst = random_instance(tiny, 5, 0, battery_scale=0.0)
        sol = solve_slot(inst, prune=False)
        # dropped, local (when feasible) and in-zone HAPs per WD
        assert sol.assignments_examined <= (tiny.m_haps + 2) ** tiny.n_wds

    def test_pruned_matches_unpruned(self, tiny):
        for i in range(50):
            inst = random_instance(tiny, 1, i, battery_scale=float(i % 3) / 2)
            a, b = solve_slot(inst, prune=True), solve_slot(inst, prune=False)
            assert a.psi == b.psi
            assert a.feasible == b.feasible
            assert a.assignments_examined <= b.assignments_examined

    def test_matches_grid_search(self, tiny_instances):
        for inst in tiny_instances[:8]:
            sol = solve_slot(inst)
            if sol.feasible:
                assert grid_optimum(inst) == pytest.approx(sol.psi, rel=1e-3, abs=1e-12)

    def test_replay_through_env(self, tiny_instances):
        for inst in tiny_instances:
            sol = solve_slot(inst)
            out = step(inst.state, sol.decision, inst.cfg, inst.topology)
            if sol.feasible:
                assert out.demand_met
                assert out.psi == pytest.approx(sol.psi, rel=1e-9, abs=1e-15)
                assert not out.rejected
                np.testing.assert_array_equal(out.assignment, sol.assignment)

    def test_assignment_string(self):
        assert assignment_string([DROPPED, LOCAL, 2]) == "dl2"


class TestGap:
    def test_self_gap_is_zero(self, tiny_instances):
        stats = oracle_gap(lambda inst: solve_slot(inst).decision, tiny_instances)
        assert stats.max == pytest.approx(0.0, abs=1e-9)
        assert stats.count + stats.excluded == len(tiny_instances)

    def test_random_policy_never_beats_oracle(self, tiny_instances):
        rng = np.random.default_rng(0)

        def random_decision(inst):
            return fixed_high_decision(
                inst, lambda s, sched: baselines.random_policy(s, sched, inst.topology, rng))

        stats = oracle_gap(random_decision, tiny_instances)
        assert stats.count > 0
        assert min(stats.gaps) >= -1e-9

    def test_greedy_gap_is_finite(self, tiny_instances):
        def greedy_decision(inst):
            avail = np.full(inst.topology.n_wds, np.inf)
            return fixed_high_decision(
                inst, lambda s, sched: baselines.greedy_policy(s, sched, avail, inst.cfg, inst.topology))

        stats = oracle_gap(greedy_decision, tiny_instances)
        assert np.isfinite(stats.mean) and np.isfinite(stats.max)
        assert stats.mean >= 0.0


def test_far_hap_pair_is_never_assigned(desk):
    topo = build_topology(desk.replace(n_wds=1), [[0.0, 0.0], [8.0, 8.0]], [[1.0, 1.0]])
    cfg = desk.replace(n_wds=1, data_demand=1e4)
    state = make_state([[1e-3, 1.0]], [1e4], [0.0])
    sol = solve_slot(SlotInstance(state, cfg, topo))
    assert sol.assignment[0] != 2
