"""Exhaustive single-slot solver.

For a fixed assignment the per-WD resources and the broadcast are solved in
closed form (see ``closed_form``), so the slot optimum is a minimum over the
finitely many assignments.  Used as ground truth for tests and for measuring
how far a policy is from optimal on small instances.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .closed_form import (local_computing_plan, min_wpt_energy, offloading_plan,
                          wpt_requirement)
from .config import NetworkConfig
from .env import DROPPED, LOCAL, SlotDecision, SlotState, sample_channels, sample_data, step
from .rng import INSTANCES, TOPOLOGY, make_rng
from .topology import Topology, generate_topology

MAX_WDS = 8
MAX_HAPS = 3
GAP_EPS = 1e-9


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class SlotInstance:
    state: SlotState
    cfg: NetworkConfig
    topology: Topology
    seed: int = 0


@dataclass(frozen=True)
class OracleSolution:
    decision: SlotDecision
    psi: float
    assignments_examined: int
    feasible: bool

    @property
    def assignment(self) -> np.ndarray:
        return self.decision.assignment


def assignment_string(assignment: Sequence[int]) -> str:
    """Compact text form: ``d`` dropped, ``l`` local, digits for HAPs."""
    return "".join("d" if x == DROPPED else "l" if x == LOCAL else str(int(x)) for x in assignment)


@dataclass
class _Option:
    x: int
    bits: float = 0.0
    energy: float = 0.0  # J the WD needs this slot
    tau: float = 0.0
    freq: float = 0.0


def _options(inst: SlotInstance, n: int, prune: bool) -> list[_Option]:
    cfg, state, topo = inst.cfg, inst.state, inst.topology
    d = float(state.data[n])
    opts = [_Option(DROPPED)]
    if d <= 0:
        return opts
    loc = local_computing_plan(d, cfg)
    if loc.feasible and loc.energy <= cfg.battery_capacity:
        opts.append(_Option(LOCAL, d, loc.energy, 0.0, loc.freq))
        # Local at no broadcast cost is strictly cheaper than any edge variant:
        # same bits, no processing energy, and it frees HAP time.
        if prune and loc.energy <= state.battery[n]:
            return opts
    for m in np.flatnonzero(topo.zone_mask[n]):
        off = offloading_plan(d, float(state.channels.gains[n, m]), cfg)
        if off.tau <= cfg.slot_duration and off.energy <= cfg.battery_capacity:
            opts.append(_Option(int(m) + 1, d, off.energy, off.tau))
    return opts


def _check_budget(inst: SlotInstance) -> None:
    n, m = inst.topology.n_wds, inst.topology.m_haps
    if n > MAX_WDS or m > MAX_HAPS:
        raise OracleBudgetError(
            f"exhaustive search limited to N<={MAX_WDS}, M<={MAX_HAPS} (got N={n}, M={m}); "
            "use one of the heuristic policies (greedy, lc, rec, random) instead")


def solve_slot(inst: SlotInstance, prune: bool = True, method: str = "auto") -> OracleSolution:
    """Minimum energy provision over every assignment meeting the demand."""
    _check_budget(inst)
    cfg, state = inst.cfg, inst.state
    n_wds, m_haps = inst.topology.n_wds, inst.topology.m_haps
    T = cfg.slot_duration
    per_wd = [_options(inst, n, prune) for n in range(n_wds)]
    best_val, best = np.inf, None
    examined = 0
    for combo in itertools.product(*per_wd):
        examined += 1
        bits = sum(o.bits for o in combo)
        if bits < cfg.data_demand - 1e-9:
            continue
        busy = np.zeros(m_haps)
        for o in combo:
            if o.x > 0:
                busy[o.x - 1] += o.tau
        if np.any(busy > T + 1e-12):
            continue
        active = [n for n, o in enumerate(combo) if o.x != DROPPED]
        req = wpt_requirement(np.array([combo[n].energy for n in active]),
                              state.battery[active], state.channels.gains[active], busy, cfg)
        sol = min_wpt_energy(req, cfg, method=method)
        if sol is None:
            continue
        edge_bits = sum(o.bits for o in combo if o.x > 0)
        val = sol.total + cfg.e_m * edge_bits
        if val < best_val:
            best_val, best = val, (combo, sol)
    if best is None:
        return OracleSolution(_dropped_decision(n_wds, m_haps), 0.0, examined, False)
    combo, sol = best
    decision = SlotDecision(
        alpha=sol.alpha,
        p_h=sol.p_h,
        assignment=np.array([o.x for o in combo], dtype=int),
        tau_o=np.array([o.tau for o in combo]),
        freq=np.array([o.freq for o in combo]),
    )
    return OracleSolution(decision, float(best_val), examined, True)


def _dropped_decision(n: int, m: int) -> SlotDecision:
    return SlotDecision(0.0, np.zeros(m), np.full(n, DROPPED), np.zeros(n), np.zeros(n))


def random_instance(cfg: NetworkConfig, seed: int, index: int = 0,
                    topology: Topology | None = None, battery_scale: float = 1.0) -> SlotInstance:
    """Reproducible instance: topology from ``seed``; channels, data and
    a battery level uniform on ``[0, battery_scale * E_b]`` from ``(seed, index)``."""
    topo = topology or generate_topology(cfg, make_rng(seed, TOPOLOGY))
    rng = make_rng(seed, INSTANCES, index)
    channels = sample_channels(topo, cfg, rng)
    data = sample_data(cfg, rng, topo.n_wds)
    battery = rng.uniform(0.0, battery_scale * cfg.battery_capacity, size=topo.n_wds)
    state = SlotState(0, channels, data, battery, np.zeros(topo.m_haps))
    return SlotInstance(state, cfg, topo, seed)


@dataclass
class GapStats:
    mean: float
    max: float
    gaps: list[float] = field(default_factory=list)
    excluded: int = 0  # instances with no feasible assignment

    @property
    def count(self) -> int:
        return len(self.gaps)


def policy_gap(policy_psi: float, policy_met: bool, oracle: OracleSolution,
               penalty: float) -> float | None:
    """Relative excess over the optimum, or None if the optimum is infeasible.

    A policy that misses a satisfiable demand is charged ``penalty`` on top
    of its energy, so giving up is never free.
    """
    if not oracle.feasible:
        return None
    psi = policy_psi + (0.0 if policy_met else penalty)
    return (psi - oracle.psi) / max(oracle.psi, GAP_EPS)


def oracle_gap(policy: Callable[[SlotInstance], SlotDecision],
               instances: Sequence[SlotInstance]) -> GapStats:
    gaps, excluded = [], 0
    for inst in instances:
        sol = solve_slot(inst)
        out = step(inst.state, policy(inst), inst.cfg, inst.topology)
        g = policy_gap(out.psi, out.demand_met, sol, inst.cfg.penalty)
        if g is None:
            excluded += 1
        else:
            gaps.append(g)
    if not gaps:
        return GapStats(float("nan"), float("nan"), [], excluded)
    return GapStats(float(np.mean(gaps)), float(np.max(gaps)), gaps, excluded)
