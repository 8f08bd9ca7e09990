"""Non-learning assignment rules and a fixed high-level controller.

Each rule maps the WDs scheduled this slot to an assignment vector
(-1 dropped, 0 local, m >= 1 for HAP m).  ``available`` is the energy each
WD holds after this slot's harvest.
"""
from __future__ import annotations

import numpy as np

from .closed_form import local_computing_plan, offloading_plan
from .config import NetworkConfig
from .env import DROPPED, LOCAL, SlotState
from .topology import Topology

POLICIES = ("tmado", "lc", "rec", "random", "greedy", "oracle")


def _local_ok(d: float, avail: float, cfg: NetworkConfig) -> tuple[bool, float]:
    plan = local_computing_plan(d, cfg)
    return plan.feasible and plan.energy <= avail + 1e-12, plan.energy


def lc_policy(state: SlotState, scheduled: np.ndarray, available: np.ndarray,
              cfg: NetworkConfig) -> np.ndarray:
    """Everyone scheduled computes locally; those who cannot are dropped."""
    x = np.full(len(scheduled), DROPPED)
    for n in np.flatnonzero(scheduled):
        if state.data[n] > 0 and _local_ok(state.data[n], available[n], cfg)[0]:
            x[n] = LOCAL
    return x


def rec_policy(state: SlotState, scheduled: np.ndarray, m_haps: int,
               rng: np.random.Generator) -> np.ndarray:
    """Everyone scheduled offloads to a uniformly random HAP, zones ignored."""
    x = np.full(len(scheduled), DROPPED)
    picks = rng.integers(1, m_haps + 1, size=len(scheduled))
    sel = scheduled & (state.data > 0)
    x[sel] = picks[sel]
    return x


def random_policy(state: SlotState, scheduled: np.ndarray, topology: Topology,
                  rng: np.random.Generator) -> np.ndarray:
    """Uniform over local and the in-zone HAPs for every scheduled WD."""
    x = np.full(len(scheduled), DROPPED)
    for n in range(len(scheduled)):
        choices = [LOCAL, *(np.flatnonzero(topology.zone_mask[n]) + 1)]
        pick = choices[int(rng.integers(len(choices)))]
        if scheduled[n] and state.data[n] > 0:
            x[n] = pick
    return x


def greedy_policy(state: SlotState, scheduled: np.ndarray, available: np.ndarray,
                  cfg: NetworkConfig, topology: Topology) -> np.ndarray:
    """Cheaper of local and the best in-zone HAP, counting the HAP's
    processing energy against the offload; dropped if neither fits."""
    x = np.full(len(scheduled), DROPPED)
    T = cfg.slot_duration
    for n in np.flatnonzero(scheduled):
        d = float(state.data[n])
        if d <= 0:
            continue
        local_ok, e_local = _local_ok(d, available[n], cfg)
        best, edge_ok, e_edge = None, False, np.inf
        zone = np.flatnonzero(topology.zone_mask[n])
        if len(zone):
            best = int(zone[np.argmax(state.channels.gains[n, zone])])
            off = offloading_plan(d, float(state.channels.gains[n, best]), cfg)
            edge_ok = off.tau <= T and off.energy <= available[n] + 1e-12
            e_edge = off.energy + cfg.e_m * d
        if local_ok and (not edge_ok or e_local <= e_edge):
            x[n] = LOCAL
        elif edge_ok:
            x[n] = best + 1
    return x


def fixed_high_action(state: SlotState, cfg: NetworkConfig) -> np.ndarray:
    """Half-slot WPT at full power; WDs with stronger channels get lower costs
    so they are scheduled first."""
    best = state.channels.gains.max(axis=1)
    n = len(best)
    rank = np.empty(n)
    rank[np.argsort(-best, kind="stable")] = np.arange(n)
    cost = cfg.cost_max * rank / max(n - 1, 1)
    return np.concatenate([[cfg.slot_duration / 2], np.full(state.channels.gains.shape[1], cfg.p_max),
                           cost])
