"""State and observation vectors fed to the networks, plus the
cost-signal scheduling rule that decides who must process data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import NetworkConfig
from ..env import SlotState, large_scale_fading
from ..topology import Topology


@dataclass(frozen=True)
class Scales:
    energy: float  # battery levels
    bits: float
    gain: float
    hap_energy: float  # cumulative HAP energy over an episode

    @classmethod
    def for_network(cls, cfg: NetworkConfig, topology: Topology) -> "Scales":
        sigma = large_scale_fading(topology.distances, cfg)
        return cls(
            energy=cfg.battery_capacity,
            bits=4.0 * cfg.mean_bits,
            gain=float(np.percentile(sigma, 99)),
            hap_energy=cfg.slots_per_episode * cfg.m_haps * cfg.p_max * cfg.slot_duration,
        )


def high_state(state: SlotState, scales: Scales) -> np.ndarray:
    """[E_tot per HAP, D per WD, battery per WD, gains row-major]."""
    return np.concatenate([
        state.cum_hap_energy / scales.hap_energy,
        state.data / scales.bits,
        state.battery / scales.energy,
        state.channels.gains.ravel() / scales.gain,
    ])


def high_state_dim(n: int, m: int) -> int:
    return m + 2 * n + n * m


def low_obs_dim(n: int, m: int) -> int:
    return 2 * m + 3 * n + n * m


def low_observation(state: SlotState, n: int, alpha: float, cost: np.ndarray,
                    cfg: NetworkConfig, topology: Topology, scales: Scales) -> np.ndarray:
    """Local view of WD ``n``, laid out like the full low-level state.

    Blocks: (E_tot, T - alpha) per HAP, (D, battery, cost) per WD, then the
    N x M gain matrix.  Out-of-zone HAP pairs, other WDs' triples and every
    gain outside WD ``n``'s own in-zone entries are zero.
    """
    N, M = topology.n_wds, topology.m_haps
    zone = topology.zone_mask[n]
    obs = np.zeros(low_obs_dim(N, M))
    hap = np.column_stack([state.cum_hap_energy / scales.hap_energy,
                           np.full(M, (cfg.slot_duration - alpha) / cfg.slot_duration)])
    hap[~zone] = 0.0
    obs[:2 * M] = hap.ravel()
    base = 2 * M + 3 * n
    obs[base:base + 3] = (state.data[n] / scales.bits, state.battery[n] / scales.energy,
                          cost[n] / cfg.cost_max)
    gains = np.zeros((N, M))
    gains[n] = np.where(zone, state.channels.gains[n] / scales.gain, 0.0)
    obs[2 * M + 3 * N:] = gains.ravel()
    return obs


def action_mask(state: SlotState, n: int, topology: Topology) -> np.ndarray | None:
    """Allowed low-level actions [local, HAP 1..M]; None when no action applies."""
    if state.data[n] <= 0:
        return None
    return np.concatenate([[True], topology.zone_mask[n]])


def derive_feasible_set(cost: np.ndarray, data: np.ndarray, demand: float) -> tuple[np.ndarray, bool]:
    """WDs scheduled to process this slot, and whether the demand is out of reach.

    WDs with data are ranked by ascending cost (ties by index) and the shortest
    prefix covering ``demand`` is scheduled; everyone else is dropped.
    """
    cost = np.asarray(cost, dtype=float)
    data = np.asarray(data, dtype=float)
    scheduled = np.zeros(len(data), dtype=bool)
    has_data = data > 0
    if data[has_data].sum() < demand:
        return has_data.copy(), True
    total = 0.0
    for n in np.argsort(cost, kind="stable"):
        if total >= demand:
            break
        if has_data[n]:
            scheduled[n] = True
            total += data[n]
    return scheduled, False
