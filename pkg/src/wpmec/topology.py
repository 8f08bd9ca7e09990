from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig


@dataclass(frozen=True)
class Topology:
    hap_positions: np.ndarray  # (M, 2) m
    wd_positions: np.ndarray  # (N, 2) m
    distances: np.ndarray  # (N, M) m
    zone_mask: np.ndarray  # (N, M) bool, True iff distance <= zone radius

    @property
    def n_wds(self) -> int:
        return len(self.wd_positions)

    @property
    def m_haps(self) -> int:
        return len(self.hap_positions)

    def with_zone_radius(self, radius: float) -> "Topology":
        return Topology(self.hap_positions, self.wd_positions, self.distances,
                        self.distances <= radius)


def grid_positions(m: int, side: float) -> np.ndarray:
    """Centres of the first ``m`` cells (row-major) of a ceil(sqrt(m))-square grid."""
    arms = math.ceil(math.sqrt(m))
    cell = side / arms
    idx = np.arange(m)
    return np.column_stack([(idx % arms + 0.5) * cell, (idx // arms + 0.5) * cell])


def pairwise_distances(wd_positions: np.ndarray, hap_positions: np.ndarray) -> np.ndarray:
    diff = wd_positions[:, None, :] - hap_positions[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def build_topology(cfg: NetworkConfig, hap_positions: np.ndarray,
                   wd_positions: np.ndarray) -> Topology:
    haps = np.asarray(hap_positions, dtype=float).reshape(-1, 2)
    wds = np.asarray(wd_positions, dtype=float).reshape(-1, 2)
    d = pairwise_distances(wds, haps)
    return Topology(haps, wds, d, d <= cfg.zone_radius)


def generate_topology(cfg: NetworkConfig, rng: np.random.Generator) -> Topology:
    """HAPs on a centred grid, WDs i.i.d. uniform over the square field."""
    haps = grid_positions(cfg.m_haps, cfg.field_side)
    wds = rng.uniform(0.0, cfg.field_side, size=(cfg.n_wds, 2))
    return build_topology(cfg, haps, wds)
