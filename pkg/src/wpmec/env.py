"""Slot-level dynamics of the multi-HAP wireless-powered MEC network.

Each slot: HAPs broadcast RF energy for ``alpha`` seconds, every WD banks what
it harvests (capped by its battery), then WDs either compute locally over the
whole slot or offload to one in-zone HAP by TDMA in the remaining time.
Assignments are encoded per WD as ``DROPPED`` (-1), ``LOCAL`` (0) or a
1-based HAP index.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import rewards
from .closed_form import effective_reward_offset, min_offload_duration
from .config import NetworkConfig
from .rng import EXOGENOUS, make_rng
from .topology import Topology

DROPPED = -1
LOCAL = 0
SPEED_OF_LIGHT = 3e8
TOL = 1e-12


class MalformedDecision(ValueError):
    """Decision that cannot be repaired by admission control."""


@dataclass(frozen=True)
class ChannelMatrix:
    gains: np.ndarray  # (N, M) power gains
    large_scale: np.ndarray  # (N, M) path-loss component


@dataclass(frozen=True)
class SlotState:
    t: int
    channels: ChannelMatrix
    data: np.ndarray  # (N,) bits
    battery: np.ndarray  # (N,) J at slot start
    cum_hap_energy: np.ndarray  # (M,) J spent by each HAP so far this episode


@dataclass(frozen=True)
class SlotDecision:
    alpha: float
    p_h: np.ndarray  # (M,) W
    assignment: np.ndarray  # (N,) int
    tau_o: np.ndarray  # (N,) s, non-zero only for offloading WDs
    freq: np.ndarray  # (N,) Hz, non-zero only for local WDs

    @property
    def dropped(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.assignment == DROPPED))


@dataclass(frozen=True)
class SlotOutcome:
    psi: float
    e1: np.ndarray  # (M,) broadcast energy
    e2: np.ndarray  # (M,) processing energy
    harvested: np.ndarray  # (N,)
    available: np.ndarray  # (N,)
    wd_energy: np.ndarray  # (N,) consumed
    data: np.ndarray  # (N,)
    assignment: np.ndarray  # (N,) after repair
    processed_bits: float
    demand_met: bool
    rejected: dict[int, str]  # WD -> reason it was moved to the dropped set
    next_state: SlotState
    low_rewards: np.ndarray | None = None
    high_reward: float | None = None

    @property
    def admitted(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.assignment >= 0))

    @property
    def n_local(self) -> int:
        return int(np.sum(self.assignment == LOCAL))

    @property
    def n_edge(self) -> int:
        return int(np.sum(self.assignment > 0))

    @property
    def n_dropped(self) -> int:
        return int(np.sum(self.assignment == DROPPED))


# --- exogenous processes ---------------------------------------------------

def large_scale_fading(distances: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise ValueError("degenerate geometry: a WD coincides with a HAP")
    return cfg.antenna_gain * (SPEED_OF_LIGHT / (4 * np.pi * cfg.carrier_freq * d)) ** cfg.path_loss_exp


def sample_channels(topology: Topology, cfg: NetworkConfig, rng: np.random.Generator,
                    large_scale: np.ndarray | None = None) -> ChannelMatrix:
    """Free-space path loss times unit-mean exponential (Rayleigh power) fading."""
    if large_scale is None:
        large_scale = large_scale_fading(topology.distances, cfg)
    small = rng.exponential(1.0, size=large_scale.shape)
    return ChannelMatrix(large_scale * small, large_scale)


def sample_data(cfg: NetworkConfig, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Poisson packet arrivals per WD, in bits."""
    n = cfg.n_wds if n is None else n
    return rng.poisson(cfg.arrival_rate, size=n).astype(float) * cfg.packet_bits


# --- energy bookkeeping ----------------------------------------------------

def harvested_energy(p_h, h_row, alpha: float, mu: float):
    """Energy one WD (or each row of a gain matrix) harvests in the WPT phase."""
    p_h = np.asarray(p_h, dtype=float)
    h = np.asarray(h_row, dtype=float)
    return mu * alpha * (h @ p_h)


def available_energy(e_i, e_h, e_b):
    return np.minimum(np.asarray(e_i) + np.asarray(e_h), e_b)


def _local_energy(d_bits: float, freq: float, cfg: NetworkConfig) -> float:
    tau = cfg.c_n * d_bits / freq
    return cfg.k_n * freq ** 3 * tau


def _offload_energy(tau: float, cfg: NetworkConfig) -> float:
    return (cfg.wd_tx_power + cfg.wd_circuit_power) * tau


def _check_shapes(state: SlotState, decision: SlotDecision, cfg: NetworkConfig,
                  topology: Topology) -> None:
    n, m = topology.n_wds, topology.m_haps
    if state.channels.gains.shape != (n, m) or np.shape(decision.p_h) != (m,):
        raise MalformedDecision("decision/state shape does not match the topology")
    for name in ("assignment", "tau_o", "freq"):
        if np.shape(getattr(decision, name)) != (n,):
            raise MalformedDecision(f"{name} must have one entry per WD")


# --- validation ------------------------------------------------------------

def validate_decision(state: SlotState, decision: SlotDecision, cfg: NetworkConfig,
                      topology: Topology) -> set[str]:
    """Names of every constraint the decision violates as submitted.

    Pure; no admission repair is applied.  Names: demand, local_delay,
    offload_duration, wpt_duration, hap_time_budget, hap_power, local_energy,
    offload_energy, cpu_frequency, shannon_rate, zone.
    """
    _check_shapes(state, decision, cfg, topology)
    T = cfg.slot_duration
    bad: set[str] = set()
    alpha = float(decision.alpha)
    if not -TOL <= alpha <= T * (1 + TOL):
        bad.add("wpt_duration")
    p_h = np.asarray(decision.p_h, dtype=float)
    if np.any(p_h < -TOL) or np.any(p_h > cfg.p_max * (1 + TOL)):
        bad.add("hap_power")
    gains = state.channels.gains
    avail = available_energy(state.battery,
                             harvested_energy(np.clip(p_h, 0, None), gains, max(alpha, 0.0),
                                              cfg.eh_efficiency),
                             cfg.battery_capacity)
    x = np.asarray(decision.assignment, dtype=int)
    data = state.data
    processed = float(np.sum(data[(x >= 0) & (data > 0)]))
    if processed < cfg.data_demand - 1e-9:
        bad.add("demand")
    busy = np.zeros(topology.m_haps)
    for n in range(topology.n_wds):
        if x[n] < 0 or data[n] <= 0:
            continue
        if x[n] == LOCAL:
            f = float(decision.freq[n])
            if not f > 0:
                bad.update({"cpu_frequency", "local_delay"})
                continue
            if f > cfg.f_max * (1 + TOL):
                bad.add("cpu_frequency")
            if cfg.c_n * data[n] / f > T * (1 + TOL):
                bad.add("local_delay")
            if _local_energy(data[n], f, cfg) > avail[n] + TOL:
                bad.add("local_energy")
            continue
        m = int(x[n]) - 1
        if m >= topology.m_haps or not topology.zone_mask[n, m]:
            bad.add("zone")
            continue
        tau = float(decision.tau_o[n])
        if tau < 0 or tau > T * (1 + TOL):
            bad.add("offload_duration")
        if tau < min_offload_duration(data[n], gains[n, m], cfg) * (1 - 1e-12):
            bad.add("shannon_rate")
        if _offload_energy(tau, cfg) > avail[n] + TOL:
            bad.add("offload_energy")
        busy[m] += tau
    if np.any(busy[busy > 0] + alpha > T + TOL):
        bad.add("hap_time_budget")
    return bad


# --- transition ------------------------------------------------------------

def step(state: SlotState, decision: SlotDecision, cfg: NetworkConfig, topology: Topology,
         *, cost_signals: np.ndarray | None = None,
         next_channels: ChannelMatrix | None = None,
         next_data: np.ndarray | None = None) -> SlotOutcome:
    """Apply one slot.

    WDs whose submitted plan is infeasible (energy, frequency, rate or
    duration) are moved to the dropped set and spend nothing; remaining
    offloaders are admitted per HAP shortest-first (ties by index) while the
    HAP's time budget lasts.  ``cost_signals`` price WD energy in the
    low-level rewards (1 when omitted).
    """
    _check_shapes(state, decision, cfg, topology)
    T = cfg.slot_duration
    n_wds, m_haps = topology.n_wds, topology.m_haps
    alpha = float(decision.alpha)
    p_h = np.asarray(decision.p_h, dtype=float)
    if not -TOL <= alpha <= T * (1 + TOL):
        raise MalformedDecision(f"WPT duration {alpha!r} outside [0, {T}]")
    if np.any(p_h < -TOL) or np.any(p_h > cfg.p_max * (1 + TOL)):
        raise MalformedDecision("HAP transmit power outside [0, p_max]")
    x = np.array(decision.assignment, dtype=int)
    if np.any(x < DROPPED) or np.any(x > m_haps):
        raise MalformedDecision("assignment entries must lie in {-1, 0, 1..M}")
    for n in np.flatnonzero(x > 0):
        if not topology.zone_mask[n, x[n] - 1]:
            raise MalformedDecision(f"WD {n} assigned to out-of-zone HAP {x[n]}")

    gains = state.channels.gains
    data = np.asarray(state.data, dtype=float)
    e_h = harvested_energy(p_h, gains, alpha, cfg.eh_efficiency)
    avail = available_energy(state.battery, e_h, cfg.battery_capacity)
    need = np.zeros(n_wds)
    rejected: dict[int, str] = {}

    for n in range(n_wds):
        if x[n] < 0:
            continue
        if data[n] <= 0:
            x[n], rejected[n] = DROPPED, "no_data"
            continue
        if x[n] == LOCAL:
            f = float(decision.freq[n])
            if not f > 0 or f > cfg.f_max * (1 + TOL) or cfg.c_n * data[n] / f > T * (1 + TOL):
                x[n], rejected[n] = DROPPED, "cpu_frequency"
                continue
            need[n] = _local_energy(data[n], f, cfg)
        else:
            tau = float(decision.tau_o[n])
            lower = min_offload_duration(data[n], gains[n, x[n] - 1], cfg)
            if tau < lower * (1 - 1e-12) or tau > T * (1 + TOL):
                x[n], rejected[n] = DROPPED, "rate"
                continue
            need[n] = _offload_energy(tau, cfg)
        if need[n] > avail[n] + TOL:
            x[n], rejected[n] = DROPPED, "energy"
            need[n] = 0.0

    for m in range(1, m_haps + 1):
        queue = sorted(np.flatnonzero(x == m), key=lambda n: (decision.tau_o[n], n))
        used = alpha
        for n in queue:
            if used + decision.tau_o[n] <= T + TOL:
                used += decision.tau_o[n]
            else:
                x[n], rejected[n] = DROPPED, "time_budget"
                need[n] = 0.0

    need[x < 0] = 0.0
    consumed = np.minimum(need, avail)
    e1 = alpha * p_h
    e2 = np.array([cfg.e_m * float(np.sum(data[x == m])) for m in range(1, m_haps + 1)])
    psi = float(np.sum(e1 + e2))
    processed = float(np.sum(data[x >= 0]))
    nxt = SlotState(
        t=state.t + 1,
        channels=state.channels if next_channels is None else next_channels,
        data=data if next_data is None else np.asarray(next_data, dtype=float),
        battery=avail - consumed,
        cum_hap_energy=state.cum_hap_energy + e1 + e2,
    )
    outcome = SlotOutcome(
        psi=psi, e1=e1, e2=e2, harvested=e_h, available=avail, wd_energy=consumed,
        data=data, assignment=x, processed_bits=processed,
        demand_met=processed >= cfg.data_demand - 1e-9, rejected=rejected, next_state=nxt,
    )
    cost = np.ones(n_wds) if cost_signals is None else np.asarray(cost_signals, dtype=float)
    u = effective_reward_offset(cfg)
    low = np.array([rewards.low_reward(outcome, n, cost[n], u, cfg) for n in range(n_wds)])
    return dataclasses.replace(outcome, low_rewards=low,
                               high_reward=rewards.high_reward(outcome, cfg.penalty))


class WpmecEnv:
    """Stateful episode driver around :func:`step`.

    Channels and arrivals of an episode are drawn up front from a stream
    keyed by ``(seed, episode)``, so two policies run on the same episode
    index see identical exogenous realisations.
    """

    def __init__(self, cfg: NetworkConfig, topology: Topology, seed: int | None = None):
        self.cfg = cfg
        self.topology = topology
        self.seed = cfg.seed if seed is None else seed
        self.large_scale = large_scale_fading(topology.distances, cfg)
        self.state: SlotState | None = None
        self._channels: list[ChannelMatrix] = []
        self._data: list[np.ndarray] = []

    def draw_episode(self, episode: int) -> tuple[list[ChannelMatrix], list[np.ndarray]]:
        rng = make_rng(self.seed, EXOGENOUS, episode)
        channels, data = [], []
        for _ in range(self.cfg.slots_per_episode + 1):
            channels.append(sample_channels(self.topology, self.cfg, rng, self.large_scale))
            data.append(sample_data(self.cfg, rng, self.topology.n_wds))
        return channels, data

    def reset(self, episode: int = 0, battery: np.ndarray | None = None) -> SlotState:
        self._channels, self._data = self.draw_episode(episode)
        n, m = self.topology.n_wds, self.topology.m_haps
        self.state = SlotState(
            t=0, channels=self._channels[0], data=self._data[0],
            battery=np.zeros(n) if battery is None else np.asarray(battery, dtype=float),
            cum_hap_energy=np.zeros(m),
        )
        return self.state

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.t >= self.cfg.slots_per_episode

    def step(self, decision: SlotDecision, cost_signals: np.ndarray | None = None) -> SlotOutcome:
        if self.state is None or self.done:
            raise RuntimeError("reset() the environment before stepping")
        t = self.state.t
        outcome = step(self.state, decision, self.cfg, self.topology,
                       cost_signals=cost_signals,
                       next_channels=self._channels[t + 1], next_data=self._data[t + 1])
        self.state = outcome.next_state
        return outcome
