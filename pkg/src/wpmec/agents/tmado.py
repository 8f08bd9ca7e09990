"""Two-level controller and its centralized-training loop.

Each slot the high-level agent sets the WPT duration, HAP powers and per-WD
cost signals; the cost ranking schedules just enough WDs to cover the data
demand; each scheduled WD picks local or an in-zone HAP from its own masked
observation; durations and frequencies come from the closed-form optima.
The high level learns per slot from replay, the low level once per episode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import baselines
from ..closed_form import resource_plan
from ..config import NetworkConfig
from ..env import DROPPED, SlotDecision, SlotOutcome, WpmecEnv, available_energy, harvested_energy
from ..nn import Mlp, Optimizer, save_checkpoint
from ..oracle import SlotInstance, solve_slot
from ..rng import BASELINE, HIGH_NOISE, LOW_SAMPLING, NET_INIT, REPLAY, make_rng
from ..trace import EpisodeTrace
from .ddpg import DdpgAgent, HighAction
from .features import (Scales, action_mask, derive_feasible_set, high_state, high_state_dim,
                       low_obs_dim, low_observation)
from .ippo import LowAgent

LOW_MODES = ("ippo", "lc", "rec", "random", "greedy")
EVAL_EPISODE_OFFSET = 1_000_000

METRIC_COLUMNS = ["episode", "mean_psi", "mean_high_reward", "mean_low_reward", "rlc", "miss_rate"]


@dataclass
class EpisodeStats:
    episode: int
    psi: list[float] = field(default_factory=list)
    high_rewards: list[float] = field(default_factory=list)
    low_rewards: list[float] = field(default_factory=list)
    n_local: int = 0
    n_edge: int = 0
    misses: int = 0

    def add(self, out: SlotOutcome) -> None:
        self.psi.append(out.psi)
        self.high_rewards.append(out.high_reward)
        self.low_rewards.append(float(np.mean(out.low_rewards)))
        self.n_local += out.n_local
        self.n_edge += out.n_edge
        self.misses += int(not out.demand_met)

    @property
    def mean_psi(self) -> float:
        return float(np.mean(self.psi))

    @property
    def rlc(self) -> float:
        done = self.n_local + self.n_edge
        return self.n_local / done if done else 0.0

    @property
    def miss_rate(self) -> float:
        return self.misses / len(self.psi)

    def row(self) -> tuple:
        return (self.episode, self.mean_psi, float(np.mean(self.high_rewards)),
                float(np.mean(self.low_rewards)), self.rlc, self.miss_rate)


class Tmado:
    """High-level DDPG (or a fixed rule) over a pluggable low level."""

    def __init__(self, cfg: NetworkConfig, env: WpmecEnv, low_mode: str = "ippo",
                 high_mode: str = "ddpg", seed: int | None = None):
        if low_mode not in LOW_MODES:
            raise ValueError(f"unknown low-level mode {low_mode!r}")
        if high_mode not in ("ddpg", "fixed"):
            raise ValueError(f"unknown high-level mode {high_mode!r}")
        self.cfg = cfg
        self.env = env
        self.topology = env.topology
        self.low_mode = low_mode
        self.high_mode = high_mode
        self.seed = cfg.seed if seed is None else seed
        n, m = self.topology.n_wds, self.topology.m_haps
        self.n, self.m = n, m
        self.scales = Scales.for_network(cfg, self.topology)
        init = make_rng(self.seed, NET_INIT)
        self.high = DdpgAgent(cfg, high_state_dim(n, m), n, m, init)
        self.low = [LowAgent(cfg, low_obs_dim(n, m), m, init) for _ in range(n)] \
            if low_mode == "ippo" else []
        self.noise_rng = make_rng(self.seed, HIGH_NOISE)
        self.low_rng = make_rng(self.seed, LOW_SAMPLING)
        self.replay_rng = make_rng(self.seed, REPLAY)
        self.baseline_rng = make_rng(self.seed, BASELINE)

    # -- acting -----------------------------------------------------------
    def high_action(self, state, explore: bool) -> np.ndarray:
        if self.high_mode == "fixed":
            return baselines.fixed_high_action(state, self.cfg)
        s = high_state(state, self.scales)
        return self.high.act(s, self.noise_rng, None if explore else 0.0)

    def low_assignment(self, state, act: HighAction, scheduled: np.ndarray, explore: bool,
                       record: list | None = None) -> np.ndarray:
        cfg, topo = self.cfg, self.topology
        if self.low_mode == "ippo":
            x = np.full(self.n, DROPPED)
            for n in np.flatnonzero(scheduled):
                mask = action_mask(state, n, topo)
                if mask is None:
                    continue
                o = low_observation(state, n, act.alpha, act.cost, cfg, topo, self.scales)
                a, logp = self.low[n].act(o, mask, self.low_rng, greedy=not explore)
                x[n] = a
                if record is not None:
                    record.append((n, o, mask, a, logp))
            return x
        avail = available_energy(
            state.battery,
            harvested_energy(act.p_h, state.channels.gains, act.alpha, cfg.eh_efficiency),
            cfg.battery_capacity)
        if self.low_mode == "lc":
            return baselines.lc_policy(state, scheduled, avail, cfg)
        if self.low_mode == "rec":
            return baselines.rec_policy(state, scheduled, self.m, self.baseline_rng)
        if self.low_mode == "random":
            return baselines.random_policy(state, scheduled, topo, self.baseline_rng)
        return baselines.greedy_policy(state, scheduled, avail, cfg, topo)

    def decide(self, state, explore: bool = False, record: list | None = None
               ) -> tuple[SlotDecision, np.ndarray, HighAction]:
        a_vec = self.high_action(state, explore)
        act = HighAction.from_vector(a_vec, self.m)
        scheduled, _ = derive_feasible_set(act.cost, state.data, self.cfg.data_demand)
        x = self.low_assignment(state, act, scheduled, explore, record)
        tau, freq = resource_plan(state.data, state.channels.gains, x, self.cfg)
        return SlotDecision(act.alpha, act.p_h, x, tau, freq), a_vec, act

    # -- episodes ---------------------------------------------------------
    def run_episode(self, episode: int, train: bool = True,
                    trace: EpisodeTrace | None = None) -> EpisodeStats:
        env, cfg = self.env, self.cfg
        state = env.reset(episode)
        stats = EpisodeStats(episode)
        learn_high = train and self.high_mode == "ddpg"
        learn_low = train and self.low_mode == "ippo"
        s = high_state(state, self.scales)
        for t in range(cfg.slots_per_episode):
            record = [] if learn_low else None
            decision, a_vec, act = self.decide(state, explore=train, record=record)
            if learn_low:
                # an agent's next decision-time observation closes its previous transition
                for n, o, *_ in record:
                    self.low[n].traj.close_pending(o)
            out = env.step(decision, cost_signals=act.cost)
            state = out.next_state
            last = t == cfg.slots_per_episode - 1
            if learn_high:
                s2 = high_state(state, self.scales)
                self.high.buffer.add(s, a_vec, out.high_reward, s2, last)
                if len(self.high.buffer) >= cfg.batch_size:
                    self.high.update(self.replay_rng)
                s = s2
            if learn_low:
                for n, o, mask, a, logp in record:
                    self.low[n].traj.add(o, mask, a, logp, out.low_rewards[n])
            stats.add(out)
            if trace is not None:
                trace.record(t, out)
        if learn_low:
            for agent in self.low:
                agent.traj.close_pending(None)
                agent.update()
        if learn_high:
            self.high.decay_noise()
        return stats

    def nets(self) -> dict[str, Mlp]:
        nets = dict(self.high.nets()) if self.high_mode == "ddpg" else {}
        for n, agent in enumerate(self.low):
            nets.update(agent.nets(n))
        return nets

    def optimizers(self) -> dict[str, Optimizer]:
        opts = dict(self.high.optimizers()) if self.high_mode == "ddpg" else {}
        for n, agent in enumerate(self.low):
            opts.update(agent.optimizers(n))
        return opts

    def load_nets(self, nets: dict[str, Mlp]) -> None:
        own = self.nets()
        missing = set(own) - set(nets)
        if missing:
            raise ValueError(f"checkpoint lacks networks: {sorted(missing)}")
        for k, net in own.items():
            if net.sizes != nets[k].sizes:
                raise ValueError(f"network {k} has sizes {nets[k].sizes}, expected {net.sizes}")
            net.load_from(nets[k])

    def save(self, path, extra: dict | None = None):
        return save_checkpoint(path, self.nets(), self.cfg.config_hash(), self.optimizers(),
                               extra={"low_mode": self.low_mode, "high_mode": self.high_mode,
                                      **(extra or {})})


def train(cfg: NetworkConfig, env: WpmecEnv, system: Tmado | None = None,
          episodes: int | None = None, low_mode: str = "ippo", callback=None) -> tuple[Tmado, list[tuple]]:
    """Train for ``episodes`` (default ``cfg.episodes``); returns the system
    and one metrics row per episode (see ``METRIC_COLUMNS``)."""
    system = system or Tmado(cfg, env, low_mode)
    rows = []
    for e in range(cfg.episodes if episodes is None else episodes):
        stats = system.run_episode(e, train=True)
        rows.append(stats.row())
        if callback is not None:
            callback(stats)
    return system, rows


def evaluate(system: Tmado, episodes: int, offset: int = EVAL_EPISODE_OFFSET) -> list[EpisodeStats]:
    """Exploration-free episodes on held-out exogenous draws."""
    return [system.run_episode(offset + e, train=False) for e in range(episodes)]


def evaluate_oracle(cfg: NetworkConfig, env: WpmecEnv, episodes: int,
                    offset: int = EVAL_EPISODE_OFFSET) -> list[EpisodeStats]:
    """Per-slot exhaustive optimum on the same held-out episodes."""
    out = []
    for e in range(episodes):
        state = env.reset(offset + e)
        stats = EpisodeStats(offset + e)
        for _ in range(cfg.slots_per_episode):
            sol = solve_slot(SlotInstance(state, cfg, env.topology))
            res = env.step(sol.decision)
            stats.add(res)
            state = res.next_state
        out.append(stats)
    return out
