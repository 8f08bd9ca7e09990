"""High-level continuous-control agent: deterministic actor, Q critic,
soft-updated target copies and a uniform replay buffer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import NetworkConfig
from ..nn import Mlp, NonFiniteError, Optimizer, soft_update


class ReplayBuffer:
    def __init__(self, capacity: int, s_dim: int, a_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, s_dim))
        self.a = np.zeros((capacity, a_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, s_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=k, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]


@dataclass(frozen=True)
class HighAction:
    alpha: float
    p_h: np.ndarray
    cost: np.ndarray

    @classmethod
    def from_vector(cls, a: np.ndarray, m: int) -> "HighAction":
        return cls(float(a[0]), np.array(a[1:1 + m]), np.array(a[1 + m:]))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.alpha], self.p_h, self.cost])


def action_bounds(cfg: NetworkConfig, n: int, m: int) -> np.ndarray:
    """Upper bounds of [alpha, P_h x M, cost x N]; every lower bound is 0."""
    return np.concatenate([[cfg.slot_duration], np.full(m, cfg.p_max), np.full(n, cfg.cost_max)])


class DdpgAgent:
    def __init__(self, cfg: NetworkConfig, s_dim: int, n: int, m: int, rng: np.random.Generator):
        self.cfg = cfg
        self.m = m
        self.upper = action_bounds(cfg, n, m)
        a_dim = len(self.upper)
        hidden = list(cfg.hidden)
        self.actor = Mlp([s_dim, *hidden, a_dim], "tanh", low=0.0, high=self.upper, rng=rng)
        self.critic = Mlp([s_dim + a_dim, *hidden, 1], "linear", rng=rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Optimizer(self.actor, cfg.optimizer, cfg.lr_actor_h)
        self.critic_opt = Optimizer(self.critic, cfg.optimizer, cfg.lr_critic_h)
        self.buffer = ReplayBuffer(cfg.replay_capacity, s_dim, a_dim)
        self.sigma = cfg.noise_sigma

    def act(self, s: np.ndarray, rng: np.random.Generator | None = None,
            sigma: float | None = None) -> np.ndarray:
        """Squashed actor output plus clipped Gaussian noise, kept in bounds."""
        sigma = self.sigma if sigma is None else sigma
        a = self.actor.forward(s)
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("actor produced a non-finite action")
        if sigma > 0:
            if rng is None:
                raise ValueError("exploration noise needs an rng")
            scale = sigma * self.upper
            noise = np.clip(rng.normal(0.0, 1.0, size=a.shape) * scale, -2 * scale, 2 * scale)
            a = np.clip(a + noise, 0.0, self.upper)
        return a

    def _critic_in(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return np.concatenate([s, a / self.upper], axis=1)

    def update(self, rng: np.random.Generator) -> tuple[float, float]:
        """One critic and one actor step on a sampled batch; returns (critic loss, mean Q)."""
        cfg = self.cfg
        k = cfg.batch_size
        s, a, r, s2, done = self.buffer.sample(k, rng)
        a2 = self.actor_target.forward(s2)
        q2 = self.critic_target.forward(self._critic_in(s2, a2))[:, 0]
        y = r + cfg.gamma_h * (1.0 - done) * q2

        q, tape = self.critic.forward_tape(self._critic_in(s, a))
        err = q[:, 0] - y
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise NonFiniteError("critic loss is not finite")
        self.critic_opt.step(self.critic.backward(tape, (2.0 / k) * err[:, None]))

        pa, atape = self.actor.forward_tape(s)
        qa, ctape = self.critic.forward_tape(self._critic_in(s, pa))
        dq = self.critic.backward(ctape, np.full((k, 1), 1.0 / k)).dx
        dq_da = dq[:, s.shape[1]:] / self.upper
        self.actor_opt.step(self.actor.backward(atape, dq_da), ascent=True)

        soft_update(self.actor_target, self.actor, cfg.soft_actor)
        soft_update(self.critic_target, self.critic, cfg.soft_critic)
        return loss, float(np.mean(qa))

    def decay_noise(self) -> None:
        self.sigma *= self.cfg.noise_decay

    def nets(self) -> dict[str, Mlp]:
        return {"high_actor": self.actor, "high_critic": self.critic,
                "high_actor_target": self.actor_target, "high_critic_target": self.critic_target}

    def optimizers(self) -> dict[str, Optimizer]:
        return {"high_actor": self.actor_opt, "high_critic": self.critic_opt}
