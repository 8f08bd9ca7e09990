"""Per-WD discrete agents trained independently with a clipped PPO objective
and a one-step TD advantage."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import NetworkConfig
from ..nn import Mlp, NonFiniteError, Optimizer


@dataclass
class Trajectory:
    obs: list[np.ndarray] = field(default_factory=list)
    masks: list[np.ndarray] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    logp_old: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    next_obs: list[np.ndarray | None] = field(default_factory=list)
    done: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    def add(self, o, mask, a, logp, r) -> None:
        self.obs.append(o)
        self.masks.append(mask)
        self.actions.append(int(a))
        self.logp_old.append(float(logp))
        self.rewards.append(float(r))
        self.next_obs.append(None)
        self.done.append(False)

    def close_pending(self, next_obs: np.ndarray | None) -> None:
        """Attach the follow-up observation to the last transition (None ends the episode)."""
        if self.actions and self.next_obs[-1] is None and not self.done[-1]:
            if next_obs is None:
                self.done[-1] = True
                self.next_obs[-1] = np.zeros_like(self.obs[-1])
            else:
                self.next_obs[-1] = next_obs

    def clear(self) -> None:
        for lst in (self.obs, self.masks, self.actions, self.logp_old, self.rewards,
                    self.next_obs, self.done):
            lst.clear()


def td_advantage(r, v, v_next, gamma: float, done=False):
    """A = r + gamma * V(o') - V(o), with V(o') dropped at episode end."""
    return r + gamma * (1.0 - np.asarray(done, dtype=float)) * v_next - v


def clipped_surrogate(ratio, adv, eps: float):
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def surrogate_grad_logp(ratio, adv, eps: float):
    """Derivative of the clipped surrogate w.r.t. log pi(a|o).

    Equals ratio * A where the unclipped term is the active minimum and 0
    where clipping binds.
    """
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    clipped = ((adv > 0) & (ratio > 1.0 + eps)) | ((adv < 0) & (ratio < 1.0 - eps))
    return np.where(clipped, 0.0, ratio * adv)


class LowAgent:
    def __init__(self, cfg: NetworkConfig, obs_dim: int, m: int, rng: np.random.Generator):
        self.cfg = cfg
        hidden = list(cfg.hidden)
        self.actor = Mlp([obs_dim, *hidden, m + 1], "softmax", rng=rng)
        self.critic = Mlp([obs_dim, *hidden, 1], "linear", rng=rng, final_scale=1.0 / np.sqrt(hidden[-1]))
        self.actor_opt = Optimizer(self.actor, cfg.optimizer, cfg.lr_actor_l)
        self.critic_opt = Optimizer(self.critic, cfg.optimizer, cfg.lr_critic_l)
        self.traj = Trajectory()

    def act(self, obs: np.ndarray, mask: np.ndarray, rng: np.random.Generator | None = None,
            greedy: bool = False) -> tuple[int, float]:
        """Sample (or take the mode of) the masked categorical policy."""
        p = self.actor.forward(obs, mask)
        a = int(np.argmax(p)) if greedy else int(rng.choice(len(p), p=p))
        return a, float(np.log(p[a]))

    def probabilities(self, obs: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return self.actor.forward(obs, mask)

    def update(self) -> dict[str, float]:
        """M_1 epochs over this episode's transitions, then clear them."""
        traj = self.traj
        if not len(traj):
            return {}
        cfg = self.cfg
        o = np.array(traj.obs)
        o2 = np.array(traj.next_obs)
        mask = np.array(traj.masks)
        a = np.array(traj.actions)
        r = np.array(traj.rewards)
        done = np.array(traj.done, dtype=float)
        logp_old = np.array(traj.logp_old)
        b = len(a)
        rows = np.arange(b)
        stats = {}
        for _ in range(cfg.ppo_epochs):
            v, vtape = self.critic.forward_tape(o)
            v_next = self.critic.forward(o2)[:, 0]
            target = r + cfg.gamma_l * (1.0 - done) * v_next
            adv = target - v[:, 0]

            p, ptape = self.actor.forward_tape(o, mask)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = p[rows, a] / np.exp(logp_old)
            if not np.all(np.isfinite(ratio)):
                raise NonFiniteError("importance ratio is not finite (stale log-probabilities?)")
            coef = surrogate_grad_logp(ratio, adv, cfg.clip_eps) / b
            onehot = np.zeros_like(p)
            onehot[rows, a] = 1.0
            dlogits = coef[:, None] * (onehot - p)
            self.actor_opt.step(self.actor.backward(ptape, dlogits, wrt="logits"), ascent=True)
            self.critic_opt.step(self.critic.backward(vtape, (2.0 / b) * (v - target[:, None])))
            stats = {"surrogate": float(np.mean(clipped_surrogate(ratio, adv, cfg.clip_eps))),
                     "value_loss": float(np.mean((v[:, 0] - target) ** 2))}
        traj.clear()
        return stats

    def nets(self, n: int) -> dict[str, Mlp]:
        return {f"low_actor_{n}": self.actor, f"low_critic_{n}": self.critic}

    def optimizers(self, n: int) -> dict[str, Optimizer]:
        return {f"low_actor_{n}": self.actor_opt, f"low_critic_{n}": self.critic_opt}
