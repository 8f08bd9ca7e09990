from ..rewards import high_reward, low_reward
from .ddpg import DdpgAgent, HighAction, ReplayBuffer, action_bounds
from .features import (Scales, action_mask, derive_feasible_set, high_state, low_observation)
from .ippo import LowAgent, Trajectory, clipped_surrogate, surrogate_grad_logp, td_advantage
from .tmado import Tmado, evaluate, evaluate_oracle, train

__all__ = [
    "DdpgAgent", "HighAction", "LowAgent", "ReplayBuffer", "Scales", "Tmado", "Trajectory",
    "action_bounds", "action_mask", "clipped_surrogate", "derive_feasible_set", "evaluate",
    "evaluate_oracle", "high_reward", "high_state", "low_observation", "low_reward",
    "surrogate_grad_logp", "td_advantage", "train",
]
