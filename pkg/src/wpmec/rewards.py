"""Reward functions of the two agent levels, kept free of environment imports
so the environment can stamp rewards on every outcome it produces."""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .config import NetworkConfig
    from .env import SlotOutcome


def high_reward(outcome: "SlotOutcome", penalty: float) -> float:
    """Negative HAP energy of the slot, minus ``penalty`` if demand was missed."""
    return -float(outcome.psi) - (0.0 if outcome.demand_met else float(penalty))


def low_reward(outcome: "SlotOutcome", n: int, cost: float, u: float,
               cfg: "NetworkConfig") -> float:
    """Per-WD reward: ``u`` minus the priced cost of whatever mode succeeded.

    Local WDs pay ``cost`` per joule they spent; offloading WDs additionally
    pay the HAP's per-bit processing energy.  Failed or dropped WDs get 0.
    """
    x = int(outcome.assignment[n])
    if x < 0:
        return 0.0
    spent = cost * float(outcome.wd_energy[n])
    if x == 0:
        return u - spent
    return u - (spent + cfg.e_m * float(outcome.data[n]))
