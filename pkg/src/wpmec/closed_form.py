"""Analytic per-slot optima and the minimum-WPT covering program.

Given an offloading assignment, the cheapest way for a WD to compute locally
is to stretch the computation over the whole slot, and the cheapest way to
offload is to transmit for exactly the Shannon-limited duration.  Whatever
energy the WDs still lack must come from the HAPs' broadcast; since only the
product alpha * P_h enters both the harvested energy and the broadcast cost,
that part reduces to a small linear covering program over q_m = alpha * P_h,m.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig

TOL = 1e-12


@dataclass(frozen=True)
class LocalPlan:
    tau: float  # s
    freq: float  # Hz
    energy: float  # J
    feasible: bool  # freq <= f_max


@dataclass(frozen=True)
class OffloadPlan:
    tau: float  # s
    energy: float  # J


def local_computing_plan(d_bits: float, cfg: NetworkConfig) -> LocalPlan:
    """Minimum-energy local execution of ``d_bits`` within one slot."""
    if not d_bits > 0:
        raise ValueError(f"local computing needs a positive load (got {d_bits!r})")
    T = cfg.slot_duration
    freq = cfg.c_n * d_bits / T
    energy = cfg.k_n * freq ** 3 * T
    return LocalPlan(T, freq, energy, freq <= cfg.f_max * (1 + TOL))


def local_energy(d_bits: float, tau: float, cfg: NetworkConfig) -> float:
    """Local energy when the load is spread over ``tau`` seconds."""
    return cfg.k_n * (cfg.c_n * d_bits) ** 3 / tau ** 2


def uplink_rate(gain: float, cfg: NetworkConfig) -> float:
    """Shannon rate in bit/s of one WD transmitting alone to a HAP."""
    return cfg.bandwidth * np.log2(1.0 + cfg.wd_tx_power * gain / cfg.noise_power)


def min_offload_duration(d_bits: float, gain: float, cfg: NetworkConfig) -> float:
    return cfg.overhead * d_bits / uplink_rate(gain, cfg)


def offloading_plan(d_bits: float, gain: float, cfg: NetworkConfig) -> OffloadPlan:
    """Shortest (hence cheapest) transmission of ``d_bits`` over ``gain``."""
    if not gain > 0:
        raise ValueError(f"offloading needs a positive channel gain (got {gain!r})")
    if not d_bits > 0:
        raise ValueError(f"offloading needs a positive load (got {d_bits!r})")
    tau = min_offload_duration(d_bits, gain, cfg)
    return OffloadPlan(tau, (cfg.wd_tx_power + cfg.wd_circuit_power) * tau)


def reward_offset(cfg: NetworkConfig, mean_bits: float | None = None) -> float:
    """Average per-slot HAP energy bound: every HAP at full power for the whole
    slot plus one WD's mean load processed at the costliest HAP."""
    bits = cfg.mean_bits if mean_bits is None else mean_bits
    return cfg.m_haps * cfg.p_max * cfg.slot_duration + cfg.e_m * bits


def effective_reward_offset(cfg: NetworkConfig) -> float:
    return reward_offset(cfg) if cfg.reward_offset is None else float(cfg.reward_offset)


def resource_plan(data: np.ndarray, gains: np.ndarray, assignment: np.ndarray,
                  cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Offload durations and CPU frequencies for a fixed assignment.

    ``assignment[n]`` is -1 (dropped), 0 (local) or m >= 1 (HAP m).  Entries
    of WDs outside the respective mode are zero.
    """
    n = len(data)
    tau = np.zeros(n)
    freq = np.zeros(n)
    for i in range(n):
        x = int(assignment[i])
        if data[i] <= 0 or x < 0:
            continue
        if x == 0:
            freq[i] = cfg.c_n * data[i] / cfg.slot_duration
        else:
            tau[i] = min_offload_duration(data[i], gains[i, x - 1], cfg)
    return tau, freq


@dataclass(frozen=True)
class WptRequirement:
    needed: np.ndarray  # (K,) J still missing per active WD after its battery
    gains: np.ndarray  # (K, M) channel gains of those WDs
    alpha_ub: float  # s, longest WPT phase the offloading schedule allows
    infeasible: np.ndarray  # (K,) bool, required energy exceeds the battery

    def __post_init__(self):
        if np.any(self.needed < 0):
            raise ValueError("needed energy must be non-negative")


def wpt_requirement(required: np.ndarray, battery: np.ndarray, gains: np.ndarray,
                    hap_busy: np.ndarray, cfg: NetworkConfig) -> WptRequirement:
    """Covering data for WDs needing ``required`` joules this slot.

    ``hap_busy[m]`` is the total offloading time booked on HAP m; the WPT
    phase must fit in what is left of the slot at every HAP.
    """
    required = np.asarray(required, dtype=float)
    needed = np.maximum(required - np.asarray(battery, dtype=float), 0.0)
    T = cfg.slot_duration
    slack = T - float(np.max(hap_busy)) if len(hap_busy) else T
    alpha_ub = min(max(slack, 0.0), T)
    infeasible = required > cfg.battery_capacity * (1 + TOL)
    if slack < -TOL:
        infeasible = np.ones_like(infeasible)
    return WptRequirement(needed, np.asarray(gains, dtype=float).reshape(len(required), -1),
                          alpha_ub, infeasible)


@dataclass(frozen=True)
class WptSolution:
    q: np.ndarray  # (M,) J broadcast per HAP
    alpha: float  # s
    p_h: np.ndarray  # (M,) W
    total: float  # J


def _covering_rows(req: WptRequirement, cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    active = req.needed > 0
    a = cfg.eh_efficiency * req.gains[active]
    b = req.needed[active]
    return a, b


def _vertex_min(a: np.ndarray, b: np.ndarray, cap: float) -> np.ndarray | None:
    """Minimise sum(q) s.t. a q >= b, 0 <= q <= cap by enumerating vertices."""
    m = a.shape[1]
    eye = np.eye(m)
    rows = np.vstack([a, eye, -eye])
    rhs = np.concatenate([b, np.zeros(m), np.full(m, -cap)])
    scale = np.linalg.norm(rows, axis=1)
    rows = rows / scale[:, None]
    rhs = rhs / scale
    combos = np.array(list(itertools.combinations(range(len(rows)), m)))
    mats = rows[combos]  # (C, m, m)
    vecs = rhs[combos]
    det = np.linalg.det(mats)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return None
    sol = np.linalg.solve(mats[ok], vecs[ok][..., None])[..., 0]
    slack = sol @ rows.T - rhs
    feasible = np.all(slack >= -1e-10 * (1.0 + np.abs(rhs)), axis=1)
    if not feasible.any():
        return None
    cand = sol[feasible]
    obj = cand.sum(axis=1)
    best = cand[int(np.argmin(obj))]
    return np.clip(best, 0.0, cap)


def _completion(a: np.ndarray, b: np.ndarray, q_head: np.ndarray) -> np.ndarray:
    """Smallest last coordinate covering every row, for each row of ``q_head``."""
    resid = b[None, :] - q_head @ a[:, :-1].T
    return np.maximum(0.0, np.max(resid / a[None, :, -1], axis=1))


def _nested_min(a: np.ndarray, b: np.ndarray, cap: float, prefix: np.ndarray,
                points: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Best value and minimiser over the coordinates after ``prefix``, per row.

    The partial minimum of a convex function is convex, so bracketing each
    coordinate around its grid argmin never loses the optimum.
    """
    m = a.shape[1]
    rows = len(prefix)
    if prefix.shape[1] == m - 1:
        last = _completion(a, b, prefix) if m > 1 else np.full(rows, float(np.max(b / a[:, 0])))
        val = np.where(last <= cap * (1 + 1e-12), prefix.sum(axis=1) + last, np.inf)
        return val, np.column_stack([prefix, last])
    lo, hi = np.zeros(rows), np.full(rows, cap)
    best = np.full(rows, np.inf)
    arg = np.zeros((rows, m))
    idx = np.arange(rows)
    frac = np.linspace(0.0, 1.0, points)
    for _ in range(levels):
        grid = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        cand = np.column_stack([np.repeat(prefix, points, axis=0), grid.ravel()])
        val, q = _nested_min(a, b, cap, cand, points, levels)
        val = val.reshape(rows, points)
        i = np.argmin(val, axis=1)
        better = val[idx, i] < best
        best = np.where(better, val[idx, i], best)
        arg[better] = q.reshape(rows, points, m)[idx, i][better]
        step = (hi - lo) / (points - 1)
        centre = grid[idx, i]
        lo, hi = np.maximum(centre - step, 0.0), np.minimum(centre + step, cap)
    return best, arg


def _grid_min(a: np.ndarray, b: np.ndarray, cap: float, points: int = 9,
              levels: int = 24) -> np.ndarray | None:
    """Same program by nested bracketing grid search, one coordinate at a time.

    The last coordinate is always set in closed form; each level shrinks a
    coordinate's bracket by ``(points - 1) / 2``.
    """
    val, q = _nested_min(a, b, cap, np.zeros((1, 0)), points, levels)
    if not np.isfinite(val[0]):
        return None
    return np.clip(q[0], 0.0, cap)


def min_wpt_energy(req: WptRequirement, cfg: NetworkConfig,
                   method: str = "auto") -> WptSolution | None:
    """Least total broadcast energy meeting every active WD's shortfall.

    The WPT phase is pinned to ``req.alpha_ub`` (a longer phase only widens
    the power box and never costs more).  Returns None when infeasible.
    """
    if req.infeasible.any():
        return None
    m = req.gains.shape[1]
    if not np.any(req.needed > 0):
        return WptSolution(np.zeros(m), 0.0, np.zeros(m), 0.0)
    cap = req.alpha_ub * cfg.p_max
    if cap <= 0:
        return None
    a, b = _covering_rows(req, cfg)
    if method == "auto":
        method = "vertex" if m <= 4 else "grid"
    if method == "vertex":
        q = _vertex_min(a, b, cap)
    elif method == "grid":
        q = _grid_min(a, b, cap)
    else:
        raise ValueError(f"unknown method {method!r}")
    if q is None:
        return None
    alpha = req.alpha_ub
    return WptSolution(q, alpha, np.minimum(q / alpha, cfg.p_max), float(q.sum()))
