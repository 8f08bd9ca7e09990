"""Command-line entry points: train, eval, sweep and oracle.

Every CSV carries a header row and a ``config_hash`` column.  Nothing that
varies between identical runs (timestamps, wall-clock) is written unless
explicitly requested, so reruns with the same seed are byte-identical.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents.tmado import METRIC_COLUMNS, EpisodeStats, Tmado, evaluate, evaluate_oracle, train
from .baselines import POLICIES
from .config import FIELD_NAMES, ConfigError, NetworkConfig, _coerce, load_config
from .env import WpmecEnv, step
from .nn import CheckpointError, load_checkpoint
from .oracle import OracleBudgetError, SlotInstance, assignment_string, policy_gap, random_instance, solve_slot
from .rng import TOPOLOGY, make_rng
from .topology import generate_topology
from .trace import write_csv

LEARNED = ("tmado", "lc", "rec")
LOW_MODE = {"tmado": "ippo", "lc": "lc", "rec": "rec", "random": "random", "greedy": "greedy"}
SUMMARY_COLUMNS = ["config_hash", "policy", "seed", "episodes", "mean_psi", "std_psi", "rlc",
                   "miss_rate"]
SWEEP_COLUMNS = ["config_hash", "param", "value", "seed", "policy", "mean_psi", "std_psi", "rlc",
                 "miss_rate"]


class HarnessError(RuntimeError):
    pass


def make_env(cfg: NetworkConfig, policy: str) -> WpmecEnv:
    """Environment for ``policy``; REC ignores transmission zones."""
    topo = generate_topology(cfg, make_rng(cfg.seed, TOPOLOGY))
    if policy == "rec":
        topo = topo.with_zone_radius(math.inf)
    return WpmecEnv(cfg, topo)


def make_system(cfg: NetworkConfig, policy: str, env: WpmecEnv | None = None) -> Tmado:
    if policy not in LOW_MODE:
        raise HarnessError(f"policy {policy!r} has no controller (choose from {list(LOW_MODE)})")
    env = env or make_env(cfg, policy)
    high = "ddpg" if policy in LEARNED else "fixed"
    return Tmado(cfg, env, LOW_MODE[policy], high)


def summarize(stats: list[EpisodeStats]) -> tuple[float, float, float, float]:
    psi = np.array([s.mean_psi for s in stats])
    return (float(psi.mean()), float(psi.std()), float(np.mean([s.rlc for s in stats])),
            float(np.mean([s.miss_rate for s in stats])))


def run_policy(cfg: NetworkConfig, policy: str, eval_episodes: int,
               checkpoint: str | None = None) -> tuple[float, float, float, float]:
    """Train (if learned and no checkpoint) then evaluate without exploration."""
    if policy == "oracle":
        return summarize(evaluate_oracle(cfg, make_env(cfg, policy), eval_episodes))
    system = make_system(cfg, policy)
    if policy in LEARNED:
        if checkpoint:
            doc = load_checkpoint(checkpoint, cfg.config_hash())
            system.load_nets(doc["nets"])
        else:
            train(cfg, system.env, system)
    return summarize(evaluate(system, eval_episodes))


# -- commands -----------------------------------------------------------------

def _config(args) -> NetworkConfig:
    overrides = {"seed": args.seed}
    if getattr(args, "train_episodes", None) is not None:
        overrides["episodes"] = args.train_episodes
    return load_config(args.config, **overrides)


def cmd_train(args) -> int:
    if args.policy not in LEARNED:
        raise HarnessError(f"only learned policies can be trained ({', '.join(LEARNED)})")
    cfg = _config(args)
    system = make_system(cfg, args.policy)
    out = Path(args.out)
    _, rows = train(cfg, system.env, system)
    h = cfg.config_hash()
    write_csv(out / "metrics.csv", ["config_hash", "policy", "seed", *METRIC_COLUMNS],
              [(h, args.policy, cfg.seed, *r) for r in rows])
    system.save(out / "checkpoint.json", extra={"policy": args.policy, "seed": cfg.seed})
    tail = [r[1] for r in rows[-10:]]
    print(f"final mean psi {np.mean(tail):.6f} J/slot (last {len(tail)} episodes)")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.policy in LEARNED and not args.checkpoint:
        raise HarnessError(f"eval of {args.policy!r} needs --checkpoint (see the train command)")
    res = run_policy(cfg, args.policy, args.episodes, args.checkpoint)
    write_csv(Path(args.out) / "summary.csv", SUMMARY_COLUMNS,
              [(cfg.config_hash(), args.policy, cfg.seed, args.episodes, *res)])
    print(f"{args.policy}: mean psi {res[0]:.6f} J/slot, miss rate {res[3]:.3f}")
    return 0


@dataclass(frozen=True)
class ExperimentSpec:
    base: NetworkConfig
    param: str
    values: tuple
    seeds: tuple[int, ...]
    policies: tuple[str, ...]
    eval_episodes: int = 10

    def __post_init__(self):
        if self.param not in FIELD_NAMES:
            raise HarnessError(f"unknown sweep parameter {self.param!r}")
        if not self.seeds:
            raise HarnessError("sweep needs at least one seed")
        if not self.values:
            raise HarnessError("sweep needs at least one value")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise HarnessError(f"unknown policies {bad}")

    def cells(self) -> list[tuple[str, object, int, NetworkConfig]]:
        out = []
        for value in self.values:
            for seed in self.seeds:
                cfg = self.base.replace(**{self.param: _coerce(self.param, value), "seed": seed})
                for policy in self.policies:
                    out.append((policy, value, seed, cfg))
        return out


def _run_cell(cell, eval_episodes: int):
    policy, value, seed, cfg = cell
    return (cfg.config_hash(), policy, value, seed, *run_policy(cfg, policy, eval_episodes))


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[tuple]:
    """One row per (value, seed, policy) in a fixed order, whatever ``workers`` is."""
    cells = spec.cells()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell, cells, [spec.eval_episodes] * len(cells)))
    else:
        results = [_run_cell(c, spec.eval_episodes) for c in cells]
    return [(h, spec.param, value, seed, policy, *m) for h, policy, value, seed, *m in results]


def cmd_sweep(args) -> int:
    if not args.param or not args.values:
        raise HarnessError("sweep needs --param and --values")
    base = _config(args)
    spec = ExperimentSpec(base, args.param, tuple(args.values.split(",")),
                          tuple(int(s) for s in args.seeds.split(",") if s.strip()),
                          tuple(args.policy.split(",")), args.episodes)
    rows = run_sweep(spec, args.workers)
    write_csv(Path(args.out) / "sweep.csv", SWEEP_COLUMNS, rows)
    for r in rows:
        print(f"{r[1]}={r[2]} seed={r[3]} {r[4]}: mean psi {r[5]:.6f}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    policy = args.policy
    system = None
    if policy != "oracle":
        system = make_system(cfg, policy)
        if policy in LEARNED:
            if not args.checkpoint:
                raise HarnessError(f"gap of {policy!r} needs --checkpoint")
            system.load_nets(load_checkpoint(args.checkpoint, cfg.config_hash())["nets"])
    header = ["config_hash", "seed", "instance", "psi_star", "feasible", "assignment",
              "examined", "policy", "policy_psi", "gap"]
    if args.timing:
        header.append("time_s")
    rows = []
    for i in range(args.instances):
        inst = random_instance(cfg, cfg.seed, i, system.topology if system else None)
        t0 = time.perf_counter()
        sol = solve_slot(inst)
        elapsed = time.perf_counter() - t0
        if system is None:
            p_psi, met = sol.psi, sol.feasible
        else:
            decision, _, _ = system.decide(inst.state)
            out = step(inst.state, decision, cfg, inst.topology)
            p_psi, met = out.psi, out.demand_met
        gap = policy_gap(p_psi, met, sol, cfg.penalty)
        row = [cfg.config_hash(), cfg.seed, i, sol.psi, sol.feasible,
               assignment_string(sol.assignment), sol.assignments_examined, policy, p_psi,
               "" if gap is None else gap]
        if args.timing:
            row.append(elapsed)
        rows.append(row)
    write_csv(Path(args.out) / "oracle.csv", header, rows)
    gaps = [r[9] for r in rows if r[9] != ""]
    if gaps:
        print(f"{policy}: mean gap {np.mean(gaps):.4f}, max gap {np.max(gaps):.4f} "
              f"over {len(gaps)} feasible instances")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wpmec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, episodes_help):
        p.add_argument("--config", help="JSON or TOML config file (default: desk preset)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--episodes", type=int, help=episodes_help)
        p.add_argument("--policy", default="tmado")
        p.add_argument("--out", default="out")
        p.add_argument("--checkpoint")

    p = sub.add_parser("train", help="train a learned policy")
    common(p, "training episodes (overrides the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy without exploration")
    common(p, "evaluation episodes (default 10)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over one config parameter, seeds and policies")
    common(p, "evaluation episodes per cell (default 10)")
    p.add_argument("--param")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--train-episodes", type=int, dest="train_episodes")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact single-slot optima and a policy's gap")
    common(p, "unused")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--timing", action="store_true", help="add a wall-clock column")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        args.train_episodes = args.episodes
    elif args.command in ("eval", "sweep"):
        args.episodes = 10 if args.episodes is None else args.episodes
    try:
        return args.func(args)
    except (ConfigError, HarnessError, CheckpointError, OracleBudgetError, OSError, ValueError) as exc:
        print(f"wpmec {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
