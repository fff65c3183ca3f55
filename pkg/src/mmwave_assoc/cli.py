"""Command-line interface: seeded runs, sweeps, summaries, snapshots.

Exit codes: 0 success, 1 usage, 2 config error, 3 runtime failure.
Sweep parallelism is capped by the SIM_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import SimConfig, load_config
from .engine import run_simulation
from .errors import ConfigError, SimError
from .metrics import compare_runs, write_metrics
from .policies import ORACLE_CSI_POLICIES, PolicyKind


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _run_name(policy: str, seed: int, lam: float | None, power_dbm: float | None) -> str:
    parts = [policy, f"s{seed}"]
    if lam is not None:
        parts.append(f"lam{lam:g}")
    if power_dbm is not None:
        parts.append(f"pwr{power_dbm:g}")
    return "_".join(parts)


def _execute_run(args: tuple) -> str:
    cfg_path, out_dir, policy, seed, lam, power_dbm, snapshot = args
    config = load_config(cfg_path)
    config = replace(config, seed=seed)
    if policy is not None:
        config = replace(config, policy=PolicyKind(policy))
    if lam is not None:
        config = replace(config, lam=lam)
    if power_dbm is not None:
        config = replace(config, radio=replace(config.radio, tx_power_w=10 ** (power_dbm / 10) * 1e-3))
    name = _run_name(config.policy.value, seed, lam, power_dbm)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series, sim = run_simulation(config)
    write_metrics(series, out_dir / f"{name}.csv")
    meta = {
        "config_hash": config.config_hash(),
        "seed": seed,
        "policy": config.policy.value,
        "oracle_csi": config.policy in ORACLE_CSI_POLICIES,
        "effective_config": config.effective_dict(),
    }
    if lam is not None:
        meta["lambda"] = lam
    if power_dbm is not None:
        meta["tx_power_dbm"] = power_dbm
    (out_dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    if snapshot:
        (out_dir / f"{name}.snapshot.json").write_text(json.dumps(sim.snapshot(), sort_keys=True))
    return name


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        a, b = spec.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in spec.split(",") if s]


def _cmd_run(args) -> int:
    name = _execute_run(
        (args.config, args.out, args.policy, args.seed, None, None, not args.no_snapshot)
    )
    print(f"run complete: {Path(args.out) / (name + '.csv')}")
    return 0


def _cmd_sweep(args) -> int:
    seeds = _parse_seeds(args.seeds)
    policies = args.policies.split(",") if args.policies else [None]
    lambdas = [float(x) for x in args.lambdas.split(",")] if args.lambdas else [None]
    powers = [float(x) for x in args.powers_dbm.split(",")] if args.powers_dbm else [None]
    for p in policies:
        if p is not None:
            PolicyKind(p)  # validate early
    specs = [
        (args.config, args.out, p, s, lam, pw, False)
        for p in policies
        for s in seeds
        for lam in lambdas
        for pw in powers
    ]
    threads = int(os.environ.get("SIM_THREADS", "0")) or os.cpu_count() or 1
    threads = max(1, min(threads, len(specs)))
    if threads == 1:
        names = [_execute_run(spec) for spec in specs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(threads) as pool:
            names = pool.map(_execute_run, specs)
    summary = compare_runs(args.out)
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"sweep complete: {len(names)} runs, summary at {Path(args.out) / 'summary.json'}")
    return 0


def _cmd_compare(args) -> int:
    summary = compare_runs(args.in_dir)
    out_path = Path(args.in_dir) / "summary.json"
    out_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_snapshot(args) -> int:
    src = Path(args.in_path)
    candidates = [src] if src.is_file() else sorted(src.glob("*.snapshot.json"))
    if not candidates:
        raise SimError(f"no snapshot JSON found under {src}")
    snap = json.loads(candidates[0].read_text())
    if snap.get("version") != 1:
        raise SimError(f"unsupported snapshot version {snap.get('version')!r}")
    Path(args.out).write_text(json.dumps(snap, sort_keys=True))
    print(f"snapshot written: {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mmwave-assoc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded simulation run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--policy", default=None, help="override the config's policy")
    p_run.add_argument("--no-snapshot", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="parallel sweep over seeds x policies")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seeds", required=True, help="A..B or comma list")
    p_sweep.add_argument("--policies", default=None, help="comma-separated policy names")
    p_sweep.add_argument("--lambdas", default=None, help="comma-separated arrival rates")
    p_sweep.add_argument("--powers-dbm", default=None, help="comma-separated tx powers")
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="summarize a directory of run CSVs")
    p_cmp.add_argument("--in", dest="in_dir", required=True)
    p_cmp.set_defaults(func=_cmd_compare)

    p_snap = sub.add_parser("snapshot", help="re-emit a run's learner snapshot")
    p_snap.add_argument("--in", dest="in_path", required=True)
    p_snap.add_argument("--out", required=True)
    p_snap.set_defaults(func=_cmd_snapshot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SimError, OSError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
