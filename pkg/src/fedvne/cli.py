"""Experiment harness: generate, train, evaluate, compare, validate.

Every subcommand is reproducible: the (config, seed) pair fully determines
the emitted metric and log files. Wall-clock timings from ``compare`` are
the one exception and go to their own file.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys
import time
from pathlib import Path

from . import engine, workload
from .agent import DomainAgent, load_checkpoint, save_checkpoint
from .baselines import NodeRankPolicy, RandomPolicy
from .config import (
    POLICIES,
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
)
from .policies import HflPolicy
from .training import Trainer

CONFIG_ENV_VAR = "FEDVNE_CONFIG"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are configuration errors
        raise ConfigError(message)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR} if set)")
    types = {"int": int, "float": float, "str": str}
    for f in dataclasses.fields(ExperimentConfig):
        parser.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            type=types[f.type],
            default=None,
            help=f"override config key {f.name}",
        )


def _resolve_config(args) -> ExperimentConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(path) if path else ExperimentConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(ExperimentConfig)
        if getattr(args, f.name, None) is not None
    }
    config = apply_overrides(config, overrides)
    config.validate()
    return config


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _build_policy(name: str, config: ExperimentConfig, checkpoint):
    if name == "hfl":
        if checkpoint is None:
            raise ConfigError("the hfl policy needs --checkpoint")
        domain_params, _ = load_checkpoint(checkpoint)
        agents = {d: DomainAgent(d, p) for d, p in domain_params.items()}
        return HflPolicy(agents, record_traces=False)
    if name == "noderank":
        return NodeRankPolicy()
    if name == "random":
        return RandomPolicy(config.seed)
    raise ConfigError(f"unknown policy '{name}', expected one of {', '.join(POLICIES)}")


def _test_split(config: ExperimentConfig, vnrs):
    split = vnrs[config.train_count : config.train_count + config.test_count]
    return workload.rebase_stream(split)


def _write_series(path: Path, rows) -> None:
    lines = ["t,ltar,ltar2c,acc"]
    for t, ltar, ltar2c, acc in rows:
        lines.append(f"{_fmt(t)},{_fmt(ltar)},{_fmt(ltar2c)},{_fmt(acc)}")
    path.write_text("\n".join(lines) + "\n")


def _summary_line(name: str, ledger) -> str:
    if not ledger.events:
        return f"{name}: no requests processed"
    ltar, ltar2c, acc = ledger.summary()
    return f"{name}: ltar={_fmt(ltar)} ltar2c={_fmt(ltar2c)} acc={_fmt(acc)}"


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    substrate = workload.generate_substrate(config, config.seed)
    vnrs = workload.generate_vnr_stream(config, config.seed + 1)
    substrate_path = out_dir / "substrate.txt"
    vnrs_path = out_dir / "vnrs.txt"
    workload.save_substrate(substrate_path, substrate)
    workload.save_vnrs(vnrs_path, vnrs)
    print(f"{substrate_path} sha256={_sha256(substrate_path)}")
    print(f"{vnrs_path} sha256={_sha256(vnrs_path)}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    substrate = workload.load_substrate(args.substrate)
    vnrs = workload.load_vnrs(args.vnrs)
    train_vnrs = vnrs[: config.train_count]
    trainer = Trainer(
        substrate,
        train_vnrs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        seed=config.seed,
        reject_reward=config.reject_reward,
    )
    result = trainer.run()
    checkpoint_path = out_dir / "checkpoint.txt"
    save_checkpoint(checkpoint_path, result.domain_params, result.global_params)

    domains = sorted(result.domain_params)
    header = ["round_id", "global_loss"]
    header += [f"local_loss_d{d}" for d in domains]
    header += [f"reward_mean_d{d}" for d in domains]
    header += ["window_acc", "window_ltar2c"]
    lines = [",".join(header)]
    for row in result.round_rows:
        fields = [str(row.round_id), _fmt(row.global_loss)]
        fields += [_fmt(row.local_losses.get(d, 0.0)) for d in domains]
        fields += [_fmt(row.reward_means.get(d, 0.0)) for d in domains]
        fields += [_fmt(row.window_acc), _fmt(row.window_ltar2c)]
        lines.append(",".join(fields))
    round_log_path = out_dir / "round_log.csv"
    round_log_path.write_text("\n".join(lines) + "\n")

    print(f"{checkpoint_path}")
    print(f"{round_log_path} rounds={len(result.round_rows)}")
    if result.round_rows:
        print(f"final global_loss={_fmt(result.round_rows[-1].global_loss)}")
    return 0


def cmd_evaluate(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    substrate = workload.load_substrate(args.substrate)
    vnrs = workload.load_vnrs(args.vnrs)
    test_vnrs = _test_split(config, vnrs)
    policy = _build_policy(config.policy, config, args.checkpoint)
    _, ledger, records = engine.run_simulation(substrate.copy(), test_vnrs, policy)
    _write_series(out_dir / "metrics.csv", ledger.series(config.metrics_interval))
    engine.write_decision_log(out_dir / "decisions.csv", records, test_vnrs)
    print(_summary_line(config.policy, ledger))
    return 0


def cmd_compare(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    if not names:
        raise ConfigError("--policies needs at least one policy name")
    substrate = workload.load_substrate(args.substrate)
    vnrs = workload.load_vnrs(args.vnrs)
    test_vnrs = _test_split(config, vnrs)

    series_by_policy = {}
    timing = []
    for position, name in enumerate(names):
        policy = _build_policy(name, config, args.checkpoint)
        started = time.perf_counter()
        _, ledger, records = engine.run_simulation(substrate.copy(), test_vnrs, policy)
        elapsed = time.perf_counter() - started
        column = f"{name}#{position}" if names.count(name) > 1 else name
        series_by_policy[column] = ledger.series(config.metrics_interval)
        engine.write_decision_log(
            out_dir / f"decisions_{column.replace('#', '_')}.csv", records, test_vnrs
        )
        windows = max(1, -(-len(test_vnrs) // config.batch_size))
        timing.append((column, elapsed / windows))
        print(_summary_line(column, ledger))

    for metric_index, metric in ((1, "ltar"), (2, "ltar2c"), (3, "acc")):
        columns = list(series_by_policy)
        grids = [[row[0] for row in series_by_policy[c]] for c in columns]
        if any(g != grids[0] for g in grids[1:]):
            raise RuntimeError("metric series sampled on different time grids")
        lines = ["t," + ",".join(columns)]
        for i, t in enumerate(grids[0] if grids else []):
            values = [series_by_policy[c][i][metric_index] for c in columns]
            lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in values))
        (out_dir / f"compare_{metric}.csv").write_text("\n".join(lines) + "\n")

    timing_lines = ["policy,seconds_per_round"]
    timing_lines += [f"{name},{_fmt(seconds)}" for name, seconds in timing]
    (out_dir / "compare_timing.csv").write_text("\n".join(timing_lines) + "\n")
    return 0


def cmd_validate(args) -> int:
    _resolve_config(args)
    substrate = workload.load_substrate(args.substrate)
    vnrs = workload.load_vnrs(args.vnrs)
    records = engine.read_decision_log(args.decisions)
    logged_ids = {r.vnr_id for r in records}
    # replay is invariant under the uniform clock shift evaluation applies,
    # so the original stream entries are the right reference
    stream = [v for v in vnrs if v.vnr_id in logged_ids]
    violations = engine.replay_validate(substrate, stream, records)
    for message in violations:
        print(message)
    print(f"{len(violations)} violations in {args.decisions}")
    return 0 if not violations else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedvne", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write substrate and request-stream files")
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the federated policy on the first split")
    p.add_argument("--substrate", required=True)
    p.add_argument("--vnrs", required=True)
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="frozen-policy run over the held-out split")
    p.add_argument("--substrate", required=True)
    p.add_argument("--vnrs", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run several policies on the same workload")
    p.add_argument("--substrate", required=True)
    p.add_argument("--vnrs", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--policies", default="hfl,noderank,random")
    p.add_argument("--out-dir", default=".")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="re-check every constraint over a decision log")
    p.add_argument("--substrate", required=True)
    p.add_argument("--vnrs", required=True)
    p.add_argument("--decisions", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (workload.ParseError, workload.ValidationError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
