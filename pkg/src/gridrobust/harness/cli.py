"""Command-line entry point: ``gridrobust {run,train-rlpa,report,weakmap}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from ..grid.env import layout_for
from ..grid.model import load_grid
from ..defender import GreedyDefender
from ..metrics import build_reports
from .campaign import run_campaign, train_rlpa_cmd
from .config import PERTURBER_KINDS, CampaignConfig, ConfigError, config_from_dict, load_config
from .outputs import emit_outputs, read_traces, write_reports, write_weakmap

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML campaign file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--episodes", type=int)
    common.add_argument("--max-steps", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--perturber", choices=PERTURBER_KINDS)
    common.add_argument("--desk", action="store_true", help="desk scale: 10 episodes x 2016 steps")
    g = common.add_argument_group("perturber overrides")
    g.add_argument("--p", type=float, help="RPA firing probability")
    g.add_argument("--sigma-gen", type=float, help="RPA log-std for generator readings")
    g.add_argument("--w", type=int, help="GEPA iterations")
    g.add_argument("--zeta", type=float, help="GEPA step size")
    g.add_argument("--xi", type=float, help="GEPA/RLPA perturbation bound")
    g.add_argument("--alpha", type=float, help="RLPA learning rate")
    g.add_argument("--epsilon", type=float, help="RLPA exploration rate")
    g.add_argument("--gamma", type=float, help="RLPA discount")
    g.add_argument("--q-path", help="RLPA Q-table file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gridrobust", description="Observation-perturbation campaigns on a grid defender.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run a paired campaign and write reports")
    t = sub.add_parser("train-rlpa", parents=[common], help="train and persist the RLPA Q-table")
    t.add_argument("--q-out", help="destination file (default <out>/rlpa_q.json)")
    sub.add_parser("report", parents=[common], help="recompute reports from traces in --out")
    sub.add_parser("weakmap", parents=[common], help="write weakmap.csv from traces in --out")
    return parser


def _apply_overrides(cfg: CampaignConfig, args: argparse.Namespace) -> CampaignConfig:
    if args.desk:
        cfg = cfg.desk()
    top = {"seed": args.seed, "episodes": args.episodes, "max_steps": args.max_steps, "output": args.out}
    cfg = replace(cfg, **{k: v for k, v in top.items() if v is not None})
    p = cfg.perturber
    if args.perturber is not None:
        p = replace(p, kind=args.perturber)
    rpa = {"p": args.p, "sigma_gen": args.sigma_gen}
    gepa = {"iterations": args.w, "step_size": args.zeta, "max_perturbation": args.xi}
    rlpa = {"alpha": args.alpha, "epsilon": args.epsilon, "gamma": args.gamma, "xi": args.xi, "q_path": args.q_path}
    p = replace(
        p,
        rpa=replace(p.rpa, **{k: v for k, v in rpa.items() if v is not None}),
        gepa=replace(p.gepa, **{k: v for k, v in gepa.items() if v is not None}),
        rlpa=replace(p.rlpa, **{k: v for k, v in rlpa.items() if v is not None}),
    )
    return replace(cfg, perturber=p)


def _config(args: argparse.Namespace) -> CampaignConfig:
    cfg = load_config(args.config, check_files=False) if args.config else CampaignConfig()
    return _apply_overrides(cfg, args).validate()


def _saved_config(out: Path) -> CampaignConfig:
    path = out / "config.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return config_from_dict(doc["config"])


def _cmd_run(args) -> int:
    cfg = _config(args)
    result = run_campaign(cfg)
    out = emit_outputs(result)
    for e, msg in sorted(result.failures.items()):
        print(f"episode {e} failed: {msg}", file=sys.stderr)
    if not result.traces:
        return EXIT_RUNTIME
    print(f"wrote {len(result.traces)} episode(s) to {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _config(args)
    dest = Path(args.q_out) if args.q_out else Path(cfg.output) / "rlpa_q.json"
    path = train_rlpa_cmd(cfg, dest)
    print(f"wrote {path}")
    return EXIT_OK


def _stored(args):
    out = Path(args.out or CampaignConfig().output)
    cfg = _saved_config(out)
    if args.perturber is not None:
        cfg = replace(cfg, perturber=replace(cfg.perturber, kind=args.perturber))
    traces = read_traces(out)
    if not traces:
        raise RuntimeError(f"no traces under {out / 'traces'}")
    return out, cfg, traces


def _cmd_report(args) -> int:
    out, cfg, traces = _stored(args)
    model = load_grid(cfg.grid)
    actions = GreedyDefender(model, config=cfg.defender).actions
    rob, res = build_reports(traces, actions, cfg.metrics)
    try:
        failures = json.loads((out / "robustness.json").read_text()).get("failed_episodes", {})
    except (OSError, ValueError):
        failures = {}
    write_reports(out, rob, res, cfg, failures, cfg.perturber.kind)
    print((out / "tables.txt").read_text())
    return EXIT_OK


def _cmd_weakmap(args) -> int:
    out, cfg, traces = _stored(args)
    write_weakmap(out, traces, layout_for(load_grid(cfg.grid)), cfg.perturber.kind)
    print(f"wrote {out / 'weakmap.csv'}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "train-rlpa": _cmd_train, "report": _cmd_report, "weakmap": _cmd_weakmap}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; report it as a config error
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to a single exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
