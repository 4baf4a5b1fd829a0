"""Command-line entry point: ``arenabot {learn,replay,analyze,baseline,pipeline}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig, StageError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value file applied before other flags")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--moves", type=int, help="learning trial length")
    p.add_argument("--replay-moves", type=int, help="moves per replay trial")
    p.add_argument("--replicates", type=int, help="replays per policy")
    p.add_argument("--bins", choices=["r0", "r1", "r2", "all"], help="reward binning scheme(s)")
    p.add_argument("--no-noise", action="store_true", help="disable actuation noise")
    p.add_argument("--states", type=int, choices=[7, 9], help="state set of the uniform baseline")
    p.add_argument("--policies-from-paper", action="store_true", help="use the published policy table")
    p.add_argument("--replay-explore", action="store_true", help="keep one random move per episode in replays")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _policy_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", type=Path, help="trace.json to take policies from (default OUT/trace.json)")
    p.add_argument("--policy-id", type=int, action="append", dest="policy_ids", help="restrict to these ids")
    p.add_argument("--inline", help="comma-separated actions for states 0-8, e.g. F,R,L,A,F,RAND,F,RAND,RAND")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = cfg.with_overrides(harness.read_config_file(args.config))
    flags = {
        "master_seed": args.seed,
        "trial_moves": args.moves,
        "replay_moves": args.replay_moves,
        "replay_replicates": args.replicates,
        "baseline_states": args.states,
        "out_dir": args.out,
    }
    cfg = cfg.with_overrides({k: v for k, v in flags.items() if v is not None})
    if args.bins:
        cfg = cfg.with_overrides({"bins": ("r0", "r1", "r2") if args.bins == "all" else (args.bins,)})
    if args.no_noise:
        cfg = cfg.with_overrides({"noise": False})
    if args.policies_from_paper:
        cfg = cfg.with_overrides({"policies_from_paper": True})
    if args.replay_explore:
        cfg = cfg.with_overrides({"replay_explore": True})
    cfg.validate()
    return cfg


def _policies(cfg, args):
    inline = args.inline.split(",") if args.inline else None
    return harness.resolve_policies(cfg, args.trace, args.policy_ids, inline)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="arenabot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_learn = sub.add_parser("learn", help="run one learning trial")
    p_replay = sub.add_parser("replay", help="replay policies without learning")
    p_an = sub.add_parser("analyze", help="entropy report from replay CSVs")
    p_base = sub.add_parser("baseline", help="uniform-state predicted entropies")
    p_pipe = sub.add_parser("pipeline", help="learn, replay, analyze and write a manifest")
    for p in (p_learn, p_replay, p_an, p_base, p_pipe):
        _add_common(p)
    for p in (p_replay, p_an, p_base):
        _policy_source(p)
    p_an.add_argument("replays", nargs="*", type=Path, help="replay CSVs (default OUT/replays/*.csv)")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        t0 = time.perf_counter()
        if args.command == "learn":
            res = harness.cmd_learn(cfg)
            print(f"wrote {res['trace']} ({len(res['result'].trace)} policies) and {res['learn_trajectory']}")
        elif args.command == "replay":
            paths = harness.cmd_replay(cfg, _policies(cfg, args))
            print(f"wrote {len(paths)} replay files under {Path(cfg.out_dir) / 'replays'}")
        elif args.command == "analyze":
            paths = args.replays or sorted((Path(cfg.out_dir) / "replays").glob("replay_p*_r*.csv"))
            res = harness.cmd_analyze(cfg, paths, _policies(cfg, args))
            print(f"wrote {res['files']['entropy_report']}")
        elif args.command == "baseline":
            print(f"wrote {harness.cmd_baseline(cfg, _policies(cfg, args))}")
        else:
            res = harness.cmd_pipeline(cfg)
            print(f"{'pol':>3} {'H_state':>8} {'H_action':>8} {'pred_A':>8} {'reward':>9}")
            for m in res["means"]:
                print(f"{m.policy_id:>3} {m.H_state:8.4f} {m.H_action:8.4f} {m.H_action_pred:8.4f} {m.total_reward:9.2f}")
            print(f"wrote {res['manifest']}")
        logging.info("done in %.2fs", time.perf_counter() - t0)
    except StageError as e:
        print(f"error in stage {e.stage}: {e}", file=sys.stderr)
        return 1
    except (ConfigError, KeyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
