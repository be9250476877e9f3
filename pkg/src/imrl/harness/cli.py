"""Command-line entry points: train, compare, eval."""

from __future__ import annotations

import argparse
import sys

from .compare import compare
from .config import ConfigError, load_config
from .run import evaluate, load_run, run_training


def _parse_seeds(spec: str) -> list[int]:
    if "," in spec:
        return [int(s) for s in spec.split(",") if s != ""]
    return list(range(int(spec)))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="imrl",
                                     description="train/compare TD agents with the "
                                                 "critic-difference propagation module")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one seeded training run")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--resume", default=None, help="checkpoint to continue from")
    p_train.add_argument("--quiet", action="store_true")

    p_cmp = sub.add_parser("compare", help="baseline vs variant over seeds")
    p_cmp.add_argument("--config-a", required=True, help="baseline config")
    p_cmp.add_argument("--config-b", required=True, help="variant config")
    p_cmp.add_argument("--seeds", required=True,
                       help="seed count N (runs 0..N-1) or comma list like 0,1,2")
    p_cmp.add_argument("--at-step", type=int, required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate a checkpointed policy")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, required=True)
    p_eval.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            result = run_training(cfg, args.out, quiet=args.quiet, resume_from=args.resume)
            if result.failed:
                print(f"run failed: {result.fail_reason}", file=sys.stderr)
                return 1
            step, mean, std = result.final_eval()
            print(f"final eval at step {step}: {mean:.3f} +- {std:.3f}")
            return 0
        if args.command == "compare":
            report = compare(load_config(args.config_a), load_config(args.config_b),
                             _parse_seeds(args.seeds), args.at_step, out_dir=args.out,
                             jobs=args.jobs, quiet=args.quiet)
            stm = report.steps_to_match
            print(f"base {report.base.mean:.3f} +- {report.base.std:.3f} | "
                  f"variant {report.variant.mean:.3f} +- {report.variant.std:.3f} | "
                  f"promotion {report.promotion_pct:.2f}% | steps-to-match {stm}")
            return 0
        if args.command == "eval":
            run = load_run(args.checkpoint)
            seed = args.seed if args.seed is not None else run.cfg.seed
            mean, std = evaluate(run.agent, run.eval_env, args.episodes, seed)
            print(f"eval over {args.episodes} episodes: {mean:.3f} +- {std:.3f}")
            return 0
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
