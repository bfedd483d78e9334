"""Command-line entry point: generate, train, evaluate, analyze.

Thread pinning must happen before numpy loads its BLAS, so this module
imports nothing numeric at module level; the worker modules are imported
inside main() after the environment is set. `SEQDUCT_THREADS` (or
--threads) caps BLAS/OpenMP thread counts; reproducibility claims hold
at 1 thread.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, DataError, DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4

THREADS_ENV_VAR = "SEQDUCT_THREADS"

_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_limit(threads: int | None) -> None:
    if threads is None:
        value = os.environ.get(THREADS_ENV_VAR)
        if value is None:
            return
        try:
            threads = int(value)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {value!r}") from None
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqduct",
        description="Train and probe small encoder-decoder models on "
                    "deterministic string transduction tasks.",
    )
    from . import __version__
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"cap BLAS/OpenMP threads (also {THREADS_ENV_VAR})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate the four dataset splits for a task")
    p_gen.add_argument("--task", required=True,
                       help="identity, reversal, total_reduplication, quadratic_copy, "
                            "kcopy:K, sort_ascending, sort_descending")
    p_gen.add_argument("--preset", required=True, help="experiment preset name")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True, help="output directory")

    p_train = sub.add_parser("train", help="run a training experiment from a JSON config")
    p_train.add_argument("--config", required=True, help="experiment config file")

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on dataset splits")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.add_argument("--splits", default="test,gen",
                        help="comma-separated split names (default test,gen)")
    p_eval.add_argument("--out", required=True, help="output CSV path")
    p_eval.add_argument("--probe", default=None,
                        help="replace targets with this task applied to the inputs, "
                             "e.g. kcopy:3")
    p_eval.add_argument("--run", type=int, default=None,
                        help="run index for the CSV (default: from the checkpoint)")

    p_an = sub.add_parser("analyze", help="summarize result CSVs into a table")
    p_an.add_argument("csvs", nargs="+", help="metric CSV files")
    p_an.add_argument("--out", default=None, help="also write the summary here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_limit(args.threads)
        from . import experiment

        if args.command == "generate":
            written = experiment.run_generate(args.task, args.preset, args.seed, args.out)
            for path in written:
                print(path)
        elif args.command == "train":
            config = experiment.load_experiment_config(args.config)
            manifest_path = experiment.run_train_experiment(config)
            print(manifest_path)
        elif args.command == "evaluate":
            split_names = [s for s in args.splits.split(",") if s]
            if not split_names:
                raise ConfigError("--splits must name at least one split")
            experiment.run_evaluate(args.checkpoint, args.data, split_names,
                                    args.out, probe_name=args.probe,
                                    run_index=args.run)
            print(args.out)
        elif args.command == "analyze":
            print(experiment.run_analyze(args.csvs, args.out), end="")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
