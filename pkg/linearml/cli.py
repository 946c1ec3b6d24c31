"""Command-line surface: train, predict, eval, tune, gen and bench.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional, Tuple

from linearml.benchmark import load_spec, run_benchmark
from linearml.config import get_results_db, setup_logging
from linearml.dataset import Task, format_real, generate_synthetic, load_libsvm, save_libsvm, split_dataset
from linearml.errors import ConfigInvalid, LinearizationError
from linearml.metrics import evaluate
from linearml.model_store import load_model, save_model
from linearml.multiclass import OvrModel, predict_ovr_many
from linearml.projection_core import ConsensusVariant
from linearml.results_store import ResultsStore
from linearml.training import TrainConfig, predict_many, train, tune_k

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_train_options(p: argparse.ArgumentParser) -> None:
    defaults = TrainConfig()
    p.add_argument('--inc', type=float, default=defaults.inc, help="Pseudo-label step.")
    p.add_argument('--eps', type=float, default=defaults.eps, help="Tolerance for the update rules.")
    p.add_argument('--max-iters', type=int, default=defaults.max_iters, help="Learn iteration cap.")
    p.add_argument('--ridge-lambda', type=float, default=defaults.ridge_lambda, help="Ridge penalty for fitting W.")
    p.add_argument('--seed', type=int, default=defaults.seed, help="Seed for every random draw.")
    p.add_argument('--consensus', choices=[v.value for v in ConsensusVariant], default=defaults.consensus_variant.value)
    p.add_argument('--keep-self', action='store_true', help="Let a training point be its own neighbor during Learn.")
    p.add_argument('--refit', action='store_true', help="Refit W on the learned pseudo-labels.")


def _config_from_args(args, k: int) -> TrainConfig:
    return TrainConfig(
        k=k,
        inc=args.inc,
        eps=args.eps,
        max_iters=args.max_iters,
        ridge_lambda=args.ridge_lambda,
        seed=args.seed,
        consensus_variant=ConsensusVariant(args.consensus),
        leave_self_out=not args.keep_self,
        refit_after_learn=args.refit,
    ).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='linearml', description="Linearization machine learning toolkit.")
    parser.add_argument('--log-level', default=None, help="DEBUG, INFO, WARNING or ERROR.")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('train', help="Train a model on a LIBSVM file.")
    p.add_argument('--data', required=True)
    p.add_argument('--task', choices=['reg', 'bin', 'ovr'], required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--out', required=True, help="Model file to write.")
    _add_train_options(p)

    p = sub.add_parser('predict', help="Write one prediction per line.")
    p.add_argument('--model', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)

    p = sub.add_parser('eval', help="Print accuracy metrics for a model on labelled data.")
    p.add_argument('--model', required=True)
    p.add_argument('--data', required=True)

    p = sub.add_parser('tune', help="Select k on a seeded validation split.")
    p.add_argument('--data', required=True)
    p.add_argument('--task', choices=['reg', 'bin', 'ovr'], default='bin')
    p.add_argument('--k-grid', required=True, help="Comma-separated candidates, e.g. 1,3,5,7.")
    p.add_argument('--val-fraction', type=float, default=0.25)
    _add_train_options(p)

    p = sub.add_parser('gen', help="Generate a synthetic sqrt/exp dataset.")
    p.add_argument('--fn', choices=['sqrt', 'exp'], required=True)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--range', required=True, help="lo:hi (use --range=-1:1 for negative bounds).")
    p.add_argument('--mode', choices=['reg', 'binmed'], required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)

    p = sub.add_parser('bench', help="Run a benchmark spec and print the report.")
    p.add_argument('--spec', required=True)
    p.add_argument('--out', default=None, help="Also write the JSON report here.")
    p.add_argument('--no-timings', action='store_true', help="Leave wall times out (byte-stable reports).")
    p.add_argument('--full', action='store_true', help="Disable desk-scale subsampling.")
    p.add_argument('--db', default=None, help="sqlite file that keeps a history of runs.")
    p.add_argument('--run-label', default='bench')
    return parser


def _parse_grid(text: str) -> List[int]:
    try:
        grid = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigInvalid(f"--k-grid must be comma-separated integers, got {text!r}")
    return grid


def _parse_range(text: str) -> Tuple[float, float]:
    low, sep, high = text.partition(':')
    try:
        if not sep:
            raise ValueError(text)
        return float(low), float(high)
    except ValueError:
        raise ConfigInvalid(f"--range must look like lo:hi, got {text!r}")


def cmd_train(args) -> int:
    dataset = load_libsvm(args.data, Task.parse(args.task))
    model = train(dataset, _config_from_args(args, args.k))
    save_model(model, args.out)
    return 0


def _predict(model, dataset) -> list:
    if isinstance(model, OvrModel):
        return predict_ovr_many(model, dataset)
    return predict_many(model, dataset)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    # labels are not needed for prediction, so read them raw
    dataset = load_libsvm(args.data, Task.REGRESSION)
    predictions = _predict(model, dataset)
    with open(args.out, 'w', encoding='utf-8') as f:
        for value in predictions:
            f.write(f"{format_real(value)}\n")
    logger.info(f"Wrote {len(predictions)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    if isinstance(model, OvrModel):
        dataset = load_libsvm(args.data, Task.MULTICLASS)
    elif model.task is Task.BINARY:
        dataset = load_libsvm(args.data, Task.BINARY, label_map=dict(model.label_map or ((0.0, 0), (1.0, 1))))
    else:
        dataset = load_libsvm(args.data, Task.REGRESSION)
    metrics = evaluate(_predict(model, dataset), list(dataset.targets()), dataset.task)
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def cmd_tune(args) -> int:
    if not 0.0 < args.val_fraction < 1.0:
        raise ConfigInvalid(f"--val-fraction must be strictly between 0 and 1, got {args.val_fraction}")
    dataset = load_libsvm(args.data, Task.parse(args.task))
    grid = _parse_grid(args.k_grid)
    cfg = _config_from_args(args, max(grid) if grid else 1)
    fit_set, val_set = split_dataset(dataset, 1.0 - args.val_fraction, args.seed)
    best = tune_k(fit_set, val_set, grid, cfg)
    print(best)
    return 0


def cmd_gen(args) -> int:
    dataset = generate_synthetic(args.fn, args.n, _parse_range(args.range), args.mode, args.seed)
    save_libsvm(dataset, args.out)
    return 0


def cmd_bench(args) -> int:
    spec = load_spec(args.spec)
    if args.full:
        spec = replace(spec, full=True)
    report = run_benchmark(spec)
    include_timings = not args.no_timings
    sys.stdout.write(report.to_text(include_timings))
    if args.out:
        with open(args.out, 'w', encoding='utf-8') as f:
            f.write(report.to_json(include_timings))
        logger.info(f"Wrote benchmark report to {args.out}")

    db_path = args.db or get_results_db()
    if db_path:
        store = ResultsStore(db_path)
        try:
            store.save_report(report, args.run_label)
        finally:
            store.close()
    return 0


COMMANDS = {
    'train': cmd_train,
    'predict': cmd_predict,
    'eval': cmd_eval,
    'tune': cmd_tune,
    'gen': cmd_gen,
    'bench': cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        setup_logging(args.log_level)
        return COMMANDS[args.command](args)
    except LinearizationError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
