"""Benchmark harness: split, train, evaluate and tabulate accuracies per dataset and algorithm."""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from linearml.baselines import knn_baseline_predict_many, logistic_predict, logistic_train
from linearml.config import get_data_dir
from linearml.dataset import (
    Dataset,
    Task,
    generate_synthetic,
    load_libsvm,
    split_dataset,
    subsample,
)
from linearml.errors import ConfigInvalid, DatasetNotFound, LinearizationError
from linearml.metrics import Metrics, evaluate
from linearml.multiclass import predict_ovr_many
from linearml.training import TrainConfig, predict_many, train, tune_k
from linearml.utils import accuracy_delta, format_seconds, timed

logger = logging.getLogger(__name__)

ALGORITHMS = ('linearization', 'logistic', 'knn_baseline')
DEFAULT_TRAIN_FRACTION = 0.64
DEFAULT_SEEDS = 5
DESK_SCALE_ROWS = {'cod-rna': 20000}

# Published accuracies (correct, total) per dataset and algorithm, reported next to ours
PUBLISHED = {
    'breast-cancer': {'mlp': (238, 248), 'logistic': (213, 248), 'linearization': (241, 248)},
    'a1a': {'mlp': (459, 582), 'logistic': (436, 582), 'linearization': (425, 582)},
    'sqrt': {'mlp': (2560, 3507), 'logistic': (1999, 3507), 'linearization': (3147, 3507)},
    'exp': {'mlp': (3087, 4010), 'logistic': (3087, 4010), 'linearization': (3107, 4010)},
    'cod-rna': {'mlp': (19463, 20929), 'logistic': (13813, 20929), 'linearization': (17790, 20929)},
}


@dataclass(frozen=True)
class DatasetEntry:
    id: str
    task: Task
    path: Optional[str] = None
    synthetic: Optional[Dict[str, Any]] = None
    train_fraction: Optional[float] = None
    max_rows: Optional[int] = None
    published_id: Optional[str] = None


@dataclass(frozen=True)
class BenchmarkSpec:
    datasets: Tuple[DatasetEntry, ...] = ()
    algorithms: Tuple[str, ...] = ('linearization',)
    seeds: Tuple[int, ...] = tuple(range(DEFAULT_SEEDS))
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    k_grid: Tuple[int, ...] = ()
    val_fraction: float = 0.25
    train: TrainConfig = TrainConfig()
    logistic: Dict[str, Any] = field(default_factory=lambda: {'lr': 0.1, 'iters': 1000, 'l2': 0.0})
    knn_k: int = 5
    full: bool = False
    base_dir: str = '.'


@dataclass(frozen=True)
class BenchRow:
    dataset_id: str
    algorithm: str
    seed: int
    split: str
    metrics: Metrics
    wall_time: float
    k: Optional[int] = None


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    published: Dict[str, Dict[str, Tuple[int, int]]] = field(default_factory=dict)

    def to_frame(self, include_timings: bool = True) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record = {
                'dataset': row.dataset_id,
                'algorithm': row.algorithm,
                'seed': row.seed,
                'split': row.split,
                'k': row.k,
                'n': row.metrics.n,
                'correct': row.metrics.correct,
                'accuracy': row.metrics.accuracy,
                'cell': row.metrics.cell(),
                'rmse': row.metrics.rmse,
            }
            if include_timings:
                record['wall_time'] = row.wall_time
            records.append(record)
        columns = ['dataset', 'algorithm', 'seed', 'split', 'k', 'n', 'correct', 'accuracy', 'cell', 'rmse']
        if include_timings:
            columns.append('wall_time')
        return pd.DataFrame(records, columns=columns)

    def summary(self) -> pd.DataFrame:
        """Mean / min / max accuracy per (dataset, algorithm) over seeds, in spec order"""
        frame = self.to_frame(include_timings=False)
        if frame.empty:
            return pd.DataFrame(columns=['dataset', 'algorithm', 'seeds', 'mean', 'min', 'max', 'published', 'delta_pp'])
        summary = (frame.groupby(['dataset', 'algorithm'], sort=False)['accuracy']
                   .agg(seeds='count', mean='mean', min='min', max='max')
                   .reset_index())
        published, deltas = [], []
        for _, record in summary.iterrows():
            quoted = self.published.get(record['dataset'], {}).get(record['algorithm'])
            if quoted:
                correct, total = quoted
                published.append(f"{round(100 * correct / total)}% ({correct}/{total}) (quoted)")
                deltas.append(accuracy_delta(record['mean'], correct / total))
            else:
                published.append('')
                deltas.append(None)
        summary['published'] = published
        summary['delta_pp'] = deltas
        return summary

    def to_json(self, include_timings: bool = True) -> str:
        rows = []
        for row in self.rows:
            record = {
                'dataset': row.dataset_id,
                'algorithm': row.algorithm,
                'seed': row.seed,
                'split': row.split,
                'k': row.k,
                'metrics': row.metrics.to_dict(),
            }
            if include_timings:
                record['wall_time'] = row.wall_time
            rows.append(record)
        summary = [
            {
                'dataset': record['dataset'],
                'algorithm': record['algorithm'],
                'seeds': int(record['seeds']),
                'mean': float(record['mean']),
                'min': float(record['min']),
                'max': float(record['max']),
                'published': record['published'] or None,
                'delta_pp': None if pd.isna(record['delta_pp']) else float(record['delta_pp']),
            }
            for record in self.summary().to_dict(orient='records')
        ]
        document = {
            'rows': rows,
            'summary': summary,
            'published': {k: {a: list(v) for a, v in algos.items()} for k, algos in self.published.items()},
        }
        return json.dumps(document, indent=2) + '\n'

    def to_text(self, include_timings: bool = True) -> str:
        if not self.rows:
            return 'No benchmark rows.\n'
        rows = self.to_frame(include_timings).drop(columns=['rmse'] if self._all_classification() else [])
        return (rows.to_string(index=False, float_format=lambda v: f"{v:.4f}")
                + '\n\n'
                + self.summary().to_string(index=False, float_format=lambda v: f"{v:.4f}")
                + '\n')

    def _all_classification(self) -> bool:
        return all(row.metrics.rmse is None for row in self.rows)


def _entry_from_dict(raw: Dict[str, Any]) -> DatasetEntry:
    if not isinstance(raw, dict) or 'id' not in raw:
        raise ConfigInvalid(f"dataset entry needs an 'id': {raw!r}")
    if ('path' in raw) == ('synthetic' in raw):
        raise ConfigInvalid(f"dataset '{raw['id']}' needs exactly one of 'path' or 'synthetic'")
    synthetic = raw.get('synthetic')
    task = raw.get('task')
    if task is None:
        task = 'reg' if synthetic and synthetic.get('mode') == 'reg' else 'bin'
    return DatasetEntry(
        id=str(raw['id']),
        task=Task.parse(task),
        path=raw.get('path'),
        synthetic=synthetic,
        train_fraction=raw.get('train_fraction'),
        max_rows=raw.get('max_rows'),
        published_id=raw.get('published_id'),
    )


def spec_from_dict(raw: Dict[str, Any], base_dir: str = '.') -> BenchmarkSpec:
    """Validate a benchmark config document"""
    if not isinstance(raw, dict):
        raise ConfigInvalid("benchmark spec must be a JSON object")
    algorithms = tuple(raw.get('algorithms', ('linearization',)))
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise ConfigInvalid(f"Unknown algorithms: {', '.join(unknown)}")
    if 'seeds' in raw:
        seeds = tuple(int(s) for s in raw['seeds'])
    else:
        seeds = tuple(range(int(raw.get('n_seeds', DEFAULT_SEEDS))))
    logistic = {'lr': 0.1, 'iters': 1000, 'l2': 0.0}
    logistic.update(raw.get('logistic', {}))
    try:
        return BenchmarkSpec(
            datasets=tuple(_entry_from_dict(d) for d in raw.get('datasets', [])),
            algorithms=algorithms,
            seeds=seeds,
            train_fraction=float(raw.get('train_fraction', DEFAULT_TRAIN_FRACTION)),
            k_grid=tuple(int(k) for k in raw.get('k_grid', ())),
            val_fraction=float(raw.get('val_fraction', 0.25)),
            train=TrainConfig.from_dict(raw.get('train', {})),
            logistic=logistic,
            knn_k=int(raw.get('knn_k', 5)),
            full=bool(raw.get('full', False)),
            base_dir=base_dir,
        )
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"Invalid benchmark spec: {e}")


def load_spec(path: str) -> BenchmarkSpec:
    if not os.path.isfile(path):
        raise ConfigInvalid(f"No such benchmark spec: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"Benchmark spec {path} is not valid JSON: {e}")
    return spec_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def _dataset_path(entry: DatasetEntry, spec: BenchmarkSpec) -> str:
    """Relative paths are tried against the spec's directory, then by file name in LINEARML_DATA_DIR"""
    if os.path.isabs(entry.path):
        candidates = [entry.path]
    else:
        candidates = [os.path.join(spec.base_dir, entry.path)]
        data_dir = get_data_dir()
        if data_dir:
            candidates.append(os.path.join(data_dir, os.path.basename(entry.path)))
    for candidate in candidates:
        if os.path.isfile(candidate):
            return candidate
    raise DatasetNotFound(f"dataset '{entry.id}' not found at {' or '.join(candidates)}")


def _resolve_dataset(entry: DatasetEntry, spec: BenchmarkSpec, seed: int) -> Dataset:
    if entry.synthetic is not None:
        params = entry.synthetic
        try:
            low, high = params.get('range', (0.0, 100.0))
            dataset = generate_synthetic(params['fn'], int(params.get('n', 1000)), (low, high),
                                         params.get('mode', 'binmed'), int(params.get('seed', seed)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"dataset '{entry.id}' has a bad synthetic spec: {e}")
    else:
        dataset = load_libsvm(_dataset_path(entry, spec), entry.task)

    max_rows = entry.max_rows
    if max_rows is None and not spec.full:
        max_rows = DESK_SCALE_ROWS.get(entry.id)
    if max_rows is not None and not spec.full:
        dataset = subsample(dataset, int(max_rows), seed)
    return dataset


@timed
def _run_linearization(train_set: Dataset, test_set: Dataset, spec: BenchmarkSpec, seed: int):
    cfg = replace(spec.train, seed=seed)
    if spec.k_grid:
        fit_set, val_set = split_dataset(train_set, 1.0 - spec.val_fraction, seed)
        cfg = replace(cfg, k=tune_k(fit_set, val_set, spec.k_grid, cfg))
    model = train(train_set, cfg)
    if train_set.task is Task.MULTICLASS:
        return predict_ovr_many(model, test_set), cfg.k
    return predict_many(model, test_set), cfg.k


@timed
def _run_logistic(train_set: Dataset, test_set: Dataset, spec: BenchmarkSpec, seed: int):
    model = logistic_train(train_set, seed=seed, **spec.logistic)
    return [logistic_predict(model, e.features) for e in test_set.examples], None


@timed
def _run_knn(train_set: Dataset, test_set: Dataset, spec: BenchmarkSpec, seed: int):
    return knn_baseline_predict_many(train_set, [e.features for e in test_set.examples], spec.knn_k), spec.knn_k


RUNNERS = {
    'linearization': _run_linearization,
    'logistic': _run_logistic,
    'knn_baseline': _run_knn,
}


def run_benchmark(spec: BenchmarkSpec) -> BenchReport:
    """One row per (dataset, algorithm, seed), in spec order"""
    report = BenchReport()
    for entry in spec.datasets:
        published_id = entry.published_id or entry.id
        if published_id in PUBLISHED:
            report.published[entry.id] = PUBLISHED[published_id]
        fraction = entry.train_fraction if entry.train_fraction is not None else spec.train_fraction
        split_label = f"{fraction:g}/{1 - fraction:g}"

        for algorithm in spec.algorithms:
            if algorithm != 'linearization' and entry.task is not Task.BINARY:
                logger.warning(f"Skipping {algorithm} on '{entry.id}': it only handles binary tasks")
                continue
            for seed in spec.seeds:
                dataset = _resolve_dataset(entry, spec, seed)
                train_set, test_set = split_dataset(dataset, fraction, seed)
                logger.info(f"Running {algorithm} on '{entry.id}' seed={seed} "
                            f"({len(train_set)} train / {len(test_set)} test)")
                try:
                    (predictions, k), elapsed = RUNNERS[algorithm](train_set, test_set, spec, seed)
                except LinearizationError as e:
                    logger.error(f"{algorithm} failed on '{entry.id}' seed={seed}: {str(e)}")
                    raise
                metrics = evaluate(predictions, list(test_set.targets()), entry.task)
                report.rows.append(BenchRow(entry.id, algorithm, seed, split_label, metrics, elapsed, k))
                logger.info(f"{entry.id} / {algorithm} / seed {seed}: {metrics.cell()} in {format_seconds(elapsed)}")
    return report
