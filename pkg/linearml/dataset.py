"""LIBSVM ingestion, synthetic function datasets and seeded splits."""

import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from linearml.errors import (
    ConfigInvalid,
    DatasetNotFound,
    IndexOutOfRange,
    InvalidLabel,
    InvalidRange,
    LabelArityMismatch,
    MalformedLine,
    NonAscendingIndex,
    NonFiniteValue,
)


logger = logging.getLogger(__name__)


class Task(Enum):
    REGRESSION = 'regression'
    BINARY = 'binary'
    MULTICLASS = 'multiclass'

    @classmethod
    def parse(cls, value: Union[str, 'Task']) -> 'Task':
        """Accept enum members, their values or the short CLI names"""
        if isinstance(value, Task):
            return value
        aliases = {'reg': cls.REGRESSION, 'bin': cls.BINARY, 'ovr': cls.MULTICLASS}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigInvalid(f"Unknown task: {value!r}")


class SyntheticFunction(Enum):
    SQRT = 'sqrt'
    EXP = 'exp'


class SyntheticMode(Enum):
    REGRESSION = 'reg'
    BINARIZED_AT_MEDIAN = 'binmed'


def _check_entries(entries: Sequence[Tuple[int, float]], line: Optional[int] = None) -> None:
    previous = 0
    for index, value in entries:
        if index < 1:
            raise MalformedLine(f"feature index must be >= 1, got {index}", line=line)
        if index <= previous:
            raise NonAscendingIndex(f"index {index} follows {previous}", line=line)
        if not math.isfinite(value):
            raise NonFiniteValue(f"feature {index} has non-finite value {value}", line=line)
        previous = index


@dataclass(frozen=True)
class SparseVector:
    """Sparse feature vector with 1-based, strictly ascending indices"""
    entries: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        _check_entries(self.entries)

    @classmethod
    def from_dict(cls, values: Dict[int, float]) -> 'SparseVector':
        return cls(tuple((int(i), float(values[i])) for i in sorted(values)))

    @property
    def max_index(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def to_dense(self, n_features: int) -> np.ndarray:
        row = np.zeros(n_features)
        for index, value in self.entries:
            if index > n_features:
                raise IndexOutOfRange(f"feature {index} exceeds dimension {n_features}")
            row[index - 1] = value
        return row

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class Example:
    features: SparseVector
    target: float


@dataclass(frozen=True)
class Dataset:
    examples: Tuple[Example, ...]
    n_features: int
    task: Task
    # original label -> mapped class, recorded for Binary data
    label_map: Optional[Tuple[Tuple[float, int], ...]] = None

    def __post_init__(self):
        for position, example in enumerate(self.examples):
            if example.features.max_index > self.n_features:
                raise IndexOutOfRange(
                    f"example {position} uses feature {example.features.max_index} "
                    f"beyond n_features={self.n_features}")
            if not math.isfinite(example.target):
                raise NonFiniteValue(f"example {position} has non-finite target")
            if self.task is Task.BINARY and example.target not in (0.0, 1.0):
                raise InvalidLabel(f"binary example {position} has target {example.target}")
            if self.task is Task.MULTICLASS and (example.target < 0 or not float(example.target).is_integer()):
                raise InvalidLabel(f"multiclass example {position} has target {example.target}")

    def __len__(self):
        return len(self.examples)

    @property
    def label_mapping(self) -> Dict[float, int]:
        return dict(self.label_map or ())

    def targets(self) -> np.ndarray:
        return np.array([e.target for e in self.examples], dtype=float)

    def to_matrix(self) -> np.ndarray:
        """Dense n x n_features design matrix (without the bias column)"""
        matrix = np.zeros((len(self.examples), self.n_features))
        for row, example in enumerate(self.examples):
            for index, value in example.features.entries:
                matrix[row, index - 1] = value
        return matrix

    def classes(self) -> List[int]:
        return sorted({int(e.target) for e in self.examples})

    def with_examples(self, examples: Iterable[Example]) -> 'Dataset':
        return Dataset(tuple(examples), self.n_features, self.task, self.label_map)


def _parse_real(token: str, what: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedLine(f"bad {what} {token!r}", line=line)
    if not math.isfinite(value):
        raise NonFiniteValue(f"non-finite {what} {token!r}", line=line)
    return value


def _parse_line(text: str, line: int) -> Tuple[float, SparseVector]:
    tokens = text.split()
    label = _parse_real(tokens[0], 'label', line)
    entries = []
    for token in tokens[1:]:
        index_text, sep, value_text = token.partition(':')
        if not sep:
            raise MalformedLine(f"bad token {token!r}", line=line)
        try:
            index = int(index_text)
        except ValueError:
            raise MalformedLine(f"bad feature index in {token!r}", line=line)
        entries.append((index, _parse_real(value_text, 'feature value', line)))
    _check_entries(entries, line=line)
    return label, SparseVector(tuple(entries))


def _binary_mapping(first_seen: Dict[float, int]) -> Dict[float, int]:
    labels = sorted(first_seen)
    if len(labels) > 2:
        third = sorted(first_seen.items(), key=lambda item: item[1])[2]
        raise LabelArityMismatch(
            f"binary task needs at most 2 distinct labels, found {len(labels)}", line=third[1])
    if len(labels) == 2:
        return {labels[0]: 0, labels[1]: 1}
    if len(labels) == 1:
        return {labels[0]: 0 if labels[0] <= 0 else 1}
    return {}


def parse_libsvm(text: Union[str, TextIO], task: Union[Task, str],
                 label_map: Optional[Dict[float, int]] = None) -> Dataset:
    """Parse LIBSVM text into a Dataset.

    Args:
        text: the whole file as a string, or an open text stream
        task: how labels are interpreted
        label_map: fixed Binary label mapping, e.g. the one recorded by a trained model

    Returns:
        Dataset with examples in file order and n_features = largest index seen
    """
    task = Task.parse(task)
    lines = text.splitlines() if isinstance(text, str) else text

    raw_labels: List[Tuple[float, int]] = []
    vectors: List[SparseVector] = []
    first_seen: Dict[float, int] = {}
    n_features = 0
    for line_no, raw in enumerate(lines, start=1):
        content = raw.split('#', 1)[0].strip()
        if not content:
            continue
        label, vector = _parse_line(content, line_no)
        raw_labels.append((label, line_no))
        vectors.append(vector)
        first_seen.setdefault(label, line_no)
        n_features = max(n_features, vector.max_index)

    mapping = None
    if task is Task.BINARY:
        if label_map is not None:
            mapping = {float(k): int(v) for k, v in label_map.items()}
            for label, line_no in raw_labels:
                if label not in mapping:
                    raise LabelArityMismatch(f"label {label} not in the model's label mapping", line=line_no)
        else:
            mapping = _binary_mapping(first_seen)
        targets = [float(mapping[label]) for label, _ in raw_labels]
    elif task is Task.MULTICLASS:
        for label, line_no in raw_labels:
            if label < 0 or not label.is_integer():
                raise InvalidLabel(f"multiclass labels must be non-negative integers, got {label}", line=line_no)
        targets = [float(label) for label, _ in raw_labels]
    else:
        targets = [label for label, _ in raw_labels]

    examples = tuple(Example(v, t) for v, t in zip(vectors, targets))
    recorded = tuple(sorted(mapping.items())) if mapping is not None else None
    logger.debug(f"Parsed {len(examples)} examples with {n_features} features ({task.value})")
    return Dataset(examples, n_features, task, recorded)


def load_libsvm(path: str, task: Union[Task, str], label_map: Optional[Dict[float, int]] = None) -> Dataset:
    """Read a LIBSVM file from disk"""
    if not os.path.isfile(path):
        raise DatasetNotFound(f"No such dataset file: {path}")
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        line = raw.count(b'\n', 0, e.start) + 1
        logger.error(f"{path} is not UTF-8 text: {str(e)}")
        raise MalformedLine(f"byte {raw[e.start]:#04x} is not valid UTF-8", line=line)
    dataset = parse_libsvm(text, task, label_map=label_map)
    logger.info(f"Loaded {len(dataset)} examples, {dataset.n_features} features from {path}")
    return dataset


def format_real(value: float) -> str:
    """Shortest text that parses back to exactly the same float"""
    value = float(value)
    if value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def write_libsvm(dataset: Dataset) -> str:
    lines = []
    for example in dataset.examples:
        tokens = [format_real(example.target)]
        tokens.extend(f"{index}:{format_real(value)}" for index, value in example.features.entries)
        lines.append(' '.join(tokens))
    return '\n'.join(lines) + ('\n' if lines else '')


def save_libsvm(dataset: Dataset, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(write_libsvm(dataset))
    logger.info(f"Wrote {len(dataset)} examples to {path}")


def _rounded_count(fraction: float, n: int) -> int:
    # half-up rounding so 0.5 * 7 gives 4 on every platform
    return int(math.floor(fraction * n + 0.5))


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut into (train, test)"""
    if not 0.0 <= train_fraction <= 1.0:
        raise ConfigInvalid(f"train_fraction must lie in [0, 1], got {train_fraction}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = _rounded_count(train_fraction, n)
    train = dataset.with_examples(dataset.examples[i] for i in order[:n_train])
    test = dataset.with_examples(dataset.examples[i] for i in order[n_train:])
    return train, test


def subsample(dataset: Dataset, max_rows: int, seed: int) -> Dataset:
    """Seeded subset without replacement, keeping file order"""
    if max_rows < 0:
        raise ConfigInvalid(f"max_rows must be non-negative, got {max_rows}")
    if len(dataset) <= max_rows:
        return dataset
    chosen = np.sort(np.random.default_rng(seed).choice(len(dataset), size=max_rows, replace=False))
    logger.info(f"Subsampled {max_rows} of {len(dataset)} examples (seed={seed})")
    return dataset.with_examples(dataset.examples[i] for i in chosen)


def relabel_one_vs_rest(dataset: Dataset, cls: int) -> Dataset:
    examples = tuple(Example(e.features, 1.0 if e.target == cls else 0.0) for e in dataset.examples)
    return Dataset(examples, dataset.n_features, Task.BINARY, ((0.0, 0), (1.0, 1)))


_FUNCTIONS = {
    SyntheticFunction.SQRT: np.sqrt,
    SyntheticFunction.EXP: np.exp,
}


def generate_synthetic(kind: Union[SyntheticFunction, str], n: int, x_range: Tuple[float, float],
                       mode: Union[SyntheticMode, str], seed: int) -> Dataset:
    """Sample x uniformly from x_range and tabulate f(x) as a one-feature dataset"""
    kind = SyntheticFunction(kind)
    mode = SyntheticMode(mode)
    low, high = float(x_range[0]), float(x_range[1])
    if n < 0:
        raise ConfigInvalid(f"n must be non-negative, got {n}")
    if not (math.isfinite(low) and math.isfinite(high)) or low >= high:
        raise InvalidRange(f"empty or non-finite range [{low}, {high}]")
    if kind is SyntheticFunction.SQRT and low < 0:
        raise InvalidRange(f"sqrt needs a non-negative range, got lower bound {low}")
    fn = _FUNCTIONS[kind]
    with np.errstate(over='ignore'):
        ends = fn(np.array([low, high]))
    if not np.all(np.isfinite(ends)):
        raise InvalidRange(f"{kind.value} overflows on [{low}, {high}]")

    xs = np.random.default_rng(seed).uniform(low, high, size=n)
    values = [float(v) for v in fn(xs)]

    if mode is SyntheticMode.REGRESSION:
        targets = values
        task, label_map = Task.REGRESSION, None
    else:
        median = float(np.median(values)) if values else 0.0
        targets = [1.0 if v > median else 0.0 for v in values]
        task, label_map = Task.BINARY, ((0.0, 0), (1.0, 1))

    examples = tuple(Example(SparseVector(((1, float(x)),)), t) for x, t in zip(xs, targets))
    logger.info(f"Generated {n} {kind.value} examples on [{low}, {high}] ({mode.value}, seed={seed})")
    return Dataset(examples, 1 if n else 0, task, label_map)
