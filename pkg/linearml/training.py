"""Fitting the projection and the regression / binary classification algorithms."""

import logging
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from linearml.config import get_eps_div
from linearml.dataset import Dataset, SparseVector, Task
from linearml.errors import (
    ConfigInvalid,
    EmptyGrid,
    EmptyInput,
    InvalidLabel,
    KTooLarge,
    LengthMismatch,
    SingularSystem,
)
from linearml.metrics import evaluate
from linearml.projection_core import (
    ConsensusVariant,
    NeighborIndex,
    Projection,
    build_index,
    consensus,
    consensus_many,
    k_nearest,
    neighbor_table,
    project,
    project_all,
)

logger = logging.getLogger(__name__)

RNG_NAME = 'numpy.PCG64'
INIT_MARGIN = 1e-3
CHANGE_TOLERANCE = 1e-12
SINGLE_CLASS_LABEL = {0: 0.25, 1: 0.75}


@dataclass(frozen=True)
class TrainConfig:
    k: int = 5
    inc: float = 0.05
    eps: float = 1e-3
    max_iters: int = 100
    ridge_lambda: float = 1e-6
    seed: int = 0
    consensus_variant: ConsensusVariant = ConsensusVariant.MEAN
    leave_self_out: bool = True
    refit_after_learn: bool = False
    # None means LINEARML_EPS_DIV; training records the resolved value
    eps_div: Optional[float] = None

    def validate(self) -> 'TrainConfig':
        if self.k < 1:
            raise ConfigInvalid(f"k must be at least 1, got {self.k}")
        if not 0 < self.inc < 0.5:
            raise ConfigInvalid(f"inc must lie in (0, 0.5), got {self.inc}")
        if self.eps <= 0:
            raise ConfigInvalid(f"eps must be positive, got {self.eps}")
        if self.max_iters < 1:
            raise ConfigInvalid(f"max_iters must be at least 1, got {self.max_iters}")
        if self.ridge_lambda < 0:
            raise ConfigInvalid(f"ridge_lambda must be non-negative, got {self.ridge_lambda}")
        if self.eps_div is not None and not (np.isfinite(self.eps_div) and self.eps_div > 0):
            raise ConfigInvalid(f"eps_div must be a positive finite number, got {self.eps_div}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['consensus_variant'] = self.consensus_variant.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"Unknown training options: {', '.join(sorted(unknown))}")
        values = dict(data)
        if 'consensus_variant' in values:
            try:
                values['consensus_variant'] = ConsensusVariant(values['consensus_variant'])
            except ValueError:
                raise ConfigInvalid(f"Unknown consensus variant: {values['consensus_variant']!r}")
        return cls(**values).validate()

    def resolved(self) -> 'TrainConfig':
        """Copy with eps_div pinned to the current environment setting if unset"""
        if self.eps_div is not None:
            return self
        return replace(self, eps_div=get_eps_div())


@dataclass(frozen=True)
class PseudoLabelState:
    p: Tuple[float, ...]
    classes: Tuple[int, ...]

    def in_class_range(self) -> bool:
        """c=0 => p in (0, 0.5) and c=1 => p in (0.5, 1]"""
        return all((0.0 < p < 0.5) if c == 0 else (0.5 < p <= 1.0) for p, c in zip(self.p, self.classes))


@dataclass(frozen=True)
class Model:
    projection: Projection
    index: NeighborIndex
    k: int
    task: Task
    config: TrainConfig
    label_map: Optional[Tuple[Tuple[float, int], ...]] = None
    converged: bool = True
    iterations: int = 0
    rng: str = RNG_NAME

    def __post_init__(self):
        if len(self.index) < self.k:
            raise KTooLarge(f"index holds {len(self.index)} points, fewer than k={self.k}")

    @property
    def dimension(self) -> int:
        return self.projection.dimension


def fit_projection(d: Dataset, targets: Sequence[float], ridge_lambda: float) -> Projection:
    """Ridge least squares via the normal equations; the bias is not penalised"""
    if len(targets) != len(d):
        raise LengthMismatch(f"{len(d)} examples but {len(targets)} targets")
    if len(d) == 0:
        raise EmptyInput("cannot fit a projection on an empty dataset")
    if ridge_lambda < 0:
        raise ConfigInvalid(f"ridge_lambda must be non-negative, got {ridge_lambda}")

    design = np.hstack([np.ones((len(d), 1)), d.to_matrix()])
    y = np.asarray(targets, dtype=float)
    penalty = ridge_lambda * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    normal = design.T @ design + penalty
    rhs = design.T @ y

    if ridge_lambda == 0 and np.linalg.matrix_rank(normal) < normal.shape[0]:
        raise SingularSystem("normal matrix is rank deficient; use ridge_lambda > 0")
    try:
        w = np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as e:
        logger.error(f"Normal equations could not be solved: {str(e)}")
        raise SingularSystem(f"normal equations could not be solved: {e}")
    if not np.all(np.isfinite(w)):
        raise SingularSystem("normal equations produced non-finite weights")

    return Projection(float(w[0]), tuple(float(v) for v in w[1:]))


def init_pseudo_labels(classes: Sequence[int], seed: int) -> PseudoLabelState:
    """Random p_i inside the class range, kept INIT_MARGIN away from its ends"""
    if len(classes) == 0:
        raise EmptyInput("cannot initialise pseudo-labels for no points")
    labels = np.asarray(classes, dtype=int)
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidLabel("pseudo-labels need classes in {0, 1}")
    width = 0.5 - 2 * INIT_MARGIN
    u = np.random.default_rng(seed).uniform(size=len(labels))
    p = np.where(labels == 0, INIT_MARGIN + u * width, 0.5 + INIT_MARGIN + u * width)
    return PseudoLabelState(tuple(float(v) for v in p), tuple(int(c) for c in labels))


def _required_points(cfg: TrainConfig) -> int:
    return cfg.k + 1 if cfg.leave_self_out else cfg.k


def _step(projections: np.ndarray, table: np.ndarray, p: np.ndarray, classes: np.ndarray,
          cfg: TrainConfig, eps_div: float) -> Tuple[np.ndarray, int]:
    # every q_i reads the previous p only
    q = consensus_many(projections, projections[table], p[table], cfg.consensus_variant, eps_div)
    diff = q - p
    zero = classes == 0
    one = ~zero
    inc = cfg.inc

    settled = np.abs(diff) <= cfg.eps
    assign = (zero & (q > 0.0) & (q < 0.5)) | (one & (q > 0.5) & (q <= 1.0))
    up = (diff > cfg.eps) & ((zero & (p + inc < 0.5)) | (one & (p + inc <= 1.0)))
    down = (-diff > cfg.eps) & ((zero & (p - inc > 0.0)) | (one & (p - inc > 0.5)))

    updated = np.select([settled, assign, up, down], [p, q, p + inc, p - inc], default=p)
    changed = int(np.count_nonzero(np.abs(updated - p) > CHANGE_TOLERANCE))
    return updated, changed


def _check_learn_inputs(projections: Sequence[float], state: PseudoLabelState, cfg: TrainConfig) -> None:
    cfg.validate()
    if len(projections) != len(state.p) or len(state.p) != len(state.classes):
        raise LengthMismatch(f"{len(projections)} projections for {len(state.p)} pseudo-labels")
    if len(state.p) < _required_points(cfg):
        raise KTooLarge(f"k={cfg.k} needs at least {_required_points(cfg)} training points, got {len(state.p)}")


def learn_step(projections: Sequence[float], state: PseudoLabelState,
               cfg: TrainConfig) -> Tuple[PseudoLabelState, int]:
    """One synchronous pass of the pseudo-label update rules"""
    _check_learn_inputs(projections, state, cfg)
    values = np.asarray(projections, dtype=float)
    table = neighbor_table(values, cfg.k, cfg.leave_self_out)
    updated, changed = _step(values, table, np.asarray(state.p, dtype=float),
                             np.asarray(state.classes, dtype=int), cfg, cfg.resolved().eps_div)
    if changed == 0:
        return state, 0
    return PseudoLabelState(tuple(float(v) for v in updated), state.classes), changed


def learn(projections: Sequence[float], state: PseudoLabelState,
          cfg: TrainConfig) -> Tuple[PseudoLabelState, bool, int]:
    """Repeat learn_step until no pseudo-label moves or max_iters is reached.

    Returns:
        (final state, converged, iterations run)
    """
    _check_learn_inputs(projections, state, cfg)
    values = np.asarray(projections, dtype=float)
    # projections stay fixed during Learn, so the neighbor sets do too
    table = neighbor_table(values, cfg.k, cfg.leave_self_out)
    classes = np.asarray(state.classes, dtype=int)
    eps_div = cfg.resolved().eps_div

    p = np.asarray(state.p, dtype=float)
    for iteration in range(1, cfg.max_iters + 1):
        updated, changed = _step(values, table, p, classes, cfg, eps_div)
        logger.debug(f"Learn iteration {iteration}: {changed} pseudo-labels changed")
        if changed == 0:
            logger.info(f"Learn converged after {iteration} iterations")
            return PseudoLabelState(tuple(float(v) for v in p), state.classes), True, iteration
        p = updated

    logger.warning(f"Learn stopped at max_iters={cfg.max_iters} without converging")
    return PseudoLabelState(tuple(float(v) for v in p), state.classes), False, cfg.max_iters


def train_regression(d: Dataset, cfg: TrainConfig) -> Model:
    cfg = cfg.validate().resolved()
    if d.task is not Task.REGRESSION:
        raise ConfigInvalid(f"train_regression needs a regression dataset, got {d.task.value}")
    if len(d) < cfg.k:
        raise KTooLarge(f"k={cfg.k} exceeds the {len(d)} training examples")

    targets = d.targets()
    projection = fit_projection(d, targets, cfg.ridge_lambda)
    index = build_index(project_all(projection, d), targets)
    logger.info(f"Trained regression model on {len(d)} examples (k={cfg.k})")
    return Model(projection, index, cfg.k, Task.REGRESSION, cfg)


def train_binary(d: Dataset, cfg: TrainConfig) -> Model:
    cfg = cfg.validate().resolved()
    if d.task is not Task.BINARY:
        raise ConfigInvalid(f"train_binary needs a binary dataset, got {d.task.value}")
    if len(d) < _required_points(cfg):
        raise KTooLarge(f"k={cfg.k} needs at least {_required_points(cfg)} training examples, got {len(d)}")

    classes = [int(t) for t in d.targets()]
    state = init_pseudo_labels(classes, cfg.seed)
    if len(set(classes)) == 1:
        # single class: a constant pseudo-label makes W fit a constant, so every consensus is that value
        midpoint = SINGLE_CLASS_LABEL[classes[0]]
        logger.info(f"Training data holds only class {classes[0]}; using constant pseudo-label {midpoint}")
        state = PseudoLabelState((midpoint,) * len(classes), state.classes)
    projection = fit_projection(d, state.p, cfg.ridge_lambda)
    projected = project_all(projection, d)
    final, converged, iterations = learn(projected, state, cfg)

    if cfg.refit_after_learn:
        projection = fit_projection(d, final.p, cfg.ridge_lambda)
        projected = project_all(projection, d)

    index = build_index(projected, final.p)
    logger.info(f"Trained binary model on {len(d)} examples "
                f"(k={cfg.k}, converged={converged}, iterations={iterations})")
    return Model(projection, index, cfg.k, Task.BINARY, cfg, d.label_map, converged, iterations)


def train(d: Dataset, cfg: TrainConfig):
    """Dispatch on the dataset task"""
    if d.task is Task.REGRESSION:
        return train_regression(d, cfg)
    if d.task is Task.BINARY:
        return train_binary(d, cfg)
    from linearml.multiclass import train_ovr
    return train_ovr(d, cfg)


def predict_score(m: Model, x: SparseVector) -> float:
    """Raw consensus value for x; test points are never in the index"""
    query = project(m.projection, x)
    return consensus(query, k_nearest(m.index, query, m.k), m.config.consensus_variant, m.config.eps_div)


def predict(m: Model, x: SparseVector) -> Union[float, int]:
    score = predict_score(m, x)
    if m.task is Task.REGRESSION:
        return score
    return 1 if score > 0.5 else 0


def predict_many(m: Model, d: Dataset) -> List[Union[float, int]]:
    return [predict(m, e.features) for e in d.examples]


def _validation_score(model, val: Dataset) -> float:
    if val.task is Task.MULTICLASS:
        from linearml.multiclass import predict_ovr_many
        predictions = predict_ovr_many(model, val)
    else:
        predictions = predict_many(model, val)
    metrics = evaluate(predictions, list(val.targets()), val.task)
    if val.task is Task.REGRESSION:
        return -metrics.rmse
    return metrics.accuracy


def tune_k(train_set: Dataset, val: Dataset, grid: Sequence[int], cfg: TrainConfig) -> int:
    """Pick k by validation score; ties go to the smallest k"""
    if not grid:
        raise EmptyGrid("k grid is empty")
    best_k, best_score = None, None
    for k in sorted(set(int(k) for k in grid)):
        model = train(train_set, replace(cfg, k=k))
        score = _validation_score(model, val)
        logger.info(f"k={k}: validation score {score:.6f}")
        if best_score is None or score > best_score:
            best_k, best_score = k, score
    logger.info(f"Selected k={best_k} (score {best_score:.6f})")
    return best_k
