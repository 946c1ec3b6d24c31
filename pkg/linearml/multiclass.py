"""One-against-all reduction onto the binary trainer."""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

from linearml.dataset import Dataset, SparseVector, Task, relabel_one_vs_rest
from linearml.errors import ConfigInvalid, EmptyInput, LengthMismatch
from linearml.training import Model, TrainConfig, predict_score, train_binary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OvrModel:
    classes: Tuple[int, ...]
    models: Tuple[Model, ...]

    def __post_init__(self):
        if len(self.classes) != len(self.models):
            raise LengthMismatch(f"{len(self.classes)} classes but {len(self.models)} models")
        if len({m.dimension for m in self.models}) > 1:
            raise LengthMismatch("per-class models disagree on the feature dimension")

    @property
    def dimension(self) -> int:
        return self.models[0].dimension if self.models else 0


def train_ovr(d: Dataset, cfg: TrainConfig) -> OvrModel:
    """Train one binary model per class, class c against the rest, seeded seed + class position"""
    if d.task is not Task.MULTICLASS:
        raise ConfigInvalid(f"train_ovr needs a multiclass dataset, got {d.task.value}")
    classes = d.classes()
    if not classes:
        raise EmptyInput("multiclass dataset has no examples")

    models = []
    for position, cls in enumerate(classes):
        relabeled = relabel_one_vs_rest(d, cls)
        positives = sum(1 for e in relabeled.examples if e.target == 1.0)
        logger.info(f"Training class {cls} against the rest ({positives}/{len(d)} positives)")
        models.append(train_binary(relabeled, replace(cfg, seed=cfg.seed + position)))
    return OvrModel(tuple(classes), tuple(models))


def ovr_scores(m: OvrModel, x: SparseVector) -> Dict[int, float]:
    return {cls: predict_score(model, x) for cls, model in zip(m.classes, m.models)}


def predict_ovr(m: OvrModel, x: SparseVector) -> int:
    """Class with the largest raw consensus score; ties go to the smallest class id"""
    best_cls, best_score = None, None
    for cls, score in sorted(ovr_scores(m, x).items()):
        if best_score is None or score > best_score:
            best_cls, best_score = cls, score
    return best_cls


def predict_ovr_many(m: OvrModel, d: Dataset) -> List[int]:
    return [predict_ovr(m, e.features) for e in d.examples]
