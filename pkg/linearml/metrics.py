import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

from linearml.dataset import Task
from linearml.errors import EmptyInput, LengthMismatch

# a regression prediction counts as correct when it is this close to the truth
REGRESSION_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class Metrics:
    n: int
    correct: int
    accuracy: float
    # rows are the true class, columns the predicted class: ((tn, fp), (fn, tp))
    confusion: Optional[Tuple[Tuple[int, int], Tuple[int, int]]] = None
    rmse: Optional[float] = None
    mae: Optional[float] = None

    @property
    def percent(self) -> int:
        return round(100 * self.correct / self.n)

    def cell(self) -> str:
        """Accuracy in the "98% (241/248)" style"""
        return f"{self.percent}% ({self.correct}/{self.n})"

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'n': self.n,
            'correct': self.correct,
            'accuracy': self.accuracy,
            'percent': self.percent,
        }
        if self.confusion is not None:
            data['confusion'] = [list(row) for row in self.confusion]
        if self.rmse is not None:
            data['rmse'] = self.rmse
            data['mae'] = self.mae
        return data


def evaluate(predictions: Sequence[Union[int, float]], truths: Sequence[Union[int, float]],
             task: Union[Task, str]) -> Metrics:
    """Count correct predictions; adds a confusion matrix (Binary) or RMSE/MAE (Regression)"""
    task = Task.parse(task)
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truths)} truths")
    if len(truths) == 0:
        raise EmptyInput("nothing to evaluate")
    n = len(truths)

    if task is Task.REGRESSION:
        errors = [float(p) - float(t) for p, t in zip(predictions, truths)]
        correct = sum(1 for e in errors if abs(e) <= REGRESSION_MATCH_TOL)
        rmse = math.sqrt(sum(e * e for e in errors) / n)
        mae = sum(abs(e) for e in errors) / n
        return Metrics(n, correct, correct / n, rmse=rmse, mae=mae)

    correct = sum(1 for p, t in zip(predictions, truths) if int(p) == int(t))
    confusion = None
    if task is Task.BINARY:
        cells = [[0, 0], [0, 0]]
        for p, t in zip(predictions, truths):
            cells[int(t)][int(p)] += 1
        confusion = (tuple(cells[0]), tuple(cells[1]))
    return Metrics(n, correct, correct / n, confusion=confusion)
