import logging
import unittest

import numpy as np

from linearml.dataset import Dataset, Example, SparseVector, Task, parse_libsvm, relabel_one_vs_rest
from linearml.errors import ConfigInvalid, LengthMismatch
from linearml.multiclass import OvrModel, ovr_scores, predict_ovr, predict_ovr_many, train_ovr
from linearml.training import TrainConfig, train

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def three_blobs(per_class, seed):
    rng = np.random.default_rng(seed)
    centres = {0: (0.0, 0.0), 1: (5.0, 0.0), 2: (0.0, 5.0)}
    examples = []
    for cls, (cx, cy) in centres.items():
        for x, y in rng.normal(scale=0.3, size=(per_class, 2)):
            examples.append(Example(SparseVector(((1, cx + float(x)), (2, cy + float(y)))), float(cls)))
    return Dataset(tuple(examples), 2, Task.MULTICLASS)


class TestOneVsRest(unittest.TestCase):
    def test_one_model_per_class(self):
        d = three_blobs(15, 1)
        model = train_ovr(d, TrainConfig(k=3))
        self.assertEqual(model.classes, (0, 1, 2))
        self.assertEqual(len(model.models), 3)
        self.assertEqual(model.dimension, 2)
        # class c is trained with seed + its position
        self.assertEqual([m.config.seed for m in model.models], [0, 1, 2])

    def test_predictions_are_known_classes(self):
        d = three_blobs(15, 2)
        model = train(d, TrainConfig(k=3))
        self.assertIsInstance(model, OvrModel)
        predictions = predict_ovr_many(model, d)
        self.assertEqual(len(predictions), len(d))
        self.assertTrue(set(predictions) <= {0, 1, 2})
        scores = ovr_scores(model, d.examples[0].features)
        self.assertEqual(sorted(scores), [0, 1, 2])
        self.assertEqual(predict_ovr(model, d.examples[0].features),
                         max(sorted(scores), key=lambda c: scores[c]))

    def test_deterministic(self):
        d = three_blobs(10, 3)
        first = predict_ovr_many(train_ovr(d, TrainConfig(k=2, seed=4)), d)
        second = predict_ovr_many(train_ovr(d, TrainConfig(k=2, seed=4)), d)
        self.assertEqual(first, second)

    def test_ties_go_to_smallest_class(self):
        text = "\n".join(f"{c} 1:{x}" for c in (1, 3) for x in (1, 2, 3, 4, 5))
        d = parse_libsvm(text, Task.MULTICLASS)
        base = train_ovr(d, TrainConfig(k=2))
        # one model under two class ids: both scores are equal
        twin = OvrModel((1, 3), (base.models[0], base.models[0]))
        self.assertEqual(predict_ovr(twin, SparseVector(((1, 2.5),))), 1)

    def test_single_class(self):
        d = parse_libsvm("\n".join(f"2 1:{x} 2:{x % 3 + 1}" for x in range(1, 11)), Task.MULTICLASS)
        model = train_ovr(d, TrainConfig(k=3))
        self.assertEqual(model.classes, (2,))
        self.assertEqual(len(model.models), 1)
        self.assertEqual(set(predict_ovr_many(model, d)), {2})

    def test_positives_match_class_frequency(self):
        rng = np.random.default_rng(7)
        labels = rng.integers(0, 4, size=60).tolist()
        d = parse_libsvm("\n".join(f"{c} 1:{i + 1}" for i, c in enumerate(labels)), Task.MULTICLASS)
        for cls in d.classes():
            relabeled = relabel_one_vs_rest(d, cls)
            self.assertEqual(sum(e.target for e in relabeled.examples), labels.count(cls))

    def test_requires_multiclass_data(self):
        d = parse_libsvm("0 1:1\n1 1:2", Task.BINARY)
        with self.assertRaises(ConfigInvalid):
            train_ovr(d, TrainConfig(k=1))

    def test_mismatched_model_list(self):
        base = train_ovr(three_blobs(5, 5), TrainConfig(k=2))
        with self.assertRaises(LengthMismatch):
            OvrModel((0, 1), base.models)


if __name__ == '__main__':
    unittest.main()
