import logging
import os
import unittest
from unittest import mock

import numpy as np

from linearml.dataset import Dataset, Example, SparseVector, Task, generate_synthetic, split_dataset
from linearml.errors import ConfigInvalid, EmptyGrid, KTooLarge, LengthMismatch, SingularSystem
from linearml.projection_core import Projection, build_index
from linearml.training import (
    INIT_MARGIN,
    Model,
    PseudoLabelState,
    TrainConfig,
    fit_projection,
    init_pseudo_labels,
    learn,
    learn_step,
    predict,
    predict_many,
    predict_score,
    train_binary,
    train_regression,
    tune_k,
)

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def dense_dataset(rows, targets, task=Task.REGRESSION):
    examples = tuple(
        Example(SparseVector(tuple((j + 1, float(v)) for j, v in enumerate(row) if v != 0)), float(t))
        for row, t in zip(rows, targets))
    return Dataset(examples, len(rows[0]), task)


def linear_dataset(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 2))
    y = 2.0 + 3.0 * X[:, 0] - X[:, 1]
    return dense_dataset(X, y), X, y


class TestTrainConfig(unittest.TestCase):
    def test_defaults_are_valid(self):
        self.assertEqual(TrainConfig().validate().k, 5)

    def test_invalid_values(self):
        for bad in (dict(k=0), dict(inc=0.0), dict(inc=0.5), dict(eps=0.0),
                    dict(max_iters=0), dict(ridge_lambda=-1.0),
                    dict(eps_div=0.0), dict(eps_div=float('nan'))):
            with self.subTest(**bad):
                with self.assertRaises(ConfigInvalid):
                    TrainConfig(**bad).validate()

    def test_dict_round_trip(self):
        cfg = TrainConfig(k=7, inc=0.1, seed=3)
        self.assertEqual(TrainConfig.from_dict(cfg.to_dict()), cfg)

    def test_unknown_option(self):
        with self.assertRaises(ConfigInvalid):
            TrainConfig.from_dict({'k': 3, 'alpha': 1.0})


class TestFitProjection(unittest.TestCase):
    def test_recovers_linear_function_without_ridge(self):
        d, _, y = linear_dataset(40, 1)
        p = fit_projection(d, y, 0.0)
        self.assertAlmostEqual(p.bias, 2.0, places=8)
        self.assertAlmostEqual(p.weights[0], 3.0, places=8)
        self.assertAlmostEqual(p.weights[1], -1.0, places=8)

    def test_matches_augmented_least_squares(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        d = dense_dataset(X, y)
        lam = 0.7
        # ridge as plain least squares on rows [1 X] stacked over sqrt(lam) * [0 I]
        design = np.hstack([np.ones((30, 1)), X])
        penalty = np.hstack([np.zeros((4, 1)), np.sqrt(lam) * np.eye(4)])
        expected, *_ = np.linalg.lstsq(np.vstack([design, penalty]), np.concatenate([y, np.zeros(4)]), rcond=None)
        p = fit_projection(d, y, lam)
        np.testing.assert_allclose([p.bias, *p.weights], expected, atol=1e-6)

    def test_duplicated_column_is_singular_without_ridge(self):
        rows = [[x, x] for x in (1.0, 2.0, 3.0, 4.0)]
        d = dense_dataset(rows, [1.0, 2.0, 3.0, 4.0])
        with self.assertRaises(SingularSystem):
            fit_projection(d, d.targets(), 0.0)
        # any positive ridge makes the system solvable
        p = fit_projection(d, d.targets(), 1e-3)
        self.assertAlmostEqual(p.weights[0], p.weights[1])

    def test_length_mismatch(self):
        d, _, y = linear_dataset(5, 2)
        with self.assertRaises(LengthMismatch):
            fit_projection(d, y[:3], 0.0)


class TestPseudoLabels(unittest.TestCase):
    def test_init_inside_class_ranges(self):
        classes = [0, 1] * 200
        state = init_pseudo_labels(classes, 11)
        self.assertTrue(state.in_class_range())
        for p, c in zip(state.p, state.classes):
            low = INIT_MARGIN if c == 0 else 0.5 + INIT_MARGIN
            self.assertGreaterEqual(p, low)
            self.assertLessEqual(p, low + 0.5 - 2 * INIT_MARGIN)

    def test_init_is_seeded(self):
        self.assertEqual(init_pseudo_labels([0, 1, 1], 5), init_pseudo_labels([0, 1, 1], 5))
        self.assertNotEqual(init_pseudo_labels([0, 1, 1], 5), init_pseudo_labels([0, 1, 1], 6))

    def test_step_moves_towards_neighbors(self):
        state = PseudoLabelState((0.3, 0.7), (0, 1))
        updated, changed = learn_step([1.0, 1.0], state, TrainConfig(k=1))
        self.assertEqual(changed, 2)
        self.assertAlmostEqual(updated.p[0], 0.35)
        self.assertAlmostEqual(updated.p[1], 0.65)

    def test_step_assigns_consensus_inside_range(self):
        state = PseudoLabelState((0.6, 0.8), (1, 1))
        updated, changed = learn_step([1.0, 1.0], state, TrainConfig(k=1))
        self.assertEqual(changed, 2)
        self.assertAlmostEqual(updated.p[0], 0.8)
        self.assertAlmostEqual(updated.p[1], 0.6)

    def test_step_within_tolerance_is_a_fixpoint(self):
        state = PseudoLabelState((0.3, 0.3005), (0, 0))
        updated, changed = learn_step([1.0, 1.0], state, TrainConfig(k=1))
        self.assertEqual(changed, 0)
        self.assertIs(updated, state)

    def test_learn_on_fixpoint_runs_one_iteration(self):
        state = PseudoLabelState((0.3, 0.3005), (0, 0))
        final, converged, iterations = learn([1.0, 1.0], state, TrainConfig(k=1))
        self.assertTrue(converged)
        self.assertEqual(iterations, 1)
        self.assertEqual(final.p, state.p)

    def test_learn_converges_inside_range(self):
        state = PseudoLabelState((0.3, 0.7), (0, 1))
        final, converged, iterations = learn([1.0, 1.0], state, TrainConfig(k=1))
        self.assertTrue(converged)
        self.assertLessEqual(iterations, 100)
        self.assertTrue(final.in_class_range())

    def test_learn_respects_max_iters(self):
        state = PseudoLabelState((0.3, 0.7), (0, 1))
        _, converged, iterations = learn([1.0, 1.0], state, TrainConfig(k=1, max_iters=1))
        self.assertFalse(converged)
        self.assertEqual(iterations, 1)

    def test_class_range_is_preserved(self):
        rng = np.random.default_rng(8)
        for trial in range(100):
            n = int(rng.integers(3, 30))
            projections = rng.normal(scale=2.0, size=n)
            projections[rng.random(n) < 0.1] = 0.0
            classes = rng.integers(0, 2, size=n).tolist()
            cfg = TrainConfig(k=int(rng.integers(1, n)), max_iters=20, seed=trial)
            state = init_pseudo_labels(classes, trial)
            final, converged, iterations = learn(projections.tolist(), state, cfg)
            self.assertTrue(final.in_class_range(), msg=f"trial {trial}")
            self.assertLessEqual(iterations, cfg.max_iters)
            if converged:
                self.assertEqual(learn_step(projections.tolist(), final, cfg)[1], 0)
        logger.info("✅ pseudo-label range test passed")

    def test_class_range_holds_after_every_step(self):
        rng = np.random.default_rng(13)
        for trial in range(100):
            n = int(rng.integers(10, 201))
            projections = rng.normal(scale=2.0, size=n).tolist()
            classes = rng.integers(0, 2, size=n).tolist()
            cfg = TrainConfig(k=int(rng.integers(1, 10)), seed=trial)
            state = init_pseudo_labels(classes, trial)
            for step in range(10):
                state, changed = learn_step(projections, state, cfg)
                self.assertTrue(state.in_class_range(), msg=f"trial {trial} step {step}")
                if changed == 0:
                    break
        logger.info("✅ per-step pseudo-label range test passed")

    def test_too_few_points(self):
        state = PseudoLabelState((0.3, 0.7), (0, 1))
        with self.assertRaises(KTooLarge):
            learn_step([1.0, 2.0], state, TrainConfig(k=2))


class TestTrainAndPredict(unittest.TestCase):
    def test_regression_reproduces_linear_targets(self):
        d, _, _ = linear_dataset(60, 3)
        model = train_regression(d, TrainConfig(k=3, ridge_lambda=0.0))
        query = SparseVector(((1, 0.25), (2, 0.5)))
        self.assertAlmostEqual(predict(model, query), 2.0 + 0.75 - 0.5, places=6)

    def test_regression_k_too_large(self):
        d, _, _ = linear_dataset(4, 3)
        with self.assertRaises(KTooLarge):
            train_regression(d, TrainConfig(k=5))

    def test_binary_training_points_predict_their_own_class(self):
        xs = np.linspace(-1.0, 1.0, 50)
        d = dense_dataset([[x] for x in xs], [1.0 if x > 0 else 0.0 for x in xs], Task.BINARY)
        model = train_binary(d, TrainConfig(k=1, seed=2))
        self.assertEqual(model.task, Task.BINARY)
        self.assertLessEqual(model.iterations, model.config.max_iters)
        self.assertEqual(predict_many(model, d), [int(t) for t in d.targets()])
        for example in d.examples:
            score = predict_score(model, example.features)
            self.assertTrue(0.0 < score <= 1.0)

    def test_binary_is_deterministic(self):
        xs = np.linspace(0.0, 1.0, 30)
        d = dense_dataset([[x, x * x] for x in xs], [1.0 if x > 0.4 else 0.0 for x in xs], Task.BINARY)
        first = train_binary(d, TrainConfig(k=3, seed=9))
        second = train_binary(d, TrainConfig(k=3, seed=9))
        self.assertEqual(first.projection, second.projection)
        self.assertEqual(first.index.entries, second.index.entries)

    def test_single_class_training_predicts_that_class(self):
        rng = np.random.default_rng(12)
        rows = rng.uniform(size=(20, 3)).tolist()
        ones = dense_dataset(rows, [1.0] * 20, Task.BINARY)
        zeros = dense_dataset(rows, [0.0] * 20, Task.BINARY)
        self.assertEqual(set(predict_many(train_binary(ones, TrainConfig(k=3)), ones)), {1})
        self.assertEqual(set(predict_many(train_binary(zeros, TrainConfig(k=3)), zeros)), {0})

    def test_binary_threshold_is_strictly_above_half(self):
        model = Model(Projection(0.0, (1.0,)), build_index([1.0], [0.5]), 1, Task.BINARY, TrainConfig(k=1))
        self.assertEqual(predict_score(model, SparseVector(((1, 1.0),))), 0.5)
        self.assertEqual(predict(model, SparseVector(((1, 1.0),))), 0)
        self.assertEqual(predict(model, SparseVector(((1, 2.0),))), 1)

    def test_sqrt_regression_beats_the_mean(self):
        d = generate_synthetic('sqrt', 1000, (0.0, 100.0), 'reg', 1)
        train_set, test_set = split_dataset(d, 0.7, 1)
        model = train_regression(train_set, TrainConfig(k=5))
        actual = np.array(test_set.targets())
        predicted = np.array(predict_many(model, test_set))
        model_rmse = float(np.sqrt(np.mean((predicted - actual) ** 2)))
        mean_rmse = float(np.sqrt(np.mean((np.mean(train_set.targets()) - actual) ** 2)))
        self.assertLess(model_rmse, mean_rmse)

    def test_recorded_eps_div_is_used_at_prediction(self):
        x = SparseVector(((1, 1.0),))
        index = build_index([0.4], [0.8])
        with mock.patch.dict(os.environ, {'LINEARML_EPS_DIV': '1e-12'}):
            pinned = Model(Projection(0.0, (1.0,)), index, 1, Task.REGRESSION, TrainConfig(k=1, eps_div=0.5))
            # 0.4 is inside the recorded guard, so the plain target mean is used
            self.assertEqual(predict(pinned, x), 0.8)
            unpinned = Model(Projection(0.0, (1.0,)), index, 1, Task.REGRESSION, TrainConfig(k=1))
            self.assertAlmostEqual(predict(unpinned, x), 2.0)

    def test_training_records_eps_div(self):
        d, _, _ = linear_dataset(20, 9)
        with mock.patch.dict(os.environ, {'LINEARML_EPS_DIV': '0.01'}):
            self.assertEqual(train_regression(d, TrainConfig(k=3)).config.eps_div, 0.01)
            self.assertEqual(train_regression(d, TrainConfig(k=3, eps_div=0.2)).config.eps_div, 0.2)

    def test_binary_rejects_regression_data(self):
        d, _, _ = linear_dataset(10, 4)
        with self.assertRaises(ConfigInvalid):
            train_binary(d, TrainConfig(k=1))

    def test_model_needs_k_points(self):
        d, _, y = linear_dataset(3, 5)
        p = fit_projection(d, y, 0.0)
        with self.assertRaises(KTooLarge):
            Model(p, build_index([1.0, 2.0, 3.0], y), 4, Task.REGRESSION, TrainConfig(k=4))


class TestTuneK(unittest.TestCase):
    def test_ties_go_to_smallest_k(self):
        rng = np.random.default_rng(21)
        train_set = dense_dataset(rng.uniform(size=(20, 2)).tolist(), [1.0] * 20, Task.BINARY)
        val = dense_dataset(rng.uniform(size=(6, 2)).tolist(), [1.0] * 6, Task.BINARY)
        self.assertEqual(tune_k(train_set, val, [5, 3, 7], TrainConfig()), 3)

    def test_empty_grid(self):
        d, _, _ = linear_dataset(10, 6)
        with self.assertRaises(EmptyGrid):
            tune_k(d, d, [], TrainConfig())

    def test_regression_picks_a_grid_value(self):
        train_set, _, _ = linear_dataset(40, 7)
        val, _, _ = linear_dataset(10, 8)
        self.assertIn(tune_k(train_set, val, [1, 2, 4], TrainConfig(ridge_lambda=0.0)), (1, 2, 4))


if __name__ == '__main__':
    unittest.main()
