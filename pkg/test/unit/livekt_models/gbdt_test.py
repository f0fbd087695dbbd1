# test/unit/livekt_models/gbdt_test.py
#

'''
Unit test module to perform testing on livekt_models/gbdt.py
'''

# Import packages
import itertools
import math
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
from scipy.special import expit

from livekt_data.data_model import Split
from livekt_data.encoding import build_tables
from livekt_eval.metrics import auc, compute_metrics
from livekt_models.gbdt import BASE_EPS, MIN_GAIN, MIN_HESSIAN, \
    BinMapper, GBDTParams, GBDTPredictor, Histogram, SklearnHGBPredictor, \
    best_split, bin_features, build_histogram, gbdt_fit, gbdt_predict, \
    load_ensemble, save_ensemble, split_gain
from livekt_models.logistic import LogisticRegressionPredictor
from test.unit.fixtures import make_dataset, make_table, random_tables


def _separable_table(n_rows=40):
    rows = [([1, 2, q], [1, 1, 1], [2, 1], int(q == 7))
            for q in (7, 8) * (n_rows // 2)]
    return make_table(rows, 3)


def _oracle_gain(grad, hess, count, lambda_l2):
    '''
    Best gain over every two-way partition of the observed bins
    '''
    observed = np.nonzero(count > 0)[0]
    g_tot, h_tot = grad.sum(), hess.sum()
    best = -np.inf
    for size in range(1, observed.shape[0]):
        for subset in itertools.combinations(observed, size):
            subset = list(subset)
            g_left, h_left = grad[subset].sum(), hess[subset].sum()
            best = max(best, split_gain(g_left, h_left, g_tot - g_left,
                                        h_tot - h_left, lambda_l2))
    return best


def _row_level_tree(binned, grad, hess, rows, depth, params):
    '''
    Scalar exact-split tree over the rows of one node; returns a nested
    dict. Bin sums only order the categories; every candidate partition
    is scored from its own rows.
    '''
    def _leaf():
        g_sum = sum(grad[r] for r in rows)
        h_sum = sum(hess[r] for r in rows)
        return {'value': -g_sum / (h_sum + params.lambda_l2) *
                params.learning_rate}

    if depth == params.max_depth or len(rows) < 2 * params.min_samples_leaf:
        return _leaf()

    best = None
    for feat in range(binned.shape[1]):
        g_bin, h_bin = {}, {}
        for r in rows:
            b = int(binned[r, feat])
            g_bin[b] = g_bin.get(b, 0.0) + grad[r]
            h_bin[b] = h_bin.get(b, 0.0) + hess[r]
        order = sorted(g_bin, key=lambda b: (g_bin[b] / h_bin[b], b))
        for cut in range(1, len(order)):
            left_set = set(order[:cut])
            left = [r for r in rows if int(binned[r, feat]) in left_set]
            right = [r for r in rows if int(binned[r, feat]) not in left_set]
            if min(len(left), len(right)) < params.min_samples_leaf:
                continue
            g_l = sum(grad[r] for r in left)
            h_l = sum(hess[r] for r in left)
            g_r = sum(grad[r] for r in right)
            h_r = sum(hess[r] for r in right)
            lam = params.lambda_l2
            gain = (g_l ** 2 / (h_l + lam) + g_r ** 2 / (h_r + lam) -
                    (g_l + g_r) ** 2 / (h_l + h_r + lam))
            if best is None or gain > best[0]:
                best = (gain, feat, left_set, left, right)

    if best is None or not best[0] > MIN_GAIN:
        return _leaf()
    _, feat, left_set, left, right = best
    return {'feature': feat, 'left_bins': left_set,
            'left': _row_level_tree(binned, grad, hess, left, depth + 1,
                                    params),
            'right': _row_level_tree(binned, grad, hess, right, depth + 1,
                                     params)}


def _row_level_value(node, binned_row):
    while 'value' not in node:
        side = 'left' if int(binned_row[node['feature']]) in \
            node['left_bins'] else 'right'
        node = node[side]
    return node['value']


def _row_level_boost(train, test, params):
    '''
    Reference booster: same bins, ordering rule and leaf formula as
    gbdt_fit, written row by row without histograms
    '''
    binned, mapper = bin_features(train, params.max_bins)
    test_binned = mapper.transform(test.features())
    labels = [float(y) for y in train.labels]
    rate = min(max(sum(labels) / len(labels), BASE_EPS), 1.0 - BASE_EPS)
    raw = [math.log(rate / (1.0 - rate))] * len(labels)
    test_raw = [raw[0]] * test.n_rows
    for _ in range(params.n_trees):
        prob = [1.0 / (1.0 + math.exp(-x)) for x in raw]
        grad = [p - y for p, y in zip(prob, labels)]
        hess = [max(p * (1.0 - p), MIN_HESSIAN) for p in prob]
        tree = _row_level_tree(binned, grad, hess, list(range(len(labels))),
                               0, params)
        raw = [x + _row_level_value(tree, binned[r])
               for r, x in enumerate(raw)]
        test_raw = [x + _row_level_value(tree, test_binned[r])
                    for r, x in enumerate(test_raw)]
    return np.array([1.0 / (1.0 + math.exp(-x)) for x in test_raw])


class BinMapperTestCase(unittest.TestCase):
    '''
    TestCase for the per-feature bin maps
    '''

    def test_few_codes(self):
        feats = np.array([[3], [5], [5], [9], [0]])
        mapper = BinMapper(255).fit(feats)
        self.assertEqual(mapper.n_dedicated(0), 3)
        binned = mapper.transform(feats)[:, 0]
        self.assertEqual(binned[4], 0)
        self.assertEqual(len(set(binned[:4])), 3)
        self.assertTrue(np.all((binned[:4] >= 1) & (binned[:4] <= 3)))

    def test_overflow_cap(self):
        codes = np.arange(1, 301)
        # code c appears c times, so the 254 most frequent are 47..300
        feats = np.repeat(codes, codes).reshape(-1, 1)
        mapper = BinMapper(255).fit(feats)
        self.assertEqual(mapper.n_dedicated(0), 254)
        binned = mapper.transform(np.array([[300], [47], [46], [1]]))[:, 0]
        self.assertLess(binned[0], 255)
        self.assertLess(binned[1], 255)
        self.assertEqual(binned[2], 255)
        self.assertEqual(binned[3], 255)
        # most frequent code gets the first dedicated bin
        self.assertEqual(binned[0], 1)

    def test_unseen_code_goes_to_overflow(self):
        train, _ = random_tables(0, 30, 2, 4, n_codes=5)
        binned, mapper = bin_features(train, max_bins=255)
        self.assertEqual(binned.dtype, np.uint8)
        test = np.full((1, train.width), 999)
        np.testing.assert_array_equal(mapper.transform(test),
                                      np.full((1, train.width), 255))


class HistogramTestCase(unittest.TestCase):
    '''
    TestCase for build_histogram and best_split
    '''

    def setUp(self):
        rng = np.random.default_rng(3)
        self.binned = rng.integers(0, 9, size=(200, 12)).astype(np.uint8)
        self.grad = rng.normal(size=200)
        self.hess = rng.uniform(0.05, 0.25, size=200)

    def test_sums_match_node_totals(self):
        rows = np.arange(0, 200, 3)
        hist = build_histogram(self.binned, self.grad, self.hess, 10,
                               rows=rows)
        np.testing.assert_array_equal(hist.count.sum(axis=1),
                                      np.full(12, rows.shape[0]))
        np.testing.assert_allclose(hist.grad.sum(axis=1),
                                   self.grad[rows].sum(), atol=1e-9)
        np.testing.assert_allclose(hist.hess.sum(axis=1),
                                   self.hess[rows].sum(), atol=1e-9)

    def test_thread_count_does_not_change_result(self):
        single = build_histogram(self.binned, self.grad, self.hess, 10)
        for n_threads in (2, 3, 8, 20):
            multi = build_histogram(self.binned, self.grad, self.hess, 10,
                                    n_threads=n_threads)
            self.assertEqual(multi.grad.tobytes(), single.grad.tobytes())
            self.assertEqual(multi.hess.tobytes(), single.hess.tobytes())
            self.assertEqual(multi.count.tobytes(), single.count.tobytes())

    def test_two_separating_bins(self):
        binned = np.array([[1]] * 10 + [[2]] * 10, dtype=np.uint8)
        labels = np.array([1] * 10 + [0] * 10)
        grad = 0.5 - labels
        hess = np.full(20, 0.25)
        hist = build_histogram(binned, grad, hess, 4)
        split = best_split(hist, lambda_l2=1.0)
        np.testing.assert_array_equal(split.left_bins, [1])
        self.assertAlmostEqual(split.gain, 25.0 / 3.5 * 2)

    def test_pure_node_is_leaf(self):
        binned = np.array([[1], [2], [3], [1], [2], [3]], dtype=np.uint8)
        grad = np.full(6, -0.5)
        hess = np.full(6, 0.25)
        hist = build_histogram(binned, grad, hess, 5)
        self.assertIsNone(best_split(hist, lambda_l2=1.0))

    def test_min_samples_leaf_respected(self):
        binned = np.array([[1]] * 2 + [[2]] * 18, dtype=np.uint8)
        labels = np.array([1] * 2 + [0] * 18)
        hist = build_histogram(binned, 0.5 - labels, np.full(20, 0.25), 4)
        self.assertIsNotNone(best_split(hist, 1.0, min_samples_leaf=2))
        self.assertIsNone(best_split(hist, 1.0, min_samples_leaf=3))

    def test_matches_exhaustive_partition_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n_bins = int(rng.integers(2, 9))
            count = rng.integers(0, 4, size=n_bins)
            count[rng.integers(0, n_bins, size=2)] = 1
            grad = np.where(count > 0, rng.normal(size=n_bins), 0.0)
            hess = np.where(count > 0, rng.uniform(0.1, 2.0, size=n_bins),
                            0.0)
            hist = Histogram(grad[None, :], hess[None, :], count[None, :])
            split = best_split(hist, lambda_l2=0.0)
            oracle = _oracle_gain(grad, hess, count, 0.0)
            if split is None:
                self.assertLessEqual(oracle, 1e-6)
            else:
                self.assertAlmostEqual(split.gain, oracle, delta=1e-6)

    def test_ties_prefer_lowest_feature(self):
        column = np.array([1] * 10 + [2] * 10, dtype=np.uint8)
        binned = np.stack([column, column, column], axis=1)
        grad = 0.5 - np.array([1] * 10 + [0] * 10)
        hist = build_histogram(binned, grad, np.full(20, 0.25), 4)
        self.assertEqual(best_split(hist, 1.0).feature, 0)


class GBDTFitTestCase(unittest.TestCase):
    '''
    TestCase for gbdt_fit and gbdt_predict
    '''

    def test_no_trees_predicts_base_rate(self):
        train, test = random_tables(2, 40, 5, 4)
        ensemble = gbdt_fit(train, GBDTParams(n_trees=0))
        np.testing.assert_allclose(gbdt_predict(ensemble, test),
                                   train.labels.mean(), rtol=1e-12)

    def test_one_class_labels(self):
        rows = [([1, q], [1, 1], [2], 1) for q in range(1, 30)]
        train = make_table(rows, 2)
        ensemble = gbdt_fit(train)
        self.assertEqual(ensemble.trees, [])
        probs = gbdt_predict(ensemble, train.without_labels())
        self.assertTrue(np.all(probs > 0.99))
        self.assertTrue(np.all(probs < 1.0))

    def test_separable_fixture(self):
        table = _separable_table()
        ensemble = gbdt_fit(table)
        probs = gbdt_predict(ensemble, table.without_labels())
        self.assertEqual(auc(probs, table.labels), 1.0)

    def test_train_loss_decreases(self):
        train, _ = random_tables(4, 120, 2, 5, n_codes=6)
        ensemble = gbdt_fit(train, GBDTParams(n_trees=20,
                                              min_samples_leaf=5))
        labels = train.labels
        losses = [compute_metrics(expit(raw), labels).logloss
                  for raw in ensemble.staged_raw_predict(train.features())]
        self.assertEqual(len(losses), 21)
        self.assertTrue(np.all(np.diff(losses) <= 1e-12))
        self.assertLess(losses[-1], losses[0])

    def test_depth_one_tree_has_two_outputs(self):
        train, test = random_tables(5, 80, 30, 4, n_codes=4)
        ensemble = gbdt_fit(train, GBDTParams(n_trees=1, max_depth=1,
                                              min_samples_leaf=1))
        values = np.unique(gbdt_predict(ensemble, test))
        self.assertLessEqual(values.shape[0], 2)
        self.assertEqual(ensemble.trees[0].n_nodes, 3)

    def test_matches_row_level_exhaustive_split(self):
        train, _ = random_tables(6, 60, 2, 3, n_codes=3)
        binned, mapper = bin_features(train)
        labels = train.labels.astype(np.float64)
        prob = np.full(60, labels.mean())
        grad, hess = prob - labels, prob * (1.0 - prob)
        hist = build_histogram(binned, grad, hess, mapper.n_bins)
        split = best_split(hist, lambda_l2=0.0)
        best = -np.inf
        for feat in range(binned.shape[1]):
            col = binned[:, feat]
            g_bins = np.bincount(col, weights=grad, minlength=mapper.n_bins)
            h_bins = np.bincount(col, weights=hess, minlength=mapper.n_bins)
            c_bins = np.bincount(col, minlength=mapper.n_bins)
            best = max(best, _oracle_gain(g_bins, h_bins, c_bins, 0.0))
        self.assertAlmostEqual(split.gain, best, delta=1e-6)

    def test_predictions_match_row_level_booster(self):
        for seed, lambda_l2 in ((11, 1.0), (12, 0.5), (13, 2.0)):
            train, test = random_tables(seed, 90, 30, 3, n_codes=5)
            params = GBDTParams(n_trees=4, max_depth=3, learning_rate=0.3,
                                min_samples_leaf=4, lambda_l2=lambda_l2)
            ensemble = gbdt_fit(train, params)
            self.assertTrue(any(tree.n_nodes > 3 for tree in ensemble.trees))
            np.testing.assert_allclose(
                gbdt_predict(ensemble, test.without_labels()),
                _row_level_boost(train, test, params), rtol=0, atol=1e-6)

    def test_thread_count_does_not_change_predictions(self):
        train, test = random_tables(7, 100, 20, 5, n_codes=8)
        params = GBDTParams(n_trees=5, min_samples_leaf=5)
        outputs = []
        for n_threads in (1, 4):
            with mock.patch('livekt_models.gbdt.get_num_threads',
                            return_value=n_threads):
                outputs.append(gbdt_predict(gbdt_fit(train, params), test))
        self.assertEqual(outputs[0].tobytes(), outputs[1].tobytes())

    def test_bad_params(self):
        with self.assertRaises(ValueError):
            GBDTParams(max_bins=256)
        with self.assertRaises(ValueError):
            GBDTParams(max_depth=0)


class EnsembleContainerTestCase(unittest.TestCase):
    '''
    TestCase for saving ensembles
    '''

    def test_round_trip(self):
        train, test = random_tables(8, 100, 20, 5, n_codes=8)
        ensemble = gbdt_fit(train, GBDTParams(n_trees=8,
                                              min_samples_leaf=5))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'gbdt.lktw')
            save_ensemble(ensemble, path)
            loaded = load_ensemble(path)
        self.assertEqual(len(loaded.trees), 8)
        self.assertEqual(loaded.params, ensemble.params)
        np.testing.assert_allclose(gbdt_predict(loaded, test),
                                   gbdt_predict(ensemble, test), atol=1e-6)

    def test_base_only_round_trip(self):
        rows = [([1, q], [1, 1], [2], 0) for q in range(1, 10)]
        ensemble = gbdt_fit(make_table(rows, 2))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'gbdt.lktw')
            save_ensemble(ensemble, path)
            loaded = load_ensemble(path)
        self.assertEqual(loaded.base_score, ensemble.base_score)
        self.assertEqual(loaded.trees, [])


class SklearnHGBTestCase(unittest.TestCase):
    '''
    TestCase for the scikit-learn reference GBM
    '''

    def test_separable_fixture(self):
        table = _separable_table()
        predictor = SklearnHGBPredictor(seed=0, min_samples_leaf=5)
        predictor.prepare(table)
        probs = predictor.predict(table, table.without_labels())
        self.assertEqual(auc(probs, table.labels), 1.0)

    def test_one_class_is_constant(self):
        rows = [([1, q], [1, 1], [2], 1) for q in range(1, 10)]
        table = make_table(rows, 2)
        predictor = SklearnHGBPredictor()
        predictor.prepare(table)
        np.testing.assert_array_equal(
            predictor.predict(table, table.without_labels()), np.ones(9))


@unittest.skipUnless(os.environ.get('LIVEKT_SLOW_TESTS'),
                     'set LIVEKT_SLOW_TESTS=1 to run')
class LearnedBaselinesTestCase(unittest.TestCase):
    '''
    Both trained baselines beat chance on a learnable synthetic dataset
    '''

    def test_auc_above_threshold(self):
        dataset = make_dataset(seed=21, n_students=1000, min_len=5,
                               max_len=30, n_questions=50, sigma_d=2.0)
        students = dataset.student_indices()
        split = Split(frozenset(students[:800]), frozenset(students[800:]),
                      0)
        train, test = build_tables(dataset, split, 10, 10, 9)
        for predictor in (LogisticRegressionPredictor(seed=0),
                          GBDTPredictor(seed=0)):
            predictor.prepare(train)
            probs = predictor.predict(train, test.without_labels())
            self.assertGreaterEqual(auc(probs, test.labels), 0.70,
                                    msg=predictor.name)


# Run unittests via main executable
if __name__ == '__main__':
    unittest.main()
