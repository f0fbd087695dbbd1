# test/unit/livekt_eval/metrics_test.py
#

'''
Unit test module to perform testing on livekt_eval/metrics.py
'''

# Import packages
import math
import unittest

import numpy as np

from livekt_eval.metrics import MetricError, PredictionRecord, auc, \
    compute_metrics, records_metrics


def _pairwise_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(float(p > n) + 0.5 * float(p == n) for p in pos for n in neg)
    return wins / (pos.shape[0] * neg.shape[0])


class AUCTestCase(unittest.TestCase):
    '''
    TestCase for auc
    '''

    def test_examples(self):
        self.assertEqual(auc([0.9, 0.1], [1, 0]), 1.0)
        self.assertEqual(auc([0.3] * 6, [0, 1, 1, 0, 1, 0]), 0.5)
        self.assertEqual(auc([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1]), 0.75)
        self.assertEqual(auc([0.9, 0.1], [0, 1]), 0.0)

    def test_single_class(self):
        with self.assertRaises(MetricError) as ctx:
            auc([0.1, 0.7], [1, 1])
        self.assertIn('AUC undefined', str(ctx.exception))

    def test_length_mismatch(self):
        with self.assertRaises(MetricError):
            auc([0.1, 0.7, 0.2], [1, 0])

    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 51))
            labels = rng.integers(0, 2, size=n)
            labels[0], labels[1] = 0, 1
            # coarse scores so that ties occur
            scores = rng.integers(0, 8, size=n) / 8.0
            self.assertAlmostEqual(auc(scores, labels),
                                   _pairwise_auc(scores, labels),
                                   delta=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = rng.random(40)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        base = auc(scores, labels)
        self.assertEqual(auc(np.log(scores), labels), base)
        self.assertEqual(auc(scores ** 3 + 2.0, labels), base)


class ComputeMetricsTestCase(unittest.TestCase):
    '''
    TestCase for compute_metrics
    '''

    def test_clamped_logloss(self):
        metrics = compute_metrics([1.0], [1])
        self.assertIsNone(metrics.auc)
        self.assertAlmostEqual(metrics.logloss, -math.log(1.0 - 1e-7),
                               places=15)
        self.assertEqual(metrics.accuracy, 1.0)
        zero = compute_metrics([0.0], [1])
        self.assertAlmostEqual(zero.logloss, -math.log(1e-7))

    def test_scores_equal_truths(self):
        metrics = compute_metrics([1.0, 0.0, 1.0], [1, 0, 1])
        self.assertEqual(metrics.accuracy, 1.0)
        self.assertEqual(metrics.auc, 1.0)

    def test_three_records_by_hand(self):
        records = [PredictionRecord(1, 5, 0.8, 1),
                   PredictionRecord(2, 5, 0.5, 0),
                   PredictionRecord(3, 5, 0.3, 0)]
        metrics = records_metrics(records)
        self.assertEqual(metrics.auc, 1.0)
        # 0.5 counts as predicting 1
        self.assertAlmostEqual(metrics.accuracy, 2.0 / 3.0)
        expected = -(math.log(0.8) + math.log(0.5) + math.log(0.7)) / 3.0
        self.assertAlmostEqual(metrics.logloss, expected, places=12)

    def test_empty(self):
        with self.assertRaises(MetricError):
            compute_metrics([], [])


# Run unittests via main executable
if __name__ == '__main__':
    unittest.main()
