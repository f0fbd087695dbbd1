# test/unit/livekt_eval/bench_test.py
#

'''
Unit test module to perform testing on livekt_eval/bench.py
'''

# Import packages
import contextlib
import csv
import io
import os
import tempfile
import unittest

import numpy as np

from livekt_eval.bench import BENCH_CSV_HEADER, BenchResult, loglog_slope, \
    random_table, run_bench, write_bench_csv
from livekt_models.minipfn import MiniPFNConfig, init_weights


class BenchTestCase(unittest.TestCase):
    '''
    TestCase for the scaling benchmark
    '''

    def setUp(self):
        self.weights = init_weights(MiniPFNConfig(d_model=8, n_heads=2,
                                                  n_blocks=1, d_ff=8,
                                                  max_features=31))

    def test_slope(self):
        self.assertAlmostEqual(loglog_slope([1, 2, 4, 8], [3, 12, 48, 192]),
                               2.0)
        self.assertIsNone(loglog_slope([5], [1.0]))

    def test_random_table(self):
        table = random_table(np.random.default_rng(0), 12, 4)
        self.assertEqual(table.features().shape, (12, 11))
        self.assertTrue((table.features() > 0).all())

    def test_single_size_has_no_slope(self):
        with contextlib.redirect_stdout(io.StringIO()) as out:
            result = run_bench(self.weights, sizes=[16], T=5,
                               horizons=[5], n_fixed=16, repeats=1)
        self.assertEqual(len(result.points), 2)
        self.assertIsNone(result.slope_n)
        self.assertIn('not available', result.summary_lines()[0])
        self.assertEqual(len(out.getvalue().splitlines()), 2)

    def test_points_and_csv(self):
        with contextlib.redirect_stdout(io.StringIO()):
            result = run_bench(self.weights, sizes=[32, 16], T=4,
                               horizons=[6, 3], n_fixed=16, repeats=1)
        self.assertEqual([(p.axis, p.n_students, p.T) for p in result.points],
                         [('N', 16, 4), ('N', 32, 4), ('T', 16, 3),
                          ('T', 16, 6)])
        self.assertIsNotNone(result.slope_n)
        self.assertIsNotNone(result.slope_t)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bench.csv')
            write_bench_csv(result, path)
            with open(path) as f_in:
                rows = list(csv.reader(f_in))
        self.assertEqual(tuple(rows[0]), BENCH_CSV_HEADER)
        self.assertEqual(len(rows), 5)

    def test_summary_format(self):
        lines = BenchResult(slope_n=1.234, slope_t=None).summary_lines()
        self.assertTrue(lines[0].endswith('1.234'))
        self.assertTrue(lines[1].endswith('not available'))


# Run unittests via main executable
if __name__ == '__main__':
    unittest.main()
