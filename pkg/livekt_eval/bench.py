# livekt_eval/bench.py
#

'''
Scaling benchmark of in-context prediction time against the number of
students N (fixed T) and against the horizon T (fixed N)
'''

# Import packages
import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import linregress

from livekt_data.container import atomic_write_bytes
from livekt_data.encoding import EncodedTable
from livekt_models.minipfn import predict_in_context

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (128, 256, 512, 1024)
BENCH_CSV_HEADER = ('axis', 'n_students', 'T', 'median_seconds')


@dataclass
class BenchPoint:
    axis: str
    n_students: int
    T: int
    median_seconds: float


@dataclass
class BenchResult:
    points: List[BenchPoint] = field(default_factory=list)
    slope_n: Optional[float] = None
    slope_t: Optional[float] = None

    def summary_lines(self):
        def _fmt(value):
            return 'not available' if value is None else \
                '{0:.3f}'.format(value)
        return ['log-log slope of predict time vs N = {0}'.format(
                    _fmt(self.slope_n)),
                'log-log slope of predict time vs T = {0}'.format(
                    _fmt(self.slope_t))]


def random_table(rng, n_rows, T, n_codes=100):
    '''
    Function to draw a fully observed labeled table with uniform codes
    '''
    return EncodedTable(
        T=T,
        student_idx=np.arange(1, n_rows + 1, dtype=np.int64),
        questions=rng.integers(1, n_codes + 1, size=(n_rows, T),
                               dtype=np.int32),
        skills=rng.integers(1, n_codes // 4 + 2, size=(n_rows, T),
                            dtype=np.int32),
        past_correct=rng.integers(1, 3, size=(n_rows, T - 1), dtype=np.int32),
        labels=rng.integers(0, 2, size=n_rows, dtype=np.int32),
        observed_len=np.full(n_rows, T, dtype=np.int32))


def loglog_slope(xs, ys):
    '''
    Slope of log(y) against log(x), or None with fewer than two points
    '''
    if len(xs) < 2:
        return None
    return float(linregress(np.log(xs), np.log(ys)).slope)


def time_prediction(weights, n_students, T, repeats=5, seed=0):
    '''
    Function to return the median wall time of predict_in_context for
    n_students train rows and n_students // 4 test rows
    '''
    rng = np.random.default_rng([int(seed), n_students, T])
    train = random_table(rng, n_students, T)
    test = random_table(rng, max(1, n_students // 4), T).without_labels()
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        predict_in_context(weights, train, test)
        timings.append(time.perf_counter() - start)
    return float(np.median(timings))


def run_bench(weights, sizes=DEFAULT_SIZES, T=10, horizons=(5, 10, 15, 20),
              n_fixed=256, repeats=5, seed=0):
    '''
    Function to time predict_in_context across sizes (at horizon T) and
    across horizons (at n_fixed students)

    Returns
    -------
    :return: result : BenchResult
    '''
    result = BenchResult()
    sizes = sorted(set(int(n) for n in sizes))
    horizons = sorted(set(int(h) for h in horizons))
    for n_students in sizes:
        seconds = time_prediction(weights, n_students, T, repeats, seed)
        result.points.append(BenchPoint('N', n_students, T, seconds))
        print('N={0:<6d} T={1:<3d} {2:.5f}s'.format(n_students, T, seconds))
    for horizon in horizons:
        seconds = time_prediction(weights, n_fixed, horizon, repeats, seed)
        result.points.append(BenchPoint('T', n_fixed, horizon, seconds))
        print('N={0:<6d} T={1:<3d} {2:.5f}s'.format(n_fixed, horizon,
                                                   seconds))

    by_n = [p for p in result.points if p.axis == 'N']
    by_t = [p for p in result.points if p.axis == 'T']
    result.slope_n = loglog_slope([p.n_students for p in by_n],
                                  [p.median_seconds for p in by_n])
    result.slope_t = loglog_slope([p.T for p in by_t],
                                  [p.median_seconds for p in by_t])
    return result


def write_bench_csv(result, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(BENCH_CSV_HEADER)
    for point in result.points:
        writer.writerow([point.axis, point.n_students, point.T,
                         repr(point.median_seconds)])
    atomic_write_bytes(path, buf.getvalue().encode('utf-8'))
