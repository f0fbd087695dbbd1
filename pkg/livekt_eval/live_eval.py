# livekt_eval/live_eval.py
#

'''
The live evaluation protocol: at horizon T the train students are seen
up to their T-th interaction and the test students up to their (T-1)-th;
every model predicts the T-th answer of each test student.
'''

# Import packages
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from livekt_data.encoding import build_tables
from livekt_eval.metrics import PredictionRecord, compute_metrics

logger = logging.getLogger(__name__)

DEFAULT_HORIZONS = (5, 10, 15, 20)


class PredictionError(RuntimeError):
    pass


@dataclass(frozen=True)
class LiveSchedule:
    horizons: Tuple[int, ...] = DEFAULT_HORIZONS

    def __post_init__(self):
        horizons = tuple(int(T) for T in self.horizons)
        if not horizons:
            raise ValueError('schedule needs at least one horizon')
        if any(T < 2 for T in horizons):
            raise ValueError('every horizon must be >= 2, got {0}'.format(
                list(horizons)))
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ValueError('horizons must be strictly increasing, got '
                             '{0}'.format(list(horizons)))
        object.__setattr__(self, 'horizons', horizons)

    @classmethod
    def parse(cls, text):
        '''
        Build a schedule from a comma separated list such as "5,10,15,20"
        '''
        try:
            values = [int(tok) for tok in str(text).split(',') if tok.strip()]
        except ValueError:
            raise ValueError('horizons must be integers, got {0!r}'.format(
                text))
        return cls(tuple(values))


@dataclass
class EvalEntry:
    dataset: str
    model: str
    T: int
    auc: Optional[float]
    accuracy: float
    logloss: float
    n_test_rows: int
    fit_seconds: float
    predict_seconds: float
    epochs: int

    @property
    def total_seconds(self):
        return self.fit_seconds + self.predict_seconds


@dataclass
class EvalReport:
    '''
    Entries of every (model, T) cell in evaluation order
    '''
    entries: List[EvalEntry] = field(default_factory=list)

    def models(self):
        seen = []
        for entry in self.entries:
            if entry.model not in seen:
                seen.append(entry.model)
        return seen

    def horizons(self):
        return sorted({entry.T for entry in self.entries})

    def entry(self, model, T):
        for entry in self.entries:
            if entry.model == model and entry.T == T:
                return entry
        raise KeyError((model, T))

    def median_seconds(self, model):
        '''
        Median over T of fit + predict time for one model
        '''
        totals = [entry.total_seconds for entry in self.entries
                  if entry.model == model]
        if not totals:
            raise KeyError(model)
        return float(np.median(totals))

    def extend(self, other):
        self.entries.extend(other.entries)

    def to_dicts(self):
        return [asdict(entry) for entry in self.entries]


def check_scores(scores, n_rows, model):
    '''
    Function to validate a predictor's output and return it as float64
    '''
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] != n_rows:
        raise PredictionError('{0} returned {1} scores for {2} test '
                              'rows'.format(model, scores.size, n_rows))
    if np.isnan(scores).any():
        raise PredictionError('{0} returned NaN scores'.format(model))
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise PredictionError('{0} returned scores outside [0, 1]'.format(
            model))
    return scores


def run_live_eval(predictor, dataset, split, schedule=None, seed=0,
                  dataset_name='data'):
    '''
    Function to evaluate one predictor over a schedule of horizons

    Parameters
    ----------
    :type predictor: livekt_models.predictor.Predictor
    :param predictor: model under evaluation
    :type dataset: livekt_data.data_model.Dataset
    :param dataset: remapped interactions
    :type split: livekt_data.data_model.Split
    :param split: train/test student partition
    :type schedule: LiveSchedule
    :param schedule: (optional), default=LiveSchedule()
    :type seed: int
    :param seed: (optional), default=0
        logged with the run
    :type dataset_name: str
    :param dataset_name: (optional), default='data'

    Returns
    -------
    :return: (report, records) : tuple
        EvalReport with one entry per T and the list of PredictionRecord
    '''

    schedule = schedule or LiveSchedule()
    report = EvalReport()
    records = []
    logger.info('Evaluating %s on %s (seed %d) at T=%s', predictor.name,
                dataset_name, seed, list(schedule.horizons))

    for T in schedule.horizons:
        # encoding is part of the serving cost
        start = time.perf_counter()
        train_table, test_table = build_tables(dataset, split, T, T, T - 1)
        query = test_table.without_labels()
        encode_seconds = time.perf_counter() - start

        start = time.perf_counter()
        predictor.prepare(train_table)
        fit_seconds = time.perf_counter() - start

        start = time.perf_counter()
        scores = predictor.predict(train_table, query)
        predict_seconds = time.perf_counter() - start + encode_seconds

        scores = check_scores(scores, query.n_rows, predictor.name)
        labels = test_table.labels
        metrics = compute_metrics(scores, labels)
        if metrics.auc is None:
            logger.warning('%s at T=%d: test labels are single-class, AUC '
                           'unavailable', predictor.name, T)

        report.entries.append(EvalEntry(
            dataset=dataset_name, model=predictor.name, T=T,
            auc=metrics.auc, accuracy=metrics.accuracy,
            logloss=metrics.logloss, n_test_rows=query.n_rows,
            fit_seconds=fit_seconds, predict_seconds=predict_seconds,
            epochs=int(predictor.epochs)))
        records.extend(
            PredictionRecord(int(student), T, float(score), int(truth))
            for student, score, truth in zip(test_table.student_idx, scores,
                                             labels))
        logger.debug('%s T=%d auc=%s fit=%.4fs predict=%.4fs',
                     predictor.name, T, metrics.auc, fit_seconds,
                     predict_seconds)

    return report, records
