# livekt_eval/metrics.py
#

'''
Binary classification metrics: rank AUC, accuracy and clamped log-loss
'''

# Import packages
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

# Probabilities are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] for log-loss
PROB_CLAMP = 1e-7


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    student_idx: int
    T: int
    score: float
    truth: int


@dataclass(frozen=True)
class Metrics:
    auc: object
    accuracy: float
    logloss: float


def auc(scores, labels):
    '''
    Function to compute the area under the ROC curve as the normalized
    Mann-Whitney statistic, ties receiving their average rank

    Parameters
    ----------
    :type scores: array-like
    :param scores: predicted probabilities
    :type labels: array-like
    :param labels: binary truths, same length

    Returns
    -------
    :return: auc : float
    '''

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise MetricError('scores and labels differ in length: {0} vs '
                          '{1}'.format(scores.shape, labels.shape))
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError('AUC undefined: labels contain a single class')

    ranks = rankdata(scores, method='average')
    rank_sum = float(np.sum(ranks[positive]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(scores, labels):
    '''
    Function to compute (auc, accuracy, logloss) over a non-empty set of
    predictions; auc is None when the labels are single-class

    Accuracy thresholds at 0.5 with a score of exactly 0.5 predicting 1.
    '''

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape[0] == 0:
        raise MetricError('no predictions to score')
    try:
        auc_value = auc(scores, labels)
    except MetricError:
        auc_value = None
    accuracy = float(np.mean((scores >= 0.5).astype(np.int64) == labels))
    clamped = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    logloss = float(-np.mean(np.where(labels == 1, np.log(clamped),
                                      np.log1p(-clamped))))
    return Metrics(auc=auc_value, accuracy=accuracy, logloss=logloss)


def records_metrics(records):
    '''
    compute_metrics over a list of PredictionRecord
    '''
    return compute_metrics([rec.score for rec in records],
                           [rec.truth for rec in records])
