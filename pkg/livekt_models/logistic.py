# livekt_models/logistic.py
#

'''
Online logistic regression on hashed categorical features. Every
non-PAD cell of an encoded row contributes one slot chosen by a seeded
hash of (column index, category code); weights are updated by streaming
stochastic gradient descent.
'''

# Import packages
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from livekt_data.container import WEIGHTS_MAGIC, Container, \
    ContainerFormatError, read_container, write_container
from livekt_data.data_model import PAD
from livekt_models.hashing import hashed_slots
from livekt_models.predictor import Predictor

logger = logging.getLogger(__name__)

# Bound on predicted probabilities, keeps outputs inside (0, 1)
PROB_EPS = 1e-12
LR_KIND = 'lr'


class DivergenceError(RuntimeError):
    pass


@dataclass
class LRParams:
    lr: float = 0.1
    epochs: int = 3
    l2: float = 1e-6
    dim: int = 2 ** 18
    seed: int = 0
    decay: bool = True

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 0 or self.l2 < 0:
            raise ValueError('invalid LR hyperparameters: {0}'.format(
                asdict(self)))
        if self.dim <= 0 or self.dim & (self.dim - 1):
            raise ValueError('dim must be a power of two, got {0}'.format(
                self.dim))


@dataclass
class LRWeights:
    '''
    Weights plus the SGD position (step and completed epochs), so that
    fitting can continue where it stopped
    '''
    w: np.ndarray
    b: float = 0.0
    params: LRParams = field(default_factory=LRParams)
    step: int = 0
    epochs_done: int = 0

    @classmethod
    def zeros(cls, params):
        return cls(w=np.zeros(params.dim, dtype=np.float32), params=params)

    def copy(self):
        return LRWeights(self.w.copy(), self.b, self.params, self.step,
                         self.epochs_done)


def featurize(row_features, dim, seed):
    '''
    Function to hash one row's feature cells into sparse slot indices

    Parameters
    ----------
    :type row_features: np.ndarray
    :param row_features: (3T - 1,) category codes of one row
    :type dim: int
    :param dim: power-of-two slot count
    :type seed: int
    :param seed: hash seed

    Returns
    -------
    :return: slots : np.ndarray
        one slot per non-PAD cell, in column order
    '''
    row_features = np.asarray(row_features)
    columns = np.nonzero(row_features != PAD)[0]
    return hashed_slots(seed, columns, row_features[columns], dim)


def featurize_table(table, dim, seed):
    '''
    Hash every row of a table; returns (slots, offsets) in CSR layout
    '''
    feats = table.features()
    rows, columns = np.nonzero(feats != PAD)
    slots = hashed_slots(seed, columns, feats[rows, columns], dim)
    offsets = np.concatenate([[0], np.cumsum(
        np.bincount(rows, minlength=table.n_rows))]).astype(np.int64)
    return slots, offsets


def _margins(weights, slots, offsets):
    n_rows = offsets.shape[0] - 1
    contrib = weights.w[slots].astype(np.float64)
    rows = np.repeat(np.arange(n_rows), np.diff(offsets))
    return np.bincount(rows, weights=contrib, minlength=n_rows) + weights.b


def lr_loss(weights, table):
    '''
    L2-regularized mean log-loss of the weights on a labeled table
    '''
    slots, offsets = featurize_table(table, weights.params.dim,
                                     weights.params.seed)
    z = _margins(weights, slots, offsets)
    y = table.labels.astype(np.float64)
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0
    nll = np.logaddexp(0.0, np.where(y > 0, -z, z))
    w = weights.w.astype(np.float64)
    return float(nll.mean() + 0.5 * weights.params.l2 * np.dot(w, w))


def lr_fit(train_table, params=None, init=None):
    '''
    Function to fit logistic regression by streaming SGD

    Each step on row x with label y updates the active slots by
    w <- w - lr_t * ((sigmoid(w.x + b) - y) * x + l2 * w) and the bias by
    b <- b - lr_t * (sigmoid(w.x + b) - y), with lr_t = lr / sqrt(t) when
    decay is on. Rows are visited in a shuffled order drawn from
    (seed, epoch index), so continuing from init reproduces an
    uninterrupted run.

    Parameters
    ----------
    :type train_table: livekt_data.encoding.EncodedTable
    :param train_table: labeled, non-empty table
    :type params: LRParams
    :param params: (optional), default=LRParams()
    :type init: LRWeights
    :param init: (optional), default=None
        weights to continue from (online mode)

    Returns
    -------
    :return: weights : LRWeights
    '''

    if train_table.n_rows == 0:
        raise ValueError('cannot fit logistic regression on an empty table')
    if init is not None:
        params = init.params
        weights = init.copy()
    else:
        params = params or LRParams()
        weights = LRWeights.zeros(params)

    # Init variables
    slots, offsets = featurize_table(train_table, params.dim, params.seed)
    labels = train_table.labels.astype(np.float64)
    w = weights.w
    b = float(weights.b)
    step = weights.step

    for _ in range(params.epochs):
        rng = np.random.default_rng([params.seed, weights.epochs_done])
        for row in rng.permutation(train_table.n_rows):
            step += 1
            lr_t = params.lr / np.sqrt(step) if params.decay else params.lr
            uniq, counts = np.unique(slots[offsets[row]:offsets[row + 1]],
                                     return_counts=True)
            w_u = w[uniq].astype(np.float64)
            grad = expit(np.dot(w_u, counts) + b) - labels[row]
            new_w = w_u - lr_t * (grad * counts + params.l2 * w_u)
            b -= lr_t * grad
            if not (np.all(np.isfinite(new_w)) and np.isfinite(b)):
                raise DivergenceError(
                    'logistic regression diverged at step {0} (epoch '
                    '{1}, row {2})'.format(step, weights.epochs_done, row))
            w[uniq] = new_w
        weights.epochs_done += 1

    weights.b = b
    weights.step = step
    return weights


def lr_predict(weights, test_table):
    '''
    Function to score a table with sigmoid(w.x + b), bounded to the open
    interval (0, 1)
    '''
    if test_table.n_rows == 0:
        return np.zeros(0, dtype=np.float64)
    slots, offsets = featurize_table(test_table, weights.params.dim,
                                     weights.params.seed)
    probs = expit(_margins(weights, slots, offsets))
    return np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)


class LogisticRegressionPredictor(Predictor):
    '''
    Hashed logistic regression; re-fits from scratch at every prepare()
    unless warm_start is set, in which case SGD continues from the
    weights of the previous call
    '''

    name = 'lr'

    def __init__(self, lr=0.1, epochs=3, l2=1e-6, dim=2 ** 18, seed=0,
                 decay=True, warm_start=False):
        super().__init__(seed)
        self.params = LRParams(lr=float(lr), epochs=int(epochs),
                               l2=float(l2), dim=int(dim), seed=int(seed),
                               decay=bool(decay))
        self.warm_start = bool(warm_start)
        self.weights = None

    @property
    def epochs(self):
        return self.params.epochs

    def prepare(self, train_table):
        init = self.weights if self.warm_start else None
        self.weights = lr_fit(train_table, self.params, init=init)
        self._remember(train_table)

    def predict(self, train_table, test_table):
        self._ensure_prepared(train_table)
        return lr_predict(self.weights, test_table)


def lr_to_container(weights):
    '''
    Function to pack LR weights and their SGD position into an LKTW
    container
    '''
    return Container(magic=WEIGHTS_MAGIC, kind=LR_KIND,
                     metadata={'b': float(weights.b),
                               'params': asdict(weights.params),
                               'step': int(weights.step),
                               'epochs_done': int(weights.epochs_done)},
                     tensors=OrderedDict([('w', weights.w)]))


def container_to_lr(container):
    if container.kind != LR_KIND:
        raise ContainerFormatError('container holds {0!r}, not logistic '
                                   'regression weights'.format(container.kind))
    meta = container.metadata
    return LRWeights(w=container.tensors['w'].astype(np.float32),
                     b=float(meta['b']), params=LRParams(**meta['params']),
                     step=int(meta['step']),
                     epochs_done=int(meta['epochs_done']))


def save_lr_weights(weights, path):
    write_container(path, lr_to_container(weights))


def load_lr_weights(path):
    return container_to_lr(read_container(path, WEIGHTS_MAGIC))
