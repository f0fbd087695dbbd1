# livekt_models/predictor.py
#

'''
This module defines the uniform predictor contract shared by every model
evaluated under the live protocol, and the majority floor baseline
'''

# Import packages
import abc
import logging

import numpy as np

logger = logging.getLogger(__name__)


class Predictor(abc.ABC):
    '''
    Uniform contract: prepare(train_table) is an optional training or
    caching step, predict(train_table, test_table) returns P(label=1) for
    every test row. Test tables never carry labels.

    Models with a training step re-run prepare() when predict() receives
    a train table other than the one last prepared, so predictions always
    come from the table passed in.

    Class attributes
    ----------------
    name : str
        registry name of the model
    is_in_context : bool
        True when prepare() is a no-op and predict() consumes the train
        table directly
    '''

    name = 'predictor'
    is_in_context = False

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._prepared_table = None

    @property
    def epochs(self):
        '''
        Passes over the train table made by the last prepare()
        '''
        return 1

    def prepare(self, train_table):
        return None

    def _remember(self, train_table):
        self._prepared_table = train_table

    def _ensure_prepared(self, train_table):
        if self._prepared_table is not train_table:
            self.prepare(train_table)

    @abc.abstractmethod
    def predict(self, train_table, test_table):
        '''
        Return a float64 array with one probability per test row
        '''

    def __repr__(self):
        return '{0}(name={1!r})'.format(type(self).__name__, self.name)


def last_question_rates(train_table):
    '''
    Function to count train labels per last-question code

    Returns
    -------
    :return: (codes, positives, totals, global_pos, global_total)
        codes sorted ascending, with per-code positive and total counts
    '''
    last_q = train_table.questions[:, -1]
    labels = train_table.labels
    codes, inverse = np.unique(last_q, return_inverse=True)
    totals = np.bincount(inverse, minlength=codes.shape[0])
    positives = np.bincount(inverse, weights=labels,
                            minlength=codes.shape[0])
    return codes, positives, totals, float(labels.sum()), len(labels)


def majority_predict(train_table, test_table, rates=None):
    '''
    Function to predict the Laplace-smoothed train success rate of the
    test row's last question, falling back to the smoothed global rate

    Parameters
    ----------
    :type train_table: livekt_data.encoding.EncodedTable
    :param train_table: labeled, non-empty context
    :type test_table: livekt_data.encoding.EncodedTable
    :param test_table: query rows
    :param rates: (optional), default=None
        precomputed output of last_question_rates

    Returns
    -------
    :return: probabilities : np.ndarray
    '''

    if train_table.n_rows == 0:
        raise ValueError('majority baseline needs a non-empty train table')
    codes, positives, totals, global_pos, global_total = \
        rates if rates is not None else last_question_rates(train_table)

    # Smoothed rates
    global_rate = (global_pos + 1.0) / (global_total + 2.0)
    per_code = (positives + 1.0) / (totals + 2.0)

    out = np.full(test_table.n_rows, global_rate, dtype=np.float64)
    if test_table.n_rows and codes.shape[0]:
        last_q = test_table.questions[:, -1]
        pos = np.searchsorted(codes, last_q)
        pos_clip = np.minimum(pos, codes.shape[0] - 1)
        seen = codes[pos_clip] == last_q
        out[seen] = per_code[pos_clip[seen]]
    return out


class MajorityPredictor(Predictor):
    '''
    Floor baseline conditioned on the last question of each row
    '''

    name = 'majority'

    def __init__(self, seed=0):
        super().__init__(seed)
        self._rates = None

    def prepare(self, train_table):
        self._rates = last_question_rates(train_table)
        self._remember(train_table)

    def predict(self, train_table, test_table):
        self._ensure_prepared(train_table)
        return majority_predict(train_table, test_table, self._rates)


class ConstantPredictor(Predictor):
    '''
    Label-free reference that scores every row with the same value
    '''

    name = 'constant'
    is_in_context = True

    def __init__(self, value=0.5, seed=0):
        super().__init__(seed)
        self.value = float(value)

    def predict(self, train_table, test_table):
        return np.full(test_table.n_rows, self.value, dtype=np.float64)
