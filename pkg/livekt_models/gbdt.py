# livekt_models/gbdt.py
#

'''
Histogram-based gradient boosted decision trees with logistic loss on
categorical features.

Every feature column is binned once on the train table: PAD gets bin 0,
the max_bins - 1 most frequent codes get their own bins and every other
code (including codes first seen at test time) shares the overflow bin.
Splits are category subsets found by ordering the bins of a node by
their gradient/hessian ratio and scanning prefixes.
'''

# Import packages
import logging
import os
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from scipy.special import expit

from livekt_data.container import WEIGHTS_MAGIC, Container, \
    ContainerFormatError, read_container, write_container
from livekt_data.data_model import PAD
from livekt_models.predictor import Predictor

logger = logging.getLogger(__name__)

# Splits must improve the objective by more than this
MIN_GAIN = 1e-12

# Floor on hessians once the sigmoid saturates
MIN_HESSIAN = 1e-16

# Probability clip used for the base score of one-class targets
BASE_EPS = 1e-7

GBDT_KIND = 'gbdt'


def get_num_threads():
    '''
    Worker thread cap from the LIVEKT_THREADS environment variable
    '''
    try:
        return max(1, int(os.environ.get('LIVEKT_THREADS', '1')))
    except ValueError:
        logger.warning('Ignoring non-integer LIVEKT_THREADS=%r',
                       os.environ.get('LIVEKT_THREADS'))
        return 1


@dataclass
class GBDTParams:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    min_samples_leaf: int = 20
    lambda_l2: float = 1.0
    max_bins: int = 255
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 1 or \
                self.learning_rate <= 0 or self.min_samples_leaf < 1 or \
                self.lambda_l2 < 0 or not 2 <= self.max_bins <= 255:
            raise ValueError('invalid GBDT parameters: {0}'.format(
                asdict(self)))


class BinMapper(object):
    '''
    Per-feature mapping from category codes to bin ids, fit on train
    codes only

    Attributes
    ----------
    max_bins : int
        dedicated bins are 1..max_bins-1, the overflow bin is max_bins
    n_bins : int
        total bin ids per feature including PAD and overflow
    '''

    def __init__(self, max_bins=255):
        self.max_bins = int(max_bins)
        self.n_bins = self.max_bins + 1
        self.overflow_bin = self.max_bins
        self.codes_ = []
        self.bins_ = []

    def fit(self, features):
        '''
        Learn the code -> bin maps from a (n_rows, n_features) matrix
        '''
        features = np.asarray(features)
        self.codes_ = []
        self.bins_ = []
        for col in features.T:
            codes, counts = np.unique(col[col != PAD], return_counts=True)
            # most frequent first, ties by smaller code
            order = np.lexsort((codes, -counts))[:self.max_bins - 1]
            kept = codes[order]
            sort = np.argsort(kept)
            self.codes_.append(kept[sort])
            self.bins_.append((np.arange(kept.shape[0]) + 1)[sort])
        return self

    def n_dedicated(self, feature):
        return int(self.codes_[feature].shape[0])

    def transform(self, features):
        '''
        Map codes to bins; returns a uint8 matrix of the same shape
        '''
        features = np.asarray(features)
        out = np.empty(features.shape, dtype=np.uint8)
        for f_idx, col in enumerate(features.T):
            codes = self.codes_[f_idx]
            binned = np.full(col.shape, self.overflow_bin, dtype=np.uint8)
            if codes.shape[0]:
                pos = np.minimum(np.searchsorted(codes, col),
                                 codes.shape[0] - 1)
                hit = codes[pos] == col
                binned[hit] = self.bins_[f_idx][pos[hit]]
            binned[col == PAD] = 0
            out[:, f_idx] = binned
        return out


def bin_features(train_table, max_bins=255):
    '''
    Function to fit a BinMapper on a train table and bin its features

    Returns
    -------
    :return: (binned, mapper) : (np.ndarray of uint8, BinMapper)
    '''
    feats = train_table.features()
    mapper = BinMapper(max_bins).fit(feats)
    return mapper.transform(feats), mapper


@dataclass
class Histogram:
    '''
    Per-feature, per-bin gradient sum, hessian sum and row count
    '''
    grad: np.ndarray
    hess: np.ndarray
    count: np.ndarray


def build_histogram(binned, gradients, hessians, n_bins, rows=None,
                    n_threads=1):
    '''
    Function to accumulate (G, H, count) per feature and bin for the rows
    of one node; features are split across threads and merged in feature
    order

    Parameters
    ----------
    :type binned: np.ndarray
    :param binned: (n_rows, n_features) bin ids
    :param gradients: (n_rows,) float64 gradients
    :param hessians: (n_rows,) float64 hessians
    :type n_bins: int
    :param n_bins: bin ids per feature
    :param rows: (optional), default=None (all rows)
        row indices of the node

    Returns
    -------
    :return: hist : Histogram
        arrays of shape (n_features, n_bins)
    '''
    if rows is not None:
        binned = binned[rows]
        gradients = gradients[rows]
        hessians = hessians[rows]
    n_rows, n_features = binned.shape

    def _block(lo, hi):
        width = hi - lo
        flat = (binned[:, lo:hi].astype(np.int64) +
                np.arange(width, dtype=np.int64) * n_bins).ravel()
        size = width * n_bins
        g = np.bincount(flat, weights=np.repeat(gradients, width),
                        minlength=size).reshape(width, n_bins)
        h = np.bincount(flat, weights=np.repeat(hessians, width),
                        minlength=size).reshape(width, n_bins)
        c = np.bincount(flat, minlength=size).reshape(width, n_bins)
        return g, h, c

    if n_threads <= 1 or n_features < 2:
        g, h, c = _block(0, n_features)
        return Histogram(g, h, c)

    bounds = np.linspace(0, n_features, min(n_threads, n_features) + 1)
    bounds = bounds.astype(int)
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(lambda lh: _block(*lh),
                              zip(bounds[:-1], bounds[1:])))
    return Histogram(np.concatenate([p[0] for p in parts]),
                     np.concatenate([p[1] for p in parts]),
                     np.concatenate([p[2] for p in parts]))


@dataclass
class SplitCandidate:
    feature: int
    left_bins: np.ndarray
    gain: float


def split_gain(g_left, h_left, g_right, h_right, lambda_l2):
    '''
    Second-order gain of splitting a node into (left, right)
    '''
    return (g_left ** 2 / (h_left + lambda_l2) +
            g_right ** 2 / (h_right + lambda_l2) -
            (g_left + g_right) ** 2 / (h_left + h_right + lambda_l2))


def best_split(hist, lambda_l2, min_samples_leaf=1):
    '''
    Function to find the best category-subset split of a node

    For each feature the observed bins are ordered by G/H (ties by bin
    id) and every prefix is tried as the left subset. The best gain wins;
    ties go to the lowest feature index, then to the smallest left
    subset.

    Parameters
    ----------
    :type hist: Histogram
    :param hist: node histogram
    :type lambda_l2: float
    :param lambda_l2: L2 penalty on leaf values
    :type min_samples_leaf: int
    :param min_samples_leaf: (optional), default=1

    Returns
    -------
    :return: split : SplitCandidate or None
        None means the node becomes a leaf
    '''
    grad, hess, count = hist.grad, hist.hess, hist.count
    n_features, n_bins = grad.shape
    observed = count > 0

    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(hess > 0, grad / hess, np.sign(grad) * np.inf)
    ratio = np.where(observed, ratio, 0.0)
    bin_ids = np.broadcast_to(np.arange(n_bins), grad.shape)
    # observed bins first, then by ratio, then by bin id
    order = np.lexsort((bin_ids, ratio, ~observed), axis=-1)

    g_sorted = np.take_along_axis(grad, order, axis=1)
    h_sorted = np.take_along_axis(hess, order, axis=1)
    c_sorted = np.take_along_axis(count, order, axis=1)
    g_left = np.cumsum(g_sorted, axis=1)[:, :-1]
    h_left = np.cumsum(h_sorted, axis=1)[:, :-1]
    c_left = np.cumsum(c_sorted, axis=1)[:, :-1]
    g_tot = grad.sum(axis=1, keepdims=True)
    h_tot = hess.sum(axis=1, keepdims=True)
    c_tot = count.sum(axis=1, keepdims=True)

    n_observed = observed.sum(axis=1, keepdims=True)
    prefix = np.arange(1, n_bins)[None, :]
    valid = ((prefix < n_observed) &
             (c_left >= min_samples_leaf) &
             (c_tot - c_left >= min_samples_leaf))

    with np.errstate(divide='ignore', invalid='ignore'):
        gains = split_gain(g_left, h_left, g_tot - g_left, h_tot - h_left,
                           lambda_l2)
    gains = np.where(valid & np.isfinite(gains), gains, -np.inf)

    best = gains.max() if gains.size else -np.inf
    if not best > MIN_GAIN:
        return None
    # argwhere is row-major: lowest feature, then shortest prefix
    feature, cut = np.argwhere(gains == best)[0]
    left_bins = np.sort(order[feature, :cut + 1])
    return SplitCandidate(feature=int(feature), left_bins=left_bins,
                          gain=float(best))


class Tree(object):
    '''
    Array-backed binary tree; feature == -1 marks a leaf
    '''

    def __init__(self, n_bins):
        self.n_bins = n_bins
        self.feature = []
        self.left_mask = []
        self.children = []
        self.value = []

    def add_node(self):
        self.feature.append(-1)
        self.left_mask.append(np.zeros(self.n_bins, dtype=bool))
        self.children.append([-1, -1])
        self.value.append(0.0)
        return len(self.feature) - 1

    def freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.left_mask = np.asarray(self.left_mask, dtype=bool)
        self.children = np.asarray(self.children, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        return self

    @property
    def n_nodes(self):
        return len(self.feature)

    def predict_binned(self, binned):
        '''
        Leaf value for every row of a binned matrix
        '''
        n_rows = binned.shape[0]
        node = np.zeros(n_rows, dtype=np.int64)
        rows = np.arange(n_rows)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            idx = rows[inner]
            go_left = self.left_mask[node[idx],
                                     binned[idx, feat[inner]]]
            node[idx] = np.where(go_left, self.children[node[idx], 0],
                                 self.children[node[idx], 1])
        return self.value[node]


@dataclass
class Ensemble:
    base_score: float
    trees: List[Tree]
    mapper: Optional[BinMapper]
    params: GBDTParams

    def raw_predict(self, features, n_trees=None):
        raw = np.full(features.shape[0], self.base_score, dtype=np.float64)
        if not self.trees:
            return raw
        binned = self.mapper.transform(features)
        for tree in self.trees[:n_trees]:
            raw += tree.predict_binned(binned)
        return raw

    def staged_raw_predict(self, features):
        '''
        Yield raw scores after 0, 1, ..., len(trees) trees
        '''
        raw = np.full(features.shape[0], self.base_score, dtype=np.float64)
        yield raw.copy()
        if self.trees:
            binned = self.mapper.transform(features)
            for tree in self.trees:
                raw += tree.predict_binned(binned)
                yield raw.copy()


def _grow_tree(binned, grad, hess, params, n_bins, n_threads):
    '''
    Level-wise growth to max_depth; returns a frozen Tree
    '''
    tree = Tree(n_bins)
    root = tree.add_node()
    frontier = [(root, np.arange(binned.shape[0]))]

    def _make_leaf(node, rows):
        g_sum = grad[rows].sum()
        h_sum = hess[rows].sum()
        tree.value[node] = -g_sum / (h_sum + params.lambda_l2) * \
            params.learning_rate

    for _ in range(params.max_depth):
        next_frontier = []
        for node, rows in frontier:
            if rows.shape[0] < 2 * params.min_samples_leaf:
                _make_leaf(node, rows)
                continue
            hist = build_histogram(binned, grad, hess, n_bins, rows=rows,
                                   n_threads=n_threads)
            split = best_split(hist, params.lambda_l2,
                               params.min_samples_leaf)
            if split is None:
                _make_leaf(node, rows)
                continue
            tree.feature[node] = split.feature
            tree.left_mask[node][split.left_bins] = True
            go_left = tree.left_mask[node][binned[rows, split.feature]]
            left, right = tree.add_node(), tree.add_node()
            tree.children[node] = [left, right]
            next_frontier.append((left, rows[go_left]))
            next_frontier.append((right, rows[~go_left]))
        frontier = next_frontier
    for node, rows in frontier:
        _make_leaf(node, rows)

    return tree.freeze()


def gbdt_fit(train_table, params=None):
    '''
    Function to fit a boosted ensemble on logistic loss

    Gradients are g = p - y and hessians h = p (1 - p); each leaf holds
    -G / (H + lambda_l2) * learning_rate.

    Parameters
    ----------
    :type train_table: livekt_data.encoding.EncodedTable
    :param train_table: labeled, non-empty table
    :type params: GBDTParams
    :param params: (optional), default=GBDTParams()

    Returns
    -------
    :return: ensemble : Ensemble
    '''

    params = params or GBDTParams()
    if train_table.n_rows == 0:
        raise ValueError('cannot fit GBDT on an empty table')

    labels = train_table.labels.astype(np.float64)
    rate = np.clip(labels.mean(), BASE_EPS, 1.0 - BASE_EPS)
    base_score = float(np.log(rate / (1.0 - rate)))
    if labels.min() == labels.max():
        logger.info('All train labels equal %d; fitting base score only',
                    int(labels[0]))
        return Ensemble(base_score, [], None, params)

    binned, mapper = bin_features(train_table, params.max_bins)
    n_threads = get_num_threads()
    raw = np.full(train_table.n_rows, base_score, dtype=np.float64)
    trees = []
    for _ in range(params.n_trees):
        prob = expit(raw)
        grad = prob - labels
        hess = np.maximum(prob * (1.0 - prob), MIN_HESSIAN)
        tree = _grow_tree(binned, grad, hess, params, mapper.n_bins,
                          n_threads)
        raw += tree.predict_binned(binned)
        trees.append(tree)

    return Ensemble(base_score, trees, mapper, params)


def gbdt_predict(ensemble, test_table):
    '''
    Function to return sigmoid(base + sum of tree outputs) per test row
    '''
    if test_table.n_rows == 0:
        return np.zeros(0, dtype=np.float64)
    return expit(ensemble.raw_predict(test_table.features()))


class GBDTPredictor(Predictor):
    '''
    From-scratch histogram GBDT; re-fit at every prepare()
    '''

    name = 'gbdt'

    def __init__(self, seed=0, **overrides):
        super().__init__(seed)
        self.params = GBDTParams(seed=int(seed), **overrides)
        self.ensemble = None

    def prepare(self, train_table):
        self.ensemble = gbdt_fit(train_table, self.params)
        self._remember(train_table)

    def predict(self, train_table, test_table):
        self._ensure_prepared(train_table)
        return gbdt_predict(self.ensemble, test_table)


class SklearnHGBPredictor(Predictor):
    '''
    Reference GBM: scikit-learn's HistGradientBoostingClassifier with
    every column declared categorical, on the same bin maps as the
    from-scratch GBDT
    '''

    name = 'sk_hgb'

    def __init__(self, seed=0, max_iter=100, max_depth=6, learning_rate=0.1,
                 min_samples_leaf=20, l2_regularization=1.0):
        super().__init__(seed)
        self.kwargs = dict(max_iter=int(max_iter), max_depth=int(max_depth),
                           learning_rate=float(learning_rate),
                           min_samples_leaf=int(min_samples_leaf),
                           l2_regularization=float(l2_regularization))
        self.mapper = None
        self.model = None
        self.constant = None

    def prepare(self, train_table):
        from sklearn.ensemble import HistGradientBoostingClassifier

        labels = train_table.labels
        self.constant = None
        self._remember(train_table)
        if labels.min() == labels.max():
            self.constant = float(labels[0])
            return
        feats = train_table.features()
        # categories must stay below 255 for sklearn
        self.mapper = BinMapper(max_bins=254).fit(feats)
        binned = self.mapper.transform(feats)
        self.model = HistGradientBoostingClassifier(
            categorical_features=np.ones(binned.shape[1], dtype=bool),
            max_bins=255, early_stopping=False, random_state=self.seed,
            **self.kwargs)
        self.model.fit(binned, labels)

    def predict(self, train_table, test_table):
        self._ensure_prepared(train_table)
        if self.constant is not None:
            return np.full(test_table.n_rows, self.constant)
        if test_table.n_rows == 0:
            return np.zeros(0, dtype=np.float64)
        binned = self.mapper.transform(test_table.features())
        return self.model.predict_proba(binned)[:, 1].astype(np.float64)


def ensemble_to_container(ensemble):
    '''
    Function to pack an Ensemble into an LKTW container; leaf values are
    stored in 32-bit precision
    '''
    tensors = OrderedDict()
    mapper = ensemble.mapper
    if mapper is not None:
        for f_idx, (codes, bins) in enumerate(zip(mapper.codes_,
                                                  mapper.bins_)):
            tensors['bins.{0}.codes'.format(f_idx)] = codes
            tensors['bins.{0}.ids'.format(f_idx)] = bins
    for t_idx, tree in enumerate(ensemble.trees):
        pre = 'tree.{0}.'.format(t_idx)
        tensors[pre + 'feature'] = tree.feature
        tensors[pre + 'left_mask'] = tree.left_mask
        tensors[pre + 'children'] = tree.children
        tensors[pre + 'value'] = tree.value
    metadata = {'base_score': ensemble.base_score,
                'params': asdict(ensemble.params),
                'n_trees': len(ensemble.trees),
                'n_features': 0 if mapper is None else len(mapper.codes_)}
    return Container(magic=WEIGHTS_MAGIC, kind=GBDT_KIND, metadata=metadata,
                     tensors=tensors)


def container_to_ensemble(container):
    if container.kind != GBDT_KIND:
        raise ContainerFormatError('container holds {0!r}, not a GBDT '
                                   'ensemble'.format(container.kind))
    meta = container.metadata
    tensors = container.tensors
    params = GBDTParams(**meta['params'])
    mapper = None
    if meta['n_trees']:
        mapper = BinMapper(params.max_bins)
        for f_idx in range(meta['n_features']):
            mapper.codes_.append(
                tensors['bins.{0}.codes'.format(f_idx)].astype(np.int64))
            mapper.bins_.append(
                tensors['bins.{0}.ids'.format(f_idx)].astype(np.int64))
    trees = []
    for t_idx in range(meta['n_trees']):
        pre = 'tree.{0}.'.format(t_idx)
        tree = Tree(mapper.n_bins)
        tree.feature = tensors[pre + 'feature'].astype(np.int64)
        tree.left_mask = tensors[pre + 'left_mask'].astype(bool)
        tree.children = tensors[pre + 'children'].astype(np.int64)
        tree.value = tensors[pre + 'value'].astype(np.float64)
        trees.append(tree)
    return Ensemble(float(meta['base_score']), trees, mapper, params)


def save_ensemble(ensemble, path):
    write_container(path, ensemble_to_container(ensemble))


def load_ensemble(path):
    return container_to_ensemble(read_container(path, WEIGHTS_MAGIC))
