# livekt_models/minipfn.py
#

'''
MiniPFN: a small two-way attention transformer that predicts the label
column of test rows from a labeled train table given at inference time.

Every cell of a row (q1..qT, s1..sT, c1..c(T-1) and one label cell) holds
a d_model state. Each block runs
    (a) feature attention across the cells of each row,
    (b) row attention across students within each column, where every
        row (train or test) attends to train rows only,
then a layer norm, a per-cell feed-forward layer and a second layer norm.
The test label cell starts as a mask token; its final state is decoded
into two logits.

Forward and backward passes are written by hand on numpy arrays and run
in the dtype of the weights (float32 for inference and training, float64
for gradient checks).
'''

# Import packages
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from livekt_data.data_model import PAD
from livekt_data.encoding import column_families
from livekt_models.hashing import hashed_unit_vectors
from livekt_models.predictor import Predictor

logger = logging.getLogger(__name__)

LN_EPS = 1e-5
# reported probabilities stay inside the open unit interval
PROB_EPS = 1e-12
_GELU_C = math.sqrt(2.0 / math.pi)


class NonFiniteActivationError(RuntimeError):
    pass


@dataclass
class MiniPFNConfig:
    d_model: int = 64
    n_heads: int = 4
    n_blocks: int = 3
    d_ff: int = 128
    max_features: int = 64
    value_hash_seed: int = 0x5EED
    dropout: float = 0.0
    # attention score elements materialized at once when no cache is kept
    attn_budget: int = 1 << 24

    def __post_init__(self):
        if self.d_model <= 0 or self.n_heads <= 0 or \
                self.d_model % self.n_heads:
            raise ValueError('d_model ({0}) must be a positive multiple of '
                             'n_heads ({1})'.format(self.d_model,
                                                    self.n_heads))
        if self.n_blocks < 0 or self.d_ff <= 0:
            raise ValueError('n_blocks must be >= 0 and d_ff > 0')
        if self.max_features < 7:
            raise ValueError('max_features must allow at least T=2')
        if self.dropout != 0.0:
            raise ValueError('dropout is not supported; use 0.0')

    @property
    def d_head(self):
        return self.d_model // self.n_heads

    @property
    def max_horizon(self):
        '''
        Largest T whose table fits: 3T cells plus the label cell
        '''
        return (self.max_features - 1) // 3

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)


def parameter_shapes(config):
    '''
    Function to list parameter names and shapes in canonical order
    '''
    d, f = config.d_model, config.d_ff
    shapes = OrderedDict([
        ('embed.value_mix', (d, d)),
        ('embed.pad', (d,)),
        ('embed.position', (config.max_features, d)),
        ('embed.label', (2, d)),
        ('embed.mask', (d,)),
    ])
    for blk in range(config.n_blocks):
        pre = 'blocks.{0}.'.format(blk)
        for attn in ('feature_attn', 'row_attn'):
            for proj in ('wq', 'wk', 'wv', 'wo'):
                shapes[pre + attn + '.' + proj] = (d, d)
        for norm in ('ln1', 'ln2'):
            shapes[pre + norm + '.gain'] = (d,)
            shapes[pre + norm + '.bias'] = (d,)
        shapes[pre + 'ff.w1'] = (d, f)
        shapes[pre + 'ff.b1'] = (f,)
        shapes[pre + 'ff.w2'] = (f, d)
        shapes[pre + 'ff.b2'] = (d,)
    shapes['head.weight'] = (d, 2)
    shapes['head.bias'] = (2,)
    return shapes


class MiniPFNWeights(object):
    '''
    Named parameter arrays of a MiniPFN plus its config
    '''

    def __init__(self, config, params):
        self.config = config
        self.params = OrderedDict(params)
        expected = parameter_shapes(config)
        if list(expected) != list(self.params):
            missing = set(expected) ^ set(self.params)
            raise ValueError('parameter names do not match the config: '
                             '{0}'.format(sorted(missing)[:5]))
        for name, shape in expected.items():
            if tuple(self.params[name].shape) != shape:
                raise ValueError('parameter {0} has shape {1}, expected '
                                 '{2}'.format(name, self.params[name].shape,
                                              shape))

    def __getitem__(self, name):
        return self.params[name]

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def names(self):
        return list(self.params)

    def astype(self, dtype):
        return MiniPFNWeights(self.config, OrderedDict(
            (name, arr.astype(dtype)) for name, arr in self.params.items()))

    def copy(self):
        return self.astype(self.dtype)

    def all_finite(self):
        return all(np.all(np.isfinite(arr)) for arr in self.params.values())

    def n_parameters(self):
        return int(sum(arr.size for arr in self.params.values()))


def init_weights(config, seed=0, dtype=np.float32):
    '''
    Function to draw initial MiniPFN weights from a seed

    Projections are scaled by 1/sqrt(fan_in); the output head starts
    small so that initial predictions sit near 0.5.
    '''
    rng = np.random.default_rng(seed)
    params = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        leaf = name.rsplit('.', 1)[-1]
        if leaf == 'gain':
            arr = np.ones(shape)
        elif leaf in ('bias', 'b1', 'b2'):
            arr = np.zeros(shape)
        elif name == 'head.weight':
            arr = rng.normal(0.0, 0.02, shape)
        elif name in ('embed.pad', 'embed.mask', 'embed.label'):
            arr = rng.normal(0.0, 0.5, shape)
        elif name == 'embed.position':
            arr = rng.normal(0.0, 0.1, shape)
        else:
            arr = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), shape)
        params[name] = arr.astype(dtype)
    return MiniPFNWeights(config, params)


@dataclass
class AttentionRecord:
    '''
    Row attention of each test row over train rows at the label column,
    averaged over heads and blocks; every row sums to 1
    '''
    weights: np.ndarray
    train_students: np.ndarray
    test_students: np.ndarray


@dataclass
class ForwardResult:
    probs: np.ndarray
    logits: np.ndarray
    attention: AttentionRecord
    cache: Optional[dict] = field(default=None, repr=False)


def position_ids(T, config):
    '''
    Position of every feature column plus the label cell; positions are
    indexed by (family, distance from the right edge) so they do not
    depend on T
    '''
    if T < 2 or T > config.max_horizon:
        raise ValueError(
            'table width {0} (+1 label cell) exceeds max_features={1}; '
            'largest supported T is {2}'.format(3 * T - 1,
                                                config.max_features,
                                                config.max_horizon))
    families, offsets = column_families(T)
    pos = families * config.max_horizon + offsets
    return np.concatenate([pos, [config.max_features - 1]]).astype(np.int64)


# ---------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------

def _softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    expo = np.exp(shifted)
    return expo / expo.sum(axis=-1, keepdims=True)


def _split_heads(x, n_heads):
    # (..., L, d) -> (..., h, L, d_head)
    shape = x.shape
    x = x.reshape(shape[:-1] + (n_heads, shape[-1] // n_heads))
    return np.swapaxes(x, -3, -2)


def _merge_heads(x):
    # (..., h, L, d_head) -> (..., L, d)
    x = np.swapaxes(x, -3, -2)
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def _attention_core(xq, xkv, wq, wk, wv, wo, n_heads):
    scale = 1.0 / math.sqrt(wq.shape[1] // n_heads)
    q = _split_heads(xq @ wq, n_heads)
    k = _split_heads(xkv @ wk, n_heads)
    v = _split_heads(xkv @ wv, n_heads)
    probs = _softmax((q @ np.swapaxes(k, -1, -2)) * q.dtype.type(scale))
    out = _merge_heads(probs @ v)
    return out @ wo, probs, (xq, xkv, q, k, v, probs, out)


def attention_forward(weights, prefix, xq, xkv, keep_cache, probe=None):
    '''
    Function to run multi-head attention of queries xq over keys/values
    xkv; leading batch dimensions broadcast

    Without a cache the first batch axis is processed in chunks so that
    at most config.attn_budget score elements exist at once.

    Parameters
    ----------
    :param weights: MiniPFNWeights
    :param prefix: parameter prefix, e.g. 'blocks.0.row_attn'
    :param xq: (..., Lq, d) query states
    :param xkv: (..., Lk, d) key/value states
    :param keep_cache: keep intermediates for backward()
    :param probe: (optional) callable applied to each chunk of attention
        probabilities; results are concatenated along axis 0

    Returns
    -------
    :return: (out, probed, cache)
    '''
    config = weights.config
    mats = [weights[prefix + '.' + p] for p in ('wq', 'wk', 'wv', 'wo')]
    n_heads = config.n_heads

    if keep_cache:
        out, probs, cache = _attention_core(xq, xkv, *mats, n_heads)
        probed = probe(probs) if probe is not None else None
        return out, probed, cache

    batch = np.broadcast_shapes(xq.shape[:-2], xkv.shape[:-2])
    if not batch:
        out, probs, _ = _attention_core(xq, xkv, *mats, n_heads)
        return out, (probe(probs) if probe is not None else None), None
    per_item = int(np.prod(batch[1:], dtype=np.int64)) * n_heads * \
        xq.shape[-2] * xkv.shape[-2]
    chunk = max(1, config.attn_budget // max(per_item, 1))
    outs, probed = [], []
    for lo in range(0, batch[0], chunk):
        q_part = xq[lo:lo + chunk] if xq.shape[0] > 1 else xq
        kv_part = xkv[lo:lo + chunk] if xkv.shape[0] > 1 else xkv
        out, probs, _ = _attention_core(q_part, kv_part, *mats, n_heads)
        outs.append(out)
        if probe is not None:
            probed.append(probe(probs))
    out = np.concatenate(outs, axis=0)
    return out, (np.concatenate(probed, axis=0) if probe else None), None


def attention_backward(weights, prefix, d_out, cache, grads):
    '''
    Function to backpropagate through attention_forward; accumulates
    projection gradients into grads and returns (d_xq, d_xkv)
    '''
    n_heads = weights.config.n_heads
    wq, wk, wv, wo = [weights[prefix + '.' + p]
                      for p in ('wq', 'wk', 'wv', 'wo')]
    xq, xkv, q, k, v, probs, out = cache
    scale = q.dtype.type(1.0 / math.sqrt(q.shape[-1]))

    grads[prefix + '.wo'] += _flat(out).T @ _flat(d_out)
    d_o = _split_heads(d_out @ wo.T, n_heads)
    d_p = d_o @ np.swapaxes(v, -1, -2)
    d_v = _unbroadcast(np.swapaxes(probs, -1, -2) @ d_o, v.shape)
    d_s = probs * (d_p - np.sum(d_p * probs, axis=-1, keepdims=True)) * scale
    d_q = _unbroadcast(d_s @ k, q.shape)
    d_k = _unbroadcast(np.swapaxes(d_s, -1, -2) @ q, k.shape)

    d_q, d_k, d_v = _merge_heads(d_q), _merge_heads(d_k), _merge_heads(d_v)
    grads[prefix + '.wq'] += _flat(xq).T @ _flat(d_q)
    grads[prefix + '.wk'] += _flat(xkv).T @ _flat(d_k)
    grads[prefix + '.wv'] += _flat(xkv).T @ _flat(d_v)
    return d_q @ wq.T, d_k @ wk.T + d_v @ wv.T


def layer_norm_forward(x, gain, bias):
    centered = x - x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1,
                                                       keepdims=True)
                            + x.dtype.type(LN_EPS))
    x_hat = centered * inv_std
    return x_hat * gain + bias, (x_hat, inv_std)


def layer_norm_backward(d_y, cache, gain):
    x_hat, inv_std = cache
    d_gain = _flat(d_y * x_hat).sum(axis=0)
    d_bias = _flat(d_y).sum(axis=0)
    d_xhat = d_y * gain
    d_x = inv_std * (d_xhat - d_xhat.mean(axis=-1, keepdims=True) -
                     x_hat * (d_xhat * x_hat).mean(axis=-1, keepdims=True))
    return d_x, d_gain, d_bias


def gelu_forward(x):
    inner = x.dtype.type(_GELU_C) * (x + x.dtype.type(0.044715) * x ** 3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_backward(d_y, x):
    inner = x.dtype.type(_GELU_C) * (x + x.dtype.type(0.044715) * x ** 3)
    t = np.tanh(inner)
    d_inner = x.dtype.type(_GELU_C) * (1.0 + x.dtype.type(3 * 0.044715) *
                                       x * x)
    return d_y * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner)


# ---------------------------------------------------------------------
# model
# ---------------------------------------------------------------------

def _cell_inputs(weights, train_table, test_table):
    if train_table.T != test_table.T:
        raise ValueError('train and test tables must share T (got {0} and '
                         '{1})'.format(train_table.T, test_table.T))
    if train_table.labels is None:
        raise ValueError('the train table must carry labels')
    pos = position_ids(train_table.T, weights.config)
    feats = np.concatenate([train_table.features(), test_table.features()],
                           axis=0)
    return feats, train_table.labels.astype(np.int64), pos


def embed_cells(weights, train_table, test_table, keep_cache=False):
    '''
    Function to compute the initial state of every cell

    Real codes are mapped to hashed unit vectors of (column family,
    code), mixed by embed.value_mix; PAD cells use embed.pad. Every cell
    adds the embedding of its position. The label cell holds the label
    embedding for train rows and the mask token for test rows.

    Returns
    -------
    :return: (states, cache)
        states has shape (n_train + n_test, 3T, d_model), train rows
        first
    '''
    config = weights.config
    dtype = weights.dtype
    feats, labels, pos = _cell_inputs(weights, train_table, test_table)
    n_train = labels.shape[0]
    n_rows, n_feat = feats.shape
    d = config.d_model

    families = np.broadcast_to(column_families(train_table.T)[0],
                               feats.shape)
    real = feats != PAD
    keys = families[real].astype(np.int64) * (1 << 32) + feats[real]
    uniq, inverse = np.unique(keys, return_inverse=True)
    vecs = hashed_unit_vectors(config.value_hash_seed, uniq >> 32,
                               uniq & 0xffffffff, d, dtype=dtype)
    hashed = np.zeros((n_rows, n_feat, d), dtype=dtype)
    hashed[real] = vecs[inverse]

    # stacked per-row products keep each row independent of the others
    cells = hashed @ weights['embed.value_mix']
    cells[~real] = weights['embed.pad']
    label_cell = np.empty((n_rows, 1, d), dtype=dtype)
    label_cell[:n_train, 0] = weights['embed.label'][labels]
    label_cell[n_train:, 0] = weights['embed.mask']
    states = np.concatenate([cells, label_cell], axis=1) + \
        weights['embed.position'][pos]

    cache = None
    if keep_cache:
        cache = {'real': real, 'hashed': hashed, 'pos': pos,
                 'labels': labels}
    return states, cache


def _embed_backward(weights, d_states, cache, grads):
    real, hashed, pos, labels = (cache['real'], cache['hashed'],
                                 cache['pos'], cache['labels'])
    n_train = labels.shape[0]
    grads['embed.position'][pos] += d_states.sum(axis=0)
    d_cells = d_states[:, :-1, :]
    grads['embed.value_mix'] += _flat(hashed).T @ _flat(d_cells)
    grads['embed.pad'] += d_cells[~real].sum(axis=0)
    np.add.at(grads['embed.label'], labels, d_states[:n_train, -1, :])
    grads['embed.mask'] += d_states[n_train:, -1, :].sum(axis=0)


def _label_probe(probs):
    # (m, C, h, 1, N) -> head-averaged attention at the label column
    return probs[:, -1, :, 0, :].astype(np.float64).mean(axis=1)


def _block_forward(weights, blk, x, n_train, keep_cache):
    pre = 'blocks.{0}.'.format(blk)

    # (a) feature attention inside each row
    fa_out, _, fa_cache = attention_forward(weights, pre + 'feature_attn',
                                            x, x, keep_cache)
    a = x + fa_out

    # (b) row attention inside each column, keys from train rows only
    a_train = np.swapaxes(a[:n_train], 0, 1)
    ra_train, _, ra_train_cache = attention_forward(
        weights, pre + 'row_attn', a_train, a_train, keep_cache)
    parts = [np.swapaxes(ra_train, 0, 1)]
    label_attn = None
    ra_test_cache = None
    if a.shape[0] > n_train:
        a_test = a[n_train:][:, :, None, :]
        ra_test, label_attn, ra_test_cache = attention_forward(
            weights, pre + 'row_attn', a_test, a_train[None], keep_cache,
            probe=_label_probe)
        parts.append(ra_test[:, :, 0, :])
    b_pre = a + np.concatenate(parts, axis=0)

    # norm, feed-forward, norm
    b, ln1_cache = layer_norm_forward(b_pre, weights[pre + 'ln1.gain'],
                                      weights[pre + 'ln1.bias'])
    f1 = b @ weights[pre + 'ff.w1'] + weights[pre + 'ff.b1']
    g = gelu_forward(f1)
    c_pre = b + g @ weights[pre + 'ff.w2'] + weights[pre + 'ff.b2']
    out, ln2_cache = layer_norm_forward(c_pre, weights[pre + 'ln2.gain'],
                                        weights[pre + 'ln2.bias'])

    if not np.all(np.isfinite(out)):
        raise NonFiniteActivationError(
            'non-finite activation in block {0}'.format(blk))

    cache = None
    if keep_cache:
        cache = {'fa': fa_cache, 'ra_train': ra_train_cache,
                 'ra_test': ra_test_cache, 'ln1': ln1_cache,
                 'ln2': ln2_cache, 'b': b, 'f1': f1, 'g': g}
    return out, label_attn, cache


def _block_backward(weights, blk, d_out, n_train, cache, grads):
    pre = 'blocks.{0}.'.format(blk)

    d_cpre, d_gain, d_bias = layer_norm_backward(
        d_out, cache['ln2'], weights[pre + 'ln2.gain'])
    grads[pre + 'ln2.gain'] += d_gain
    grads[pre + 'ln2.bias'] += d_bias

    grads[pre + 'ff.w2'] += _flat(cache['g']).T @ _flat(d_cpre)
    grads[pre + 'ff.b2'] += _flat(d_cpre).sum(axis=0)
    d_f1 = gelu_backward(d_cpre @ weights[pre + 'ff.w2'].T, cache['f1'])
    grads[pre + 'ff.w1'] += _flat(cache['b']).T @ _flat(d_f1)
    grads[pre + 'ff.b1'] += _flat(d_f1).sum(axis=0)
    d_b = d_cpre + d_f1 @ weights[pre + 'ff.w1'].T

    d_bpre, d_gain, d_bias = layer_norm_backward(
        d_b, cache['ln1'], weights[pre + 'ln1.gain'])
    grads[pre + 'ln1.gain'] += d_gain
    grads[pre + 'ln1.bias'] += d_bias

    # row attention: residual plus both query paths
    d_a = d_bpre.copy()
    d_q_train, d_kv_train = attention_backward(
        weights, pre + 'row_attn', np.swapaxes(d_bpre[:n_train], 0, 1),
        cache['ra_train'], grads)
    d_a_train = d_q_train + d_kv_train
    if cache['ra_test'] is not None:
        d_q_test, d_kv_test = attention_backward(
            weights, pre + 'row_attn', d_bpre[n_train:][:, :, None, :],
            cache['ra_test'], grads)
        d_a_train = d_a_train + _unbroadcast(d_kv_test, d_a_train.shape)
        d_a[n_train:] += d_q_test[:, :, 0, :]
    d_a[:n_train] += np.swapaxes(d_a_train, 0, 1)

    # feature attention
    d_q, d_kv = attention_backward(weights, pre + 'feature_attn', d_a,
                                   cache['fa'], grads)
    return d_a + d_q + d_kv


def forward(weights, train_table, test_table, keep_cache=False):
    '''
    Function to run MiniPFN on a labeled train table and a test table

    Parameters
    ----------
    :type weights: MiniPFNWeights
    :param weights: model parameters
    :type train_table: livekt_data.encoding.EncodedTable
    :param train_table: labeled context rows
    :type test_table: livekt_data.encoding.EncodedTable
    :param test_table: query rows (labels ignored)
    :type keep_cache: bool
    :param keep_cache: (optional), default=False
        keep intermediates for backward()

    Returns
    -------
    :return: result : ForwardResult
        probs holds p(label = 1) per test row
    '''
    config = weights.config
    n_train = train_table.n_rows
    n_test = test_table.n_rows
    if n_train == 0:
        raise ValueError('MiniPFN needs at least one train row')
    record_students = (np.asarray(train_table.student_idx),
                       np.asarray(test_table.student_idx))
    if n_test == 0:
        empty = AttentionRecord(np.zeros((0, n_train)), *record_students)
        return ForwardResult(np.zeros(0), np.zeros((0, 2)), empty, None)

    x, embed_cache = embed_cells(weights, train_table, test_table,
                                 keep_cache)
    block_caches = []
    attn_sum = np.zeros((n_test, n_train), dtype=np.float64)
    for blk in range(config.n_blocks):
        x, label_attn, cache = _block_forward(weights, blk, x, n_train,
                                              keep_cache)
        attn_sum += label_attn
        block_caches.append(cache)
    if config.n_blocks:
        attn = attn_sum / config.n_blocks
    else:
        attn = np.full((n_test, n_train), 1.0 / n_train)

    head_in = x[n_train:, -1, :]
    logits = (head_in[:, None, :] @ weights['head.weight'])[:, 0, :] + \
        weights['head.bias']
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivationError('non-finite logits in output head')
    probs2 = _softmax(logits.astype(np.float64))

    cache = None
    if keep_cache:
        cache = {'embed': embed_cache, 'blocks': block_caches,
                 'head_in': head_in, 'probs2': probs2, 'n_train': n_train,
                 'n_rows': x.shape[0], 'n_cells': x.shape[1]}
    probs = np.clip(probs2[:, 1], PROB_EPS, 1.0 - PROB_EPS)
    return ForwardResult(probs=probs, logits=logits,
                         attention=AttentionRecord(attn, *record_students),
                         cache=cache)


def cross_entropy(result, labels):
    '''
    Mean cross-entropy of the test predictions of a ForwardResult
    '''
    labels = np.asarray(labels, dtype=np.int64)
    logits = result.logits.astype(np.float64)
    log_norm = np.logaddexp(logits[:, 0], logits[:, 1])
    return float(np.mean(log_norm - logits[np.arange(labels.shape[0]),
                                           labels]))


def backward(weights, result, labels):
    '''
    Function to compute gradients of the mean test cross-entropy with
    respect to every parameter

    Returns
    -------
    :return: grads : OrderedDict
        same names and shapes as weights.params
    '''
    cache = result.cache
    if cache is None:
        raise ValueError('forward() must be run with keep_cache=True')
    dtype = weights.dtype
    grads = OrderedDict((name, np.zeros_like(arr))
                        for name, arr in weights.params.items())
    labels = np.asarray(labels, dtype=np.int64)
    n_train = cache['n_train']
    n_test = labels.shape[0]

    d_logits = cache['probs2'].copy()
    d_logits[np.arange(n_test), labels] -= 1.0
    d_logits = (d_logits / n_test).astype(dtype)
    grads['head.weight'] += cache['head_in'].T @ d_logits
    grads['head.bias'] += d_logits.sum(axis=0)

    d_x = np.zeros((cache['n_rows'], cache['n_cells'], weights.config.d_model),
                   dtype=dtype)
    d_x[n_train:, -1, :] = d_logits @ weights['head.weight'].T
    for blk in reversed(range(weights.config.n_blocks)):
        d_x = _block_backward(weights, blk, d_x, n_train,
                              cache['blocks'][blk], grads)
    _embed_backward(weights, d_x, cache['embed'], grads)
    return grads


def loss_and_grads(weights, train_table, test_table, test_labels):
    result = forward(weights, train_table, test_table, keep_cache=True)
    loss = cross_entropy(result, test_labels)
    return loss, backward(weights, result, test_labels)


def predict_in_context(weights, train_table, test_table):
    '''
    Function to predict p(label = 1) for test rows by conditioning on the
    train table; no state is modified
    '''
    return forward(weights, train_table, test_table).probs


def explain(record, test_row, k):
    '''
    Function to rank train students by their attention weight for one
    test row

    Parameters
    ----------
    :type record: AttentionRecord
    :param record: attention of a forward pass
    :type test_row: int
    :param test_row: position of the test row in the test table
    :type k: int
    :param k: number of students to return; all when k exceeds the
        train size

    Returns
    -------
    :return: ranking : list of (train_student_idx, weight)
        descending weight, ties by ascending train row position
    '''
    if k < 1:
        raise ValueError('k must be at least 1, got {0}'.format(k))
    row = record.weights[test_row]
    positions = np.arange(row.shape[0])
    order = np.lexsort((positions, -row))[:k]
    return [(int(record.train_students[pos]), float(row[pos]))
            for pos in order]


class MiniPFNPredictor(Predictor):
    '''
    In-context predictor: prepare() does nothing, predict() feeds the
    train table to the pretrained network
    '''

    name = 'minipfn'
    is_in_context = True

    def __init__(self, weights=None, weights_path=None, seed=0):
        super().__init__(seed)
        if weights is None and weights_path is not None:
            from livekt_models.pretrain import load_weights
            weights = load_weights(weights_path)
        if weights is None:
            logger.warning('MiniPFN has no pretrained weights; using a '
                           'random initialization (seed %d)', self.seed)
            weights = init_weights(MiniPFNConfig(), seed=self.seed)
        self.weights = weights
        self.last_attention = None

    def predict(self, train_table, test_table):
        result = forward(self.weights, train_table, test_table)
        self.last_attention = result.attention
        return result.probs
