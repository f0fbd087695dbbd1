# livekt_models/pretrain.py
#

'''
Pretraining of MiniPFN on synthetic episodes, gradient checking, and
(de)serialization of weights and checkpoints in the LKTW container
'''

# Import packages
import csv
import io
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from tqdm import tqdm

from livekt_data.container import WEIGHTS_MAGIC, Container, \
    atomic_write_bytes, read_container, write_container
from livekt_models.logistic import DivergenceError
from livekt_models.minipfn import MiniPFNConfig, MiniPFNWeights, \
    cross_entropy, forward, init_weights, loss_and_grads, \
    parameter_shapes
from livekt_models.priors import PriorConfig, sample_episode

logger = logging.getLogger(__name__)

WEIGHTS_KIND = 'minipfn'
CHECKPOINT_KIND = 'minipfn-checkpoint'
# Episodes averaged into one point of the loss curve
LOSS_WINDOW = 100


@dataclass
class TrainParams:
    n_episodes: int = 10000
    batch_episodes: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.n_episodes < 0 or self.batch_episodes < 1:
            raise ValueError('n_episodes must be >= 0 and batch_episodes '
                             '>= 1')
        if self.lr <= 0 or self.clip_norm <= 0 or self.checkpoint_every < 1:
            raise ValueError('lr, clip_norm and checkpoint_every must be '
                             'positive')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError('Adam betas must lie in [0, 1)')


class Adam(object):
    '''
    Adam optimizer over a dict of named arrays; moments are kept in the
    dtype of the parameters
    '''

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        self.v = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())

    def step(self, params, grads):
        '''
        Update params in place from grads
        '''
        self.step_count += 1
        t = self.step_count
        corr1 = 1.0 - self.beta1 ** t
        corr2 = 1.0 - self.beta2 ** t
        for name, param in params.items():
            grad = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            update = self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
            param -= update.astype(param.dtype)


def episode_seed(seed, index):
    '''
    Seed of episode `index` in a run seeded with `seed`; independent of
    batch size and of where a run was resumed
    '''
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(
        1, np.uint32)
    return int(state[0])


def clip_gradients(grads, max_norm):
    '''
    Scale grads in place so that their global L2 norm is at most
    max_norm; returns the norm before clipping
    '''
    norm = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64)))
                             for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for grad in grads.values():
            grad *= grad.dtype.type(scale)
    return norm


@dataclass
class PretrainState:
    '''
    Everything needed to continue a pretraining run bit-for-bit
    '''
    weights: MiniPFNWeights
    optimizer: Adam
    episodes_done: int = 0
    loss_curve: list = field(default_factory=list)
    window_losses: list = field(default_factory=list)


@dataclass
class PretrainResult:
    weights: MiniPFNWeights
    loss_curve: list
    episodes_done: int


# ---------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------

def weights_to_container(weights):
    return Container(magic=WEIGHTS_MAGIC, kind=WEIGHTS_KIND,
                     metadata={'config': weights.config.to_dict()},
                     tensors=OrderedDict(weights.params))


def _weights_from_tensors(config, tensors, prefix=''):
    params = OrderedDict()
    for name in parameter_shapes(config):
        key = prefix + name
        if key not in tensors:
            raise ValueError('weights are missing tensor {0!r}'.format(key))
        params[name] = tensors[key].astype(np.float32)
    return MiniPFNWeights(config, params)


def save_weights(weights, path):
    '''
    Function to write MiniPFN weights to an LKTW container
    '''
    write_container(path, weights_to_container(weights.astype(np.float32)))
    logger.info('Wrote %d MiniPFN parameters to %s',
                weights.n_parameters(), path)


def load_weights(path):
    '''
    Function to read MiniPFN weights from an LKTW weights file or from a
    pretraining checkpoint
    '''
    container = read_container(path, WEIGHTS_MAGIC)
    if container.kind not in (WEIGHTS_KIND, CHECKPOINT_KIND):
        raise ValueError('{0} holds {1!r}, not MiniPFN weights'.format(
            path, container.kind))
    config = MiniPFNConfig.from_dict(container.metadata['config'])
    prefix = 'param.' if container.kind == CHECKPOINT_KIND else ''
    return _weights_from_tensors(config, container.tensors, prefix)


def save_checkpoint(state, prior, train_params, path):
    '''
    Function to write a resumable checkpoint: parameters, Adam moments,
    step counters and the loss history
    '''
    tensors = OrderedDict()
    for name, arr in state.weights.params.items():
        tensors['param.' + name] = arr
    for name, arr in state.optimizer.m.items():
        tensors['adam.m.' + name] = arr
    for name, arr in state.optimizer.v.items():
        tensors['adam.v.' + name] = arr
    metadata = {'config': state.weights.config.to_dict(),
                'prior': prior.to_dict(),
                'train': asdict(train_params),
                'episodes_done': state.episodes_done,
                'adam_step': state.optimizer.step_count,
                'loss_curve': [list(point) for point in state.loss_curve],
                'window_losses': list(state.window_losses)}
    try:
        write_container(path, Container(magic=WEIGHTS_MAGIC,
                                        kind=CHECKPOINT_KIND,
                                        metadata=metadata, tensors=tensors))
    except OSError as exc:
        raise RuntimeError('checkpoint write failed: {0}'.format(exc))
    logger.info('Checkpoint at episode %d written to %s',
                state.episodes_done, path)


def load_checkpoint(path, train_params):
    '''
    Function to restore a PretrainState from a checkpoint file
    '''
    container = read_container(path, WEIGHTS_MAGIC)
    if container.kind != CHECKPOINT_KIND:
        raise ValueError('{0} is not a pretraining checkpoint'.format(path))
    meta = container.metadata
    config = MiniPFNConfig.from_dict(meta['config'])
    weights = _weights_from_tensors(config, container.tensors, 'param.')
    optimizer = Adam(weights.params, lr=train_params.lr,
                     beta1=train_params.beta1, beta2=train_params.beta2,
                     eps=train_params.eps)
    for name in weights.names():
        optimizer.m[name] = container.tensors['adam.m.' + name].astype(
            np.float32)
        optimizer.v[name] = container.tensors['adam.v.' + name].astype(
            np.float32)
    optimizer.step_count = int(meta['adam_step'])
    return PretrainState(
        weights=weights, optimizer=optimizer,
        episodes_done=int(meta['episodes_done']),
        loss_curve=[(int(ep), float(loss)) for ep, loss in
                    meta['loss_curve']],
        window_losses=[float(loss) for loss in meta['window_losses']])


def write_loss_curve_csv(loss_curve, path):
    '''
    Function to write the smoothed loss curve with columns
    episode,smoothed_loss
    '''
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(['episode', 'smoothed_loss'])
    for episode, loss in loss_curve:
        writer.writerow([int(episode), repr(float(loss))])
    atomic_write_bytes(path, buf.getvalue().encode('utf-8'))


# ---------------------------------------------------------------------
# training
# ---------------------------------------------------------------------

def _batch_step(state, prior, train_params, first, last):
    '''
    Run episodes [first, last) as one optimizer step
    '''
    weights = state.weights
    total = OrderedDict((name, np.zeros_like(arr))
                        for name, arr in weights.params.items())
    losses = []
    for index in range(first, last):
        episode = sample_episode(prior, episode_seed(train_params.seed,
                                                     index))
        loss, grads = loss_and_grads(weights, episode.train,
                                     episode.test.without_labels(),
                                     episode.test.labels)
        if not np.isfinite(loss):
            raise DivergenceError('pretraining loss is not finite at '
                                  'episode {0}'.format(index))
        for name, grad in grads.items():
            total[name] += grad
        losses.append(loss)

    scale = total['head.bias'].dtype.type(1.0 / (last - first))
    for grad in total.values():
        grad *= scale
    clip_gradients(total, train_params.clip_norm)
    state.optimizer.step(weights.params, total)
    if not weights.all_finite():
        raise DivergenceError('parameters became non-finite after episode '
                              '{0}'.format(last - 1))
    return losses


def _record_losses(state, losses, first):
    for offset, loss in enumerate(losses):
        state.window_losses.append(loss)
        episode = first + offset + 1
        if episode % LOSS_WINDOW == 0:
            state.loss_curve.append(
                (episode, float(np.mean(state.window_losses))))
            state.window_losses = []


def pretrain(prior=None, train_params=None, config=None, init=None,
             checkpoint_path=None, resume_path=None, progress=False):
    '''
    Function to pretrain MiniPFN on episodes drawn from a prior

    Each optimizer step averages the gradients of batch_episodes
    episodes, clips their global norm and applies Adam. Episode e of a
    run is drawn with episode_seed(seed, e), so the result depends only
    on the seed (and the thread count of the numeric backend), including
    across a checkpoint and resume.

    Parameters
    ----------
    :type prior: PriorConfig
    :param prior: (optional), default=PriorConfig()
    :type train_params: TrainParams
    :param train_params: (optional), default=TrainParams()
    :type config: MiniPFNConfig
    :param config: (optional), default=MiniPFNConfig()
    :type init: MiniPFNWeights
    :param init: (optional), default=None
        starting weights; drawn from the seed when omitted
    :type checkpoint_path: str
    :param checkpoint_path: (optional), default=None
        written every checkpoint_every episodes, at the end and on
        interruption
    :type resume_path: str
    :param resume_path: (optional), default=None
        checkpoint to continue from
    :type progress: bool
    :param progress: (optional), default=False
        show a progress bar

    Returns
    -------
    :return: result : PretrainResult
    '''

    prior = prior or PriorConfig()
    train_params = train_params or TrainParams()

    if resume_path is not None:
        state = load_checkpoint(resume_path, train_params)
        logger.info('Resuming pretraining at episode %d',
                    state.episodes_done)
    else:
        config = config or MiniPFNConfig()
        weights = init.astype(np.float32) if init is not None else \
            init_weights(config, seed=train_params.seed)
        state = PretrainState(
            weights=weights,
            optimizer=Adam(weights.params, lr=train_params.lr,
                           beta1=train_params.beta1,
                           beta2=train_params.beta2, eps=train_params.eps))

    n_total = train_params.n_episodes
    bar = tqdm(total=n_total, initial=state.episodes_done, unit='episode',
               disable=not progress)
    try:
        while state.episodes_done < n_total:
            first = state.episodes_done
            last = min(first + train_params.batch_episodes, n_total)
            losses = _batch_step(state, prior, train_params, first, last)
            _record_losses(state, losses, first)
            state.episodes_done = last
            bar.update(last - first)
            if state.loss_curve:
                bar.set_postfix(loss='{0:.4f}'.format(
                    state.loss_curve[-1][1]))
            every = train_params.checkpoint_every
            if checkpoint_path and last // every > first // every:
                save_checkpoint(state, prior, train_params, checkpoint_path)
    except KeyboardInterrupt:
        if checkpoint_path:
            logger.warning('Interrupted at episode %d; writing checkpoint',
                           state.episodes_done)
            save_checkpoint(state, prior, train_params, checkpoint_path)
        raise
    finally:
        bar.close()

    if checkpoint_path:
        save_checkpoint(state, prior, train_params, checkpoint_path)
    return PretrainResult(weights=state.weights,
                          loss_curve=list(state.loss_curve),
                          episodes_done=state.episodes_done)


# ---------------------------------------------------------------------
# gradient check
# ---------------------------------------------------------------------

def grad_check(config, train_table, test_table, test_labels, step=1e-3,
               seed=0, weights=None):
    '''
    Function to compare analytic gradients with central finite
    differences, in float64

    Parameters
    ----------
    :type config: MiniPFNConfig
    :param config: small config; n_blocks=0 checks the embedding and
        head alone
    :param train_table: labeled context rows
    :param test_table: query rows
    :param test_labels: labels of the query rows
    :type step: float
    :param step: (optional), default=1e-3
    :type seed: int
    :param seed: (optional), default=0
        seed of the weights when none are given

    Returns
    -------
    :return: error : float
        max over parameters of |analytic - numeric| /
        max(1, |analytic|, |numeric|)
    '''

    weights = weights if weights is not None else init_weights(config, seed)
    weights = weights.astype(np.float64)
    query = test_table.without_labels()
    _, analytic = loss_and_grads(weights, train_table, query, test_labels)

    def _loss():
        return cross_entropy(forward(weights, train_table, query),
                             test_labels)

    worst = 0.0
    for name, param in weights.params.items():
        flat = param.reshape(-1)
        grad = analytic[name].reshape(-1)
        for pos in range(flat.shape[0]):
            saved = flat[pos]
            flat[pos] = saved + step
            up = _loss()
            flat[pos] = saved - step
            down = _loss()
            flat[pos] = saved
            numeric = (up - down) / (2.0 * step)
            denom = max(1.0, abs(grad[pos]), abs(numeric))
            worst = max(worst, abs(grad[pos] - numeric) / denom)
    logger.debug('grad_check step=%g max relative error %.3e', step, worst)
    return worst


def evaluate_episodes(weights, prior, seeds):
    '''
    Function to measure held-out cross-entropy on episodes drawn from
    the given seeds
    '''
    losses = []
    for seed in seeds:
        episode = sample_episode(prior, seed)
        result = forward(weights, episode.train,
                         episode.test.without_labels())
        losses.append(cross_entropy(result, episode.test.labels))
    return float(np.mean(losses)) if losses else float('nan')


def small_config(**overrides):
    '''
    Config of a tiny network used for gradient checks
    '''
    base = MiniPFNConfig(d_model=8, n_heads=2, n_blocks=1, d_ff=8,
                         max_features=10)
    return replace(base, **overrides)
