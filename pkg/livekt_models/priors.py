# livekt_models/priors.py
#

'''
Synthetic task generators used to pretrain MiniPFN.

The default knowledge-tracing prior simulates students answering
questions tagged with skills, under one of two generative variants:

    Rasch with learning: p(correct) = sigmoid(theta_i - d_q + gamma * n)
        where n counts the student's prior attempts on the question's
        skill;
    BKT: every skill is either mastered or not; an unmastered skill
        becomes mastered after each attempt with probability p_learn;
        p(correct) = 1 - slip when mastered, guess otherwise.

The generic structural prior maps latent inputs through a random
two-layer network and discretizes the inputs into categorical cells.

Every sampler is a pure function of (params, seed).
'''

# Import packages
import logging
from dataclasses import asdict, dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit

from livekt_data.data_model import Dataset, Sequence, Vocab, split_students
from livekt_data.encoding import EncodedTable, EncodingError, build_tables

logger = logging.getLogger(__name__)


class DegenerateEpisodeError(RuntimeError):
    pass


@dataclass
class KTPriorParams:
    n_students: Tuple[int, int] = (16, 96)
    n_questions: Tuple[int, int] = (5, 60)
    n_skills: Tuple[int, int] = (2, 12)
    T: Tuple[int, int] = (5, 20)
    sigma_theta: float = 1.0
    sigma_d: float = 1.0
    gamma: Tuple[float, float] = (0.0, 0.3)
    slip: Tuple[float, float] = (0.02, 0.2)
    guess: Tuple[float, float] = (0.05, 0.35)
    p_learn: Tuple[float, float] = (0.05, 0.3)
    p_init: Tuple[float, float] = (0.1, 0.5)
    bkt_weight: float = 0.3
    train_ratio: float = 0.8
    max_retries: int = 10

    def __post_init__(self):
        for name in ('n_students', 'n_questions', 'n_skills', 'T', 'gamma',
                     'slip', 'guess', 'p_learn', 'p_init'):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError('empty range for {0}: {1}'.format(
                    name, (lo, hi)))
        if self.n_students[0] < 2 or self.T[0] < 2 or \
                self.n_questions[0] < 1 or self.n_skills[0] < 1:
            raise ValueError('prior ranges are too small')
        if self.sigma_theta < 0 or self.sigma_d < 0 or self.gamma[0] < 0:
            raise ValueError('standard deviations and gamma must be >= 0')
        if not (0 <= self.slip[0] and self.slip[1] < 0.5 and
                0 <= self.guess[0] and self.guess[1] < 0.5):
            raise ValueError('slip and guess must lie in [0, 0.5)')
        if not (0 <= self.p_learn[0] and self.p_learn[1] <= 1 and
                0 <= self.p_init[0] and self.p_init[1] <= 1 and
                0 <= self.bkt_weight <= 1):
            raise ValueError('probabilities must lie in [0, 1]')


@dataclass
class SCMPriorParams:
    n_students: Tuple[int, int] = (16, 96)
    T: Tuple[int, int] = (5, 20)
    n_latent: Tuple[int, int] = (2, 8)
    n_hidden: int = 16
    weight_scale: float = 1.0
    n_categories: Tuple[int, int] = (2, 30)
    train_ratio: float = 0.8
    max_retries: int = 10


@dataclass
class PriorConfig:
    '''
    Which prior to draw from; scm_weight is the probability of an
    episode coming from the structural prior
    '''
    kind: str = 'kt'
    kt: KTPriorParams = field(default_factory=KTPriorParams)
    scm: SCMPriorParams = field(default_factory=SCMPriorParams)
    scm_weight: float = 0.5

    def __post_init__(self):
        if self.kind not in ('kt', 'scm', 'mix'):
            raise ValueError('prior kind must be kt, scm or mix, got '
                             '{0!r}'.format(self.kind))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        kt = KTPriorParams(**{k: tuple(v) if isinstance(v, list) else v
                              for k, v in values.pop('kt', {}).items()})
        scm = SCMPriorParams(**{k: tuple(v) if isinstance(v, list) else v
                                for k, v in values.pop('scm', {}).items()})
        return cls(kt=kt, scm=scm, **values)


@dataclass
class EpisodeBatch:
    '''
    One pretraining task: a labeled context table, a query table whose
    labels are only used by the loss, and the seed that produced them
    '''
    train: EncodedTable
    test: EncodedTable
    seed: int


def _uniform_int(rng, bounds):
    return int(rng.integers(bounds[0], bounds[1] + 1))


def _uniform(rng, bounds):
    return float(rng.uniform(bounds[0], bounds[1]))


def rasch_probability(theta, difficulty, gamma, prior_attempts):
    '''
    Success probability of the Rasch model with a learning gain per
    prior attempt on the same skill
    '''
    return expit(np.asarray(theta) - np.asarray(difficulty) +
                 gamma * np.asarray(prior_attempts))


def simulate_rasch(rng, questions, question_skill, theta, difficulty,
                   gamma):
    '''
    Function to draw correctness for one student's question sequence
    under the Rasch-learning variant

    Returns
    -------
    :return: (correct, probabilities) : tuple of np.ndarray
    '''
    attempts = {}
    probs = np.empty(questions.shape[0], dtype=np.float64)
    for pos, question in enumerate(questions):
        skill = question_skill[question]
        probs[pos] = rasch_probability(theta, difficulty[question], gamma,
                                       attempts.get(skill, 0))
        attempts[skill] = attempts.get(skill, 0) + 1
    correct = (rng.random(questions.shape[0]) < probs).astype(np.int32)
    return correct, probs


def simulate_bkt(rng, questions, question_skill, mastered, p_learn, slip,
                 guess):
    '''
    Function to draw correctness for one student's question sequence
    under the BKT variant; mastered is the initial per-skill state and
    is updated in place
    '''
    correct = np.empty(questions.shape[0], dtype=np.int32)
    draws = rng.random((questions.shape[0], 2))
    for pos, question in enumerate(questions):
        skill = question_skill[question]
        p_correct = 1.0 - slip if mastered[skill] else guess
        correct[pos] = int(draws[pos, 0] < p_correct)
        if not mastered[skill] and draws[pos, 1] < p_learn:
            mastered[skill] = True
    return correct


def sample_kt_dataset(params, rng):
    '''
    Function to simulate one synthetic knowledge-tracing dataset

    Each student gets a uniform sequence length in [2, T + 2], so some rows
    are left padded and some are truncated by the encoding.

    Returns
    -------
    :return: (dataset, T, variant)
    '''
    n_students = _uniform_int(rng, params.n_students)
    n_questions = _uniform_int(rng, params.n_questions)
    n_skills = _uniform_int(rng, params.n_skills)
    T = _uniform_int(rng, params.T)
    use_bkt = rng.random() < params.bkt_weight

    # dense question/skill indices start at 1; index 0 stays PAD
    question_skill = np.concatenate(
        [[0], rng.integers(1, n_skills + 1, size=n_questions)])
    difficulty = np.concatenate(
        [[0.0], rng.normal(0.0, params.sigma_d, size=n_questions)])
    gamma = _uniform(rng, params.gamma)
    slip = _uniform(rng, params.slip)
    guess = _uniform(rng, params.guess)
    p_learn = _uniform(rng, params.p_learn)
    p_init = _uniform(rng, params.p_init)

    sequences = []
    for _ in range(n_students):
        length = int(rng.integers(2, T + 3))
        questions = rng.integers(1, n_questions + 1, size=length)
        if use_bkt:
            mastered = np.concatenate(
                [[False], rng.random(n_skills) < p_init])
            correct = simulate_bkt(rng, questions, question_skill, mastered,
                                   p_learn, slip, guess)
        else:
            theta = rng.normal(0.0, params.sigma_theta)
            correct, _ = simulate_rasch(rng, questions, question_skill,
                                        theta, difficulty, gamma)
        sequences.append(Sequence(questions.astype(np.int32),
                                  question_skill[questions].astype(np.int32),
                                  correct))

    dataset = Dataset(
        tuple(sequences),
        Vocab([str(q) for q in range(1, n_questions + 1)]),
        Vocab([str(s) for s in range(1, n_skills + 1)]),
        Vocab([str(i) for i in range(1, n_students + 1)]))
    return dataset, T, 'bkt' if use_bkt else 'rasch'


def _has_both_classes(labels):
    return labels.shape[0] > 0 and labels.min() != labels.max()


def sample_kt_episode(params, seed):
    '''
    Function to sample one knowledge-tracing episode

    The simulated dataset is encoded at its sampled T under the live
    protocol (train visible T, test visible T - 1) with an 80/20 student
    split. Episodes whose query labels are single-class are redrawn with
    seed + 1, seed + 2, ... up to params.max_retries times.

    Parameters
    ----------
    :type params: KTPriorParams
    :param params: prior hyperparameters
    :type seed: int
    :param seed: episode seed

    Returns
    -------
    :return: episode : EpisodeBatch
    '''
    for attempt in range(params.max_retries + 1):
        episode_seed = int(seed) + attempt
        rng = np.random.default_rng(episode_seed)
        dataset, T, _ = sample_kt_dataset(params, rng)
        split = split_students(dataset, params.train_ratio, episode_seed)
        try:
            train, test = build_tables(dataset, split, T, T, T - 1)
        except EncodingError:
            continue
        if _has_both_classes(test.labels):
            return EpisodeBatch(train, test, episode_seed)
        logger.debug('KT episode seed %d is degenerate; resampling',
                     episode_seed)
    raise DegenerateEpisodeError(
        'no usable KT episode after {0} retries from seed {1}'.format(
            params.max_retries, seed))


def sample_scm_tables(params, rng):
    '''
    Function to draw one structural-prior table pair from rng

    Returns
    -------
    :return: (train, test) : tuple of EncodedTable
    '''
    n_rows = _uniform_int(rng, params.n_students)
    T = _uniform_int(rng, params.T)
    n_latent = _uniform_int(rng, params.n_latent)
    width = 3 * T - 1

    # latent causes -> observed coordinates -> random network score
    latent = rng.normal(size=(n_rows, n_latent))
    mixing = rng.normal(size=(n_latent, width))
    coords = latent @ mixing + 0.5 * rng.normal(size=(n_rows, width))
    w1 = params.weight_scale * rng.normal(size=(width, params.n_hidden))
    w2 = params.weight_scale * rng.normal(size=params.n_hidden)
    score = np.tanh(coords @ w1 / np.sqrt(width)) @ w2
    labels = (score > np.median(score)).astype(np.int32)

    # discretize every coordinate into its own random category bins
    n_cats = np.concatenate([
        rng.integers(params.n_categories[0], params.n_categories[1] + 1,
                     size=2 * T),
        np.full(T - 1, 2)])
    codes = np.empty((n_rows, width), dtype=np.int32)
    for col in range(width):
        cuts = np.sort(rng.normal(size=n_cats[col] - 1))
        codes[:, col] = np.searchsorted(cuts, coords[:, col]) + 1

    # shorter histories are right-aligned with PAD on the left
    observed = rng.integers(2, T + 1, size=n_rows)
    for row in range(n_rows):
        pad = T - observed[row]
        codes[row, :pad] = 0
        codes[row, T:T + pad] = 0
        codes[row, 2 * T:2 * T + pad] = 0

    table = EncodedTable(
        T=T, student_idx=np.arange(1, n_rows + 1, dtype=np.int64),
        questions=codes[:, :T], skills=codes[:, T:2 * T],
        past_correct=codes[:, 2 * T:], labels=labels,
        observed_len=observed.astype(np.int32))
    order = rng.permutation(n_rows)
    n_train = int(np.floor(params.train_ratio * n_rows + 0.5))
    return table.take(np.sort(order[:n_train])), \
        table.take(np.sort(order[n_train:]))


def sample_scm_episode(params, seed):
    '''
    Function to sample one structural-prior episode with the same
    resampling rule as sample_kt_episode
    '''
    for attempt in range(params.max_retries + 1):
        episode_seed = int(seed) + attempt
        train, test = sample_scm_tables(params,
                                        np.random.default_rng(episode_seed))
        if _has_both_classes(test.labels) and _has_both_classes(
                train.labels):
            return EpisodeBatch(train, test, episode_seed)
        logger.debug('SCM episode seed %d is degenerate; resampling',
                     episode_seed)
    raise DegenerateEpisodeError(
        'no usable SCM episode after {0} retries from seed {1}'.format(
            params.max_retries, seed))


def sample_episode(prior, seed):
    '''
    Function to draw an episode from a PriorConfig; the choice between
    priors in 'mix' mode is itself a function of the seed
    '''
    if prior.kind == 'kt':
        return sample_kt_episode(prior.kt, seed)
    if prior.kind == 'scm':
        return sample_scm_episode(prior.scm, seed)
    coin = np.random.default_rng([int(seed), 1]).random()
    if coin < prior.scm_weight:
        return sample_scm_episode(prior.scm, seed)
    return sample_kt_episode(prior.kt, seed)
