# livekt_data/encoding.py
#

'''
This module builds the fixed-width tabular representation of student
sequences: one row per student with columns q1..qT, s1..sT, c1..c(T-1)
and a separate label column holding cT. Shorter histories are aligned on
the right and padded with PAD (0) on the left.
'''

# Import packages
import csv
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from livekt_data.data_model import PAD

logger = logging.getLogger(__name__)

# Correctness codes are shifted so that PAD=0, incorrect=1, correct=2
CORRECT_OFFSET = 1

# Column families of the encoded table
QUESTION, SKILL, CORRECT = 0, 1, 2


class EncodingError(ValueError):
    '''
    Raised for an invalid horizon or an empty table side
    '''


@dataclass(frozen=True)
class EncodedRow:
    student_idx: int
    questions: np.ndarray
    skills: np.ndarray
    past_correct: np.ndarray
    label: int
    observed_len: int

    @property
    def T(self):
        return int(self.questions.shape[0])

    def features(self):
        return np.concatenate([self.questions, self.skills,
                               self.past_correct])


@dataclass(frozen=True)
class EncodedTable:
    '''
    Rows sharing one horizon T, stored column-family-wise as arrays;
    labels is None when the table is handed to a predictor as a query
    '''
    T: int
    student_idx: np.ndarray
    questions: np.ndarray
    skills: np.ndarray
    past_correct: np.ndarray
    labels: Optional[np.ndarray]
    observed_len: np.ndarray
    skipped: Tuple[int, ...] = ()

    @property
    def n_rows(self):
        return int(self.student_idx.shape[0])

    @property
    def width(self):
        return 3 * self.T - 1

    def __len__(self):
        return self.n_rows

    def features(self):
        '''
        Return the (n_rows, 3T - 1) integer feature matrix
        '''
        return np.concatenate([self.questions, self.skills,
                               self.past_correct], axis=1)

    def without_labels(self):
        return replace(self, labels=None)

    def take(self, indices):
        '''
        Return a table restricted to the given row positions, in order
        '''
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            student_idx=self.student_idx[indices],
            questions=self.questions[indices],
            skills=self.skills[indices],
            past_correct=self.past_correct[indices],
            labels=None if self.labels is None else self.labels[indices],
            observed_len=self.observed_len[indices],
            skipped=())

    def row(self, pos):
        return EncodedRow(
            student_idx=int(self.student_idx[pos]),
            questions=self.questions[pos],
            skills=self.skills[pos],
            past_correct=self.past_correct[pos],
            label=-1 if self.labels is None else int(self.labels[pos]),
            observed_len=int(self.observed_len[pos]))

    @classmethod
    def from_rows(cls, rows, T, skipped=(), with_labels=True):
        '''
        Assemble rows (all built at horizon T) into a table
        '''
        n_rows = len(rows)
        questions = np.zeros((n_rows, T), dtype=np.int32)
        skills = np.zeros((n_rows, T), dtype=np.int32)
        past_correct = np.zeros((n_rows, T - 1), dtype=np.int32)
        for pos, row in enumerate(rows):
            questions[pos] = row.questions
            skills[pos] = row.skills
            past_correct[pos] = row.past_correct
        labels = np.array([row.label for row in rows], dtype=np.int32)
        return cls(
            T=T,
            student_idx=np.array([row.student_idx for row in rows],
                                 dtype=np.int64),
            questions=questions,
            skills=skills,
            past_correct=past_correct,
            labels=labels if with_labels else None,
            observed_len=np.array([row.observed_len for row in rows],
                                  dtype=np.int32),
            skipped=tuple(skipped))

    def column_names(self):
        T = self.T
        return (['q{0}'.format(t) for t in range(1, T + 1)] +
                ['s{0}'.format(t) for t in range(1, T + 1)] +
                ['c{0}'.format(t) for t in range(1, T)])

    def to_csv(self, stream):
        '''
        Write a debug dump with columns q1..qT,s1..sT,c1..c(T-1),label;
        PAD is written as 0 and a missing label as an empty cell
        '''
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(self.column_names() + ['label'])
        feats = self.features()
        for pos in range(self.n_rows):
            label = '' if self.labels is None else int(self.labels[pos])
            writer.writerow([int(val) for val in feats[pos]] + [label])


def column_families(T):
    '''
    Return, for each of the 3T - 1 feature columns, its family and its
    distance from the right edge of the row (0 = most recent)
    '''
    families = np.concatenate([np.full(T, QUESTION), np.full(T, SKILL),
                               np.full(T - 1, CORRECT)])
    offsets = np.concatenate([np.arange(T - 1, -1, -1),
                              np.arange(T - 1, -1, -1),
                              np.arange(T - 1, 0, -1)])
    return families, offsets


def build_row(sequence, T, visible, student_idx=0):
    '''
    Function to encode the first min(visible, T, len) interactions of a
    sequence as one right-aligned row

    Parameters
    ----------
    :type sequence: livekt_data.data_model.Sequence
    :param sequence: dense-coded interactions in order
    :type T: int
    :param T: horizon, at least 2
    :type visible: int
    :param visible: number of interactions observable

    Returns
    -------
    :return: row : EncodedRow or None
        None when fewer than 2 interactions are usable
    '''

    if T < 2:
        raise EncodingError('horizon T must be at least 2, got {0}'.format(T))
    if visible < 0:
        raise EncodingError('visible must be non-negative, got {0}'.format(
            visible))

    k = min(visible, T, len(sequence))
    if k < 2:
        return None

    # Right-align the k used interactions, PAD on the left
    questions = np.full(T, PAD, dtype=np.int32)
    skills = np.full(T, PAD, dtype=np.int32)
    past_correct = np.full(T - 1, PAD, dtype=np.int32)
    questions[T - k:] = sequence.questions[:k]
    skills[T - k:] = sequence.skills[:k]
    past_correct[T - k:] = sequence.correct[:k - 1] + CORRECT_OFFSET

    return EncodedRow(student_idx=int(student_idx), questions=questions,
                      skills=skills, past_correct=past_correct,
                      label=int(sequence.correct[k - 1]), observed_len=k)


def encode_students(dataset, students, T, visible):
    '''
    Function to encode the given students (in dataset order) into a
    table; students with fewer than 2 usable interactions are recorded
    as skipped
    '''

    rows = []
    skipped = []
    for student_idx in sorted(students):
        row = build_row(dataset.sequence(student_idx), T, visible,
                        student_idx=student_idx)
        if row is None:
            skipped.append(student_idx)
        else:
            rows.append(row)
    return EncodedTable.from_rows(rows, T, skipped=skipped)


def build_tables(dataset, split, T, visible_train, visible_test):
    '''
    Function to build the train and test tables of the live protocol

    Parameters
    ----------
    :type dataset: livekt_data.data_model.Dataset
    :param dataset: source sequences
    :type split: livekt_data.data_model.Split
    :param split: train/test student partition
    :type T: int
    :param T: horizon
    :type visible_train: int
    :param visible_train: interactions observable for train students
    :type visible_test: int
    :param visible_test: interactions whose correctness is observable for
        test students; the next interaction is the held-out label

    Returns
    -------
    :return: (train, test) : tuple of EncodedTable
        both carry labels; the caller must strip test labels before
        handing the test table to a predictor
    '''

    if T < 2:
        raise EncodingError('horizon T must be at least 2, got {0}'.format(T))

    train = encode_students(dataset, split.train_students, T, visible_train)
    test = encode_students(dataset, split.test_students, T, visible_test + 1)

    if train.skipped or test.skipped:
        logger.debug('T=%d: skipped %d train and %d test students with '
                     'fewer than 2 usable interactions', T,
                     len(train.skipped), len(test.skipped))
    if not train.n_rows:
        raise EncodingError('train table is empty at T={0}'.format(T))
    if not test.n_rows:
        raise EncodingError('test table is empty at T={0}'.format(T))

    return train, test
