# livekt_data/data_model.py
#

'''
This module contains the interaction log model: parsing of interaction
CSV exports, remapping of external identifiers to dense vocabularies,
train/test splitting of students and dataset statistics
'''

# Import packages
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Index 0 is reserved as padding in every vocabulary
PAD = 0

# Interaction CSV header
CSV_COLUMNS = ('student_id', 'question_id', 'skill_id', 'correct',
               'timestamp')


class InteractionParseError(ValueError):
    '''
    Raised when an interaction CSV cannot be parsed; carries the 1-based
    line number and the offending column name when known
    '''

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = 'line {0}'.format(line)
            if column is not None:
                where += ', column {0!r}'.format(column)
            message = '{0}: {1}'.format(where, message)
        super().__init__(message)


@dataclass(frozen=True)
class Interaction:
    '''
    One graded attempt of a student on a question
    '''
    student: str
    question: str
    skill: Optional[str]
    correct: int
    order_key: int
    line: int


@dataclass
class InteractionLog:
    '''
    Interactions in input order, plus counts of what was dropped while
    parsing in lenient mode
    '''
    interactions: List[Interaction] = field(default_factory=list)
    dropped_rows: int = 0
    dropped_students: int = 0

    def __len__(self):
        return len(self.interactions)


class Vocab(object):
    '''
    Bijection between external identifiers and dense indices starting
    at 1; index 0 is PAD and never maps to an identifier
    '''

    def __init__(self, ids=()):
        self._ids = []
        self._index = {}
        for ext_id in ids:
            self.add(ext_id)

    def add(self, ext_id):
        '''
        Return the dense index of ext_id, assigning the next free index
        on first appearance
        '''
        idx = self._index.get(ext_id)
        if idx is None:
            self._ids.append(ext_id)
            idx = len(self._ids)
            self._index[ext_id] = idx
        return idx

    def encode(self, ext_id):
        return self._index[ext_id]

    def decode(self, idx):
        if idx == PAD:
            raise KeyError('index 0 is reserved for padding')
        return self._ids[idx - 1]

    @property
    def ids(self):
        return list(self._ids)

    def __contains__(self, ext_id):
        return ext_id in self._index

    def __len__(self):
        return len(self._ids)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._ids == other._ids


@dataclass(frozen=True)
class Sequence:
    '''
    Dense-coded interaction history of one student, sorted by order key
    '''
    questions: np.ndarray
    skills: np.ndarray
    correct: np.ndarray

    def __post_init__(self):
        for arr in (self.questions, self.skills, self.correct):
            arr.setflags(write=False)

    def __len__(self):
        return int(self.questions.shape[0])

    def head(self, count):
        '''
        Return the first count interactions as a new Sequence
        '''
        return Sequence(self.questions[:count].copy(),
                        self.skills[:count].copy(),
                        self.correct[:count].copy())


@dataclass(frozen=True)
class Dataset:
    '''
    Students' sequences with their vocabularies; sequences[i] belongs to
    the student with dense index i + 1
    '''
    sequences: Tuple[Sequence, ...]
    question_vocab: Vocab
    skill_vocab: Vocab
    student_vocab: Vocab
    has_no_skill: bool = False

    @classmethod
    def empty(cls):
        return cls((), Vocab(), Vocab(), Vocab())

    @property
    def n_students(self):
        return len(self.sequences)

    def sequence(self, student_idx):
        return self.sequences[student_idx - 1]

    def student_indices(self):
        return list(range(1, len(self.sequences) + 1))

    def no_skill_index(self):
        '''
        Dense index of the no-skill category, or None when every
        interaction carries a skill
        '''
        return len(self.skill_vocab) if self.has_no_skill else None

    def decode_sequence(self, student_idx):
        '''
        Map a student's sequence back to external identifiers as a list
        of (question, skill, correct) tuples
        '''
        seq = self.sequence(student_idx)
        return [(self.question_vocab.decode(int(q)),
                 self.skill_vocab.decode(int(s)),
                 int(c))
                for q, s, c in zip(seq.questions, seq.skills, seq.correct)]


@dataclass(frozen=True)
class Split:
    '''
    Partition of dense student indices into train and test sides
    '''
    train_students: frozenset
    test_students: frozenset
    seed: int


@dataclass(frozen=True)
class Stats:
    n_students: int = 0
    n_questions: int = 0
    n_skills: int = 0
    n_interactions: int = 0

    def __str__(self):
        return 'students={0} interactions={1} questions={2} skills={3}'\
            .format(self.n_students, self.n_interactions, self.n_questions,
                    self.n_skills)


def _parse_row(row, line):
    '''
    Validate one CSV record and return an Interaction
    '''
    if len(row) != len(CSV_COLUMNS):
        raise InteractionParseError(
            'expected {0} fields, found {1}'.format(
                len(CSV_COLUMNS), len(row)), line=line)
    student, question, skill, correct, timestamp = [
        val.strip() for val in row]
    if not student:
        raise InteractionParseError('empty student id', line, 'student_id')
    if not question:
        raise InteractionParseError('empty question id', line,
                                    'question_id')
    if correct not in ('0', '1'):
        raise InteractionParseError(
            'correct must be 0 or 1, got {0!r}'.format(correct), line,
            'correct')
    if timestamp:
        try:
            order_key = int(timestamp)
        except ValueError:
            raise InteractionParseError(
                'timestamp must be an integer, got {0!r}'.format(timestamp),
                line, 'timestamp')
    else:
        order_key = line
    return Interaction(student=student, question=question,
                       skill=skill or None, correct=int(correct),
                       order_key=order_key, line=line)


def parse_interactions(stream, strict=True):
    '''
    Function to parse an interaction CSV export into an InteractionLog

    Parameters
    ----------
    :type stream: file-like or str
    :param stream: text stream (or the full text) in the interaction CSV
        format with header
        student_id,question_id,skill_id,correct,timestamp
    :type strict: bool
    :param strict: (optional), default=True
        raise on the first malformed row; when False malformed rows are
        skipped and counted, and students left without any valid row are
        reported as dropped

    Returns
    -------
    :return: log : InteractionLog
        all valid rows in input order
    '''

    # Init variables
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    log = InteractionLog()

    # Check the header
    try:
        header = next(reader)
    except StopIteration:
        raise InteractionParseError(
            'missing header; expected {0}'.format(','.join(CSV_COLUMNS)))
    header = [col.strip().lstrip('\ufeff') for col in header]
    if tuple(header) != CSV_COLUMNS:
        raise InteractionParseError(
            'missing header; expected {0}, found {1}'.format(
                ','.join(CSV_COLUMNS), ','.join(header)), line=1)

    # Parse body rows
    seen_students = set()
    bad_students = set()
    for line, row in enumerate(reader, start=2):
        if not row or all(not val.strip() for val in row):
            continue
        try:
            interaction = _parse_row(row, line)
        except InteractionParseError:
            if strict:
                raise
            log.dropped_rows += 1
            if row[0].strip():
                bad_students.add(row[0].strip())
            continue
        seen_students.add(interaction.student)
        log.interactions.append(interaction)

    # Report what lenient parsing threw away
    if log.dropped_rows:
        log.dropped_students = len(bad_students - seen_students)
        logger.warning('Dropped %d malformed rows (%d students had no valid '
                       'row)', log.dropped_rows, log.dropped_students)

    return log


def remap_ids(log):
    '''
    Function to assign dense indices to students, questions and skills
    in first-appearance order and build per-student sorted sequences

    Parameters
    ----------
    :type log: InteractionLog
    :param log: non-empty interaction log

    Returns
    -------
    :return: dataset : Dataset
        immutable dataset; absent skills map to a dedicated no-skill
        index placed after every real skill
    '''

    if not len(log):
        raise ValueError('cannot remap an empty interaction log')

    # Init vocabularies in first-appearance order
    student_vocab = Vocab()
    question_vocab = Vocab()
    skill_vocab = Vocab()
    has_no_skill = False
    no_skill_idx = None
    for inter in log.interactions:
        student_vocab.add(inter.student)
        question_vocab.add(inter.question)
        if inter.skill is None:
            has_no_skill = True
        else:
            skill_vocab.add(inter.skill)
    if has_no_skill:
        no_skill_idx = skill_vocab.add(None)

    # Group by student keeping input order for the stable sort
    grouped = [[] for _ in range(len(student_vocab))]
    for inter in log.interactions:
        grouped[student_vocab.encode(inter.student) - 1].append(inter)

    sequences = []
    for rows in grouped:
        rows = sorted(rows, key=lambda inter: (inter.order_key, inter.line))
        questions = np.array([question_vocab.encode(r.question)
                              for r in rows], dtype=np.int32)
        skills = np.array([no_skill_idx if r.skill is None
                           else skill_vocab.encode(r.skill) for r in rows],
                          dtype=np.int32)
        correct = np.array([r.correct for r in rows], dtype=np.int32)
        sequences.append(Sequence(questions, skills, correct))

    return Dataset(tuple(sequences), question_vocab, skill_vocab,
                   student_vocab, has_no_skill)


def split_students(dataset, ratio, seed):
    '''
    Function to split dense student indices into train and test sides
    with a seeded shuffle; the first round(ratio * n) shuffled students
    go to train

    Parameters
    ----------
    :type dataset: Dataset
    :param dataset: dataset with at least 2 students
    :type ratio: float
    :param ratio: train fraction, strictly between 0 and 1
    :type seed: int
    :param seed: unsigned 64-bit seed

    Returns
    -------
    :return: split : Split
    '''

    if not 0.0 < ratio < 1.0:
        raise ValueError('split ratio must lie in (0, 1), got {0}'.format(
            ratio))
    n_students = dataset.n_students
    if n_students < 2:
        raise ValueError('at least 2 students are needed to split, got '
                         '{0}'.format(n_students))

    rng = np.random.default_rng(np.uint64(seed))
    order = rng.permutation(np.arange(1, n_students + 1))
    n_train = int(np.floor(ratio * n_students + 0.5))

    return Split(train_students=frozenset(int(i) for i in order[:n_train]),
                 test_students=frozenset(int(i) for i in order[n_train:]),
                 seed=int(seed))


def dataset_stats(dataset):
    '''
    Function to count students, questions, skills and interactions;
    the no-skill category is not counted as a skill
    '''

    n_skills = len(dataset.skill_vocab) - int(dataset.has_no_skill)
    return Stats(n_students=dataset.n_students,
                 n_questions=len(dataset.question_vocab),
                 n_skills=n_skills,
                 n_interactions=sum(len(seq) for seq in dataset.sequences))


def load_interactions_csv(path, strict=True):
    '''
    Function to parse and remap an interaction CSV file in one step
    '''

    try:
        with open(path, 'r', encoding='utf-8', newline='') as csv_in:
            log = parse_interactions(csv_in, strict=strict)
    except (UnicodeDecodeError, csv.Error) as exc:
        raise InteractionParseError(
            'not an interaction CSV (expected header {0}): {1}'.format(
                ','.join(CSV_COLUMNS), exc))
    return remap_ids(log)
