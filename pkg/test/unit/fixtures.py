# test/unit/fixtures.py
#

'''
Synthetic datasets and tables shared by the unit tests
'''

# Import packages
import numpy as np

from livekt_data.data_model import Dataset, Sequence, Vocab
from livekt_data.encoding import EncodedRow, EncodedTable
from livekt_models.priors import simulate_rasch


def make_dataset(seed=0, n_students=40, min_len=2, max_len=25,
                 n_questions=20, n_skills=5, sigma_theta=1.5,
                 sigma_d=1.5, gamma=0.1):
    '''
    Rasch-with-learning dataset with external ids "s<i>", "q<i>", "k<i>"
    '''
    rng = np.random.default_rng(seed)
    question_skill = np.concatenate(
        [[0], rng.integers(1, n_skills + 1, size=n_questions)])
    difficulty = np.concatenate(
        [[0.0], rng.normal(0.0, sigma_d, size=n_questions)])
    sequences = []
    for _ in range(n_students):
        length = int(rng.integers(min_len, max_len + 1))
        questions = rng.integers(1, n_questions + 1, size=length)
        theta = rng.normal(0.0, sigma_theta)
        correct, _ = simulate_rasch(rng, questions, question_skill, theta,
                                    difficulty, gamma)
        sequences.append(Sequence(questions.astype(np.int32),
                                  question_skill[questions].astype(np.int32),
                                  correct))
    return Dataset(tuple(sequences),
                   Vocab(['q{0}'.format(i) for i in range(1, n_questions + 1)]),
                   Vocab(['k{0}'.format(i) for i in range(1, n_skills + 1)]),
                   Vocab(['s{0}'.format(i) for i in range(1, n_students + 1)]))


def make_table(rows_spec, T, with_labels=True):
    '''
    Build a table from (questions, skills, past_correct, label) tuples of
    length T, T and T - 1
    '''
    rows = []
    for pos, (questions, skills, past, label) in enumerate(rows_spec):
        questions = np.asarray(questions, dtype=np.int32)
        rows.append(EncodedRow(
            student_idx=pos + 1, questions=questions,
            skills=np.asarray(skills, dtype=np.int32),
            past_correct=np.asarray(past, dtype=np.int32), label=int(label),
            observed_len=int(np.count_nonzero(questions))))
    return EncodedTable.from_rows(rows, T, with_labels=with_labels)


def random_tables(seed, n_train, n_test, T, n_codes=12):
    '''
    Random fully observed train/test tables with both label classes in
    each; test student ids continue after the train ids
    '''
    rng = np.random.default_rng(seed)

    def _table(n_rows, first_id):
        labels = rng.integers(0, 2, size=n_rows).astype(np.int32)
        labels[0], labels[-1] = 0, 1
        return EncodedTable(
            T=T,
            student_idx=np.arange(first_id, first_id + n_rows,
                                  dtype=np.int64),
            questions=rng.integers(1, n_codes + 1, size=(n_rows, T),
                                   dtype=np.int32),
            skills=rng.integers(1, 4, size=(n_rows, T), dtype=np.int32),
            past_correct=rng.integers(1, 3, size=(n_rows, T - 1),
                                      dtype=np.int32),
            labels=labels,
            observed_len=np.full(n_rows, T, dtype=np.int32))

    return _table(n_train, 1), _table(n_test, n_train + 1)


CSV_HEADER = 'student_id,question_id,skill_id,correct,timestamp\n'


def csv_text(rows):
    '''
    Interaction CSV text from (student, question, skill, correct,
    timestamp) tuples
    '''
    body = ''.join(','.join(str(val) for val in row) + '\n' for row in rows)
    return CSV_HEADER + body


def dataset_rows(dataset):
    '''
    (student, question, skill, correct, timestamp) tuples of a Dataset,
    suitable for csv_text
    '''
    rows = []
    for idx in dataset.student_indices():
        student = dataset.student_vocab.decode(idx)
        for step, (question, skill, correct) in enumerate(
                dataset.decode_sequence(idx)):
            rows.append((student, question, skill or '', correct, step))
    return rows
