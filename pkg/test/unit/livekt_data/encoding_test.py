# test/unit/livekt_data/encoding_test.py
#

'''
Unit test module to perform testing on livekt_data/encoding.py
'''

# Import packages
import io
import unittest

import numpy as np

from livekt_data.data_model import PAD, Dataset, Sequence, Split, Vocab
from livekt_data.encoding import CORRECT_OFFSET, EncodingError, \
    build_row, build_tables, column_families
from test.unit.fixtures import make_dataset


def _sequence(questions, skills, correct):
    return Sequence(np.asarray(questions, dtype=np.int32),
                    np.asarray(skills, dtype=np.int32),
                    np.asarray(correct, dtype=np.int32))


def _toy_dataset(lengths):
    sequences = []
    for pos, length in enumerate(lengths):
        sequences.append(_sequence(np.arange(1, length + 1),
                                   np.ones(length),
                                   (np.arange(length) + pos) % 2))
    n_q = max(lengths)
    return Dataset(tuple(sequences),
                   Vocab(['q{0}'.format(i) for i in range(n_q)]),
                   Vocab(['k']),
                   Vocab(['s{0}'.format(i) for i in range(len(lengths))]))


class BuildRowTestCase(unittest.TestCase):
    '''
    TestCase for build_row
    '''

    def test_full_row(self):
        seq = _sequence([3, 4, 5, 6, 7], [1, 1, 2, 2, 1], [1, 0, 1, 1, 0])
        row = build_row(seq, 5, 5)
        self.assertEqual(row.observed_len, 5)
        self.assertFalse(np.any(row.features() == PAD))
        self.assertEqual(row.label, 0)

    def test_right_alignment(self):
        seq = _sequence([11, 12, 13], [1, 2, 1], [1, 0, 1])
        row = build_row(seq, 5, 10)
        np.testing.assert_array_equal(row.questions, [PAD, PAD, 11, 12, 13])
        np.testing.assert_array_equal(row.skills, [PAD, PAD, 1, 2, 1])
        np.testing.assert_array_equal(
            row.past_correct,
            [PAD, PAD, 1 + CORRECT_OFFSET, 0 + CORRECT_OFFSET])
        self.assertEqual(row.label, 1)
        self.assertEqual(row.observed_len, 3)

    def test_minimum_context(self):
        seq = _sequence([1, 2, 3], [1, 1, 1], [1, 1, 0])
        self.assertIsNone(build_row(seq, 5, 1))
        self.assertIsNone(build_row(seq, 5, 0))
        self.assertIsNone(build_row(_sequence([1], [1], [1]), 5, 5))
        self.assertIsNotNone(build_row(seq, 5, 2))

    def test_bad_horizon(self):
        seq = _sequence([1, 2], [1, 1], [1, 0])
        with self.assertRaises(EncodingError):
            build_row(seq, 1, 2)

    def test_column_families(self):
        families, offsets = column_families(3)
        np.testing.assert_array_equal(families, [0, 0, 0, 1, 1, 1, 2, 2])
        np.testing.assert_array_equal(offsets, [2, 1, 0, 2, 1, 0, 2, 1])


class EncodingPropertiesTestCase(unittest.TestCase):
    '''
    Randomized checks of the row layout over many sequences
    '''

    def setUp(self):
        self.rng = np.random.default_rng(2024)
        self.sequences = []
        for _ in range(1000):
            length = int(self.rng.integers(1, 30))
            self.sequences.append(_sequence(
                self.rng.integers(1, 50, size=length),
                self.rng.integers(1, 8, size=length),
                self.rng.integers(0, 2, size=length)))

    def test_layout_laws(self):
        for seq in self.sequences:
            for T in (5, 10, 15, 20):
                visible = int(self.rng.integers(0, 25))
                row = build_row(seq, T, visible)
                k = min(visible, T, len(seq))
                if k < 2:
                    self.assertIsNone(row)
                    continue
                feats = row.features()
                self.assertEqual(feats.shape, (3 * T - 1,))
                # PAD only in the leading T - k slots of every family
                pad = T - k
                self.assertTrue(np.all(row.questions[:pad] == PAD))
                self.assertTrue(np.all(row.questions[pad:] != PAD))
                self.assertTrue(np.all(row.skills[:pad] == PAD))
                self.assertTrue(np.all(row.skills[pad:] != PAD))
                self.assertTrue(np.all(row.past_correct[:pad] == PAD))
                self.assertTrue(np.all(row.past_correct[pad:] != PAD))
                self.assertNotEqual(row.questions[-1], PAD)
                self.assertEqual(row.label, int(seq.correct[k - 1]))
                self.assertEqual(row.observed_len, k)

    def test_prefix_property(self):
        for seq in self.sequences[:300]:
            T = 10
            for visible in range(2, min(len(seq), T)):
                before = build_row(seq, T, visible)
                after = build_row(seq, T, visible + 1)
                np.testing.assert_array_equal(after.questions[:-1],
                                              before.questions[1:])
                np.testing.assert_array_equal(after.skills[:-1],
                                              before.skills[1:])
                np.testing.assert_array_equal(after.past_correct[:-1],
                                              before.past_correct[1:])
                self.assertEqual(after.questions[-1], seq.questions[visible])
                self.assertEqual(after.past_correct[-1],
                                 before.label + CORRECT_OFFSET)


class BuildTablesTestCase(unittest.TestCase):
    '''
    TestCase for build_tables
    '''

    def test_toy_shapes(self):
        dataset = _toy_dataset([5, 3, 4])
        split = Split(frozenset([1, 2]), frozenset([3]), 0)
        train, test = build_tables(dataset, split, 3, 3, 2)
        self.assertEqual(train.features().shape, (2, 8))
        self.assertEqual(test.features().shape, (1, 8))
        np.testing.assert_array_equal(train.observed_len, [3, 3])
        # held-out label is the third interaction of the test student
        self.assertEqual(int(test.labels[0]),
                         int(dataset.sequence(3).correct[2]))

    def test_saturated_visibility_matches_offline(self):
        dataset = make_dataset(seed=3, n_students=20)
        split = Split(frozenset(range(1, 16)), frozenset(range(16, 21)), 0)
        longest = max(len(seq) for seq in dataset.sequences)
        train, _ = build_tables(dataset, split, 6, longest, 6)
        for pos, student in enumerate(train.student_idx):
            offline = build_row(dataset.sequence(student), 6, 10 ** 6)
            np.testing.assert_array_equal(train.features()[pos],
                                          offline.features())

    def test_deterministic(self):
        dataset = make_dataset(seed=4, n_students=30)
        split = Split(frozenset(range(1, 25)), frozenset(range(25, 31)), 0)
        first = build_tables(dataset, split, 10, 10, 9)
        second = build_tables(dataset, split, 10, 10, 9)
        for a, b in zip(first, second):
            self.assertEqual(a.features().tobytes(), b.features().tobytes())
            self.assertEqual(a.labels.tobytes(), b.labels.tobytes())

    def test_empty_side_named(self):
        dataset = _toy_dataset([5, 1])
        split = Split(frozenset([1]), frozenset([2]), 0)
        with self.assertRaises(EncodingError) as ctx:
            build_tables(dataset, split, 3, 3, 2)
        self.assertIn('test', str(ctx.exception))

    def test_skipped_students_recorded(self):
        dataset = _toy_dataset([5, 1, 4])
        split = Split(frozenset([1, 2]), frozenset([3]), 0)
        train, _ = build_tables(dataset, split, 3, 3, 2)
        self.assertEqual(train.skipped, (2,))
        self.assertEqual(train.n_rows, 1)

    def test_without_labels_and_csv_dump(self):
        dataset = _toy_dataset([5, 3, 4])
        split = Split(frozenset([1, 2]), frozenset([3]), 0)
        _, test = build_tables(dataset, split, 3, 3, 2)
        self.assertIsNone(test.without_labels().labels)
        buf = io.StringIO()
        test.to_csv(buf)
        lines = buf.getvalue().splitlines()
        self.assertEqual(lines[0], 'q1,q2,q3,s1,s2,s3,c1,c2,label')
        self.assertEqual(len(lines), 2)


# Run unittests via main executable
if __name__ == '__main__':
    unittest.main()
