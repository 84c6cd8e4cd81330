#!/usr/bin/env python3

import sys
sys.path.append('./')
sys.path.append('../')
import itertools
import unittest

import numpy as np

from lib.errors import DataError
from lib.metrics import (adjusted_rand_index, ccr, confusion_table, hausdorff_centers, hausdorff_sampled,
                         max_matching, uniform_grid)


def brute_ccr(true, pred):
    t_values, p_values = sorted(set(true)), sorted(set(pred))
    best = 0
    if len(t_values) <= len(p_values):
        for image in itertools.permutations(p_values, len(t_values)):
            mapping = dict(zip(t_values, image))
            best = max(best, sum(mapping[a] == b for a, b in zip(true, pred)))
    else:
        for image in itertools.permutations(t_values, len(p_values)):
            mapping = dict(zip(p_values, image))
            best = max(best, sum(mapping[b] == a for a, b in zip(true, pred)))
    return 100.0 * best / len(true)


def brute_ari(true, pred):
    n = len(true)
    pairs = list(itertools.combinations(range(n), 2))
    if not pairs:
        return None
    both = sum(true[i] == true[j] and pred[i] == pred[j] for i, j in pairs)
    same_true = sum(true[i] == true[j] for i, j in pairs)
    same_pred = sum(pred[i] == pred[j] for i, j in pairs)
    expected = same_true * same_pred / len(pairs)
    maximum = (same_true + same_pred) / 2.0
    if maximum == expected:
        return None
    return (both - expected) / (maximum - expected)


class TestLabelAgreement(unittest.TestCase):
    def test_01_ccr_examples(self):
        self.assertEqual(ccr([1, 1, 2, 2], [1, 1, 2, 2]), 100.0)
        self.assertEqual(ccr([1, 1, 2, 2], [2, 2, 1, 1]), 100.0)
        self.assertEqual(ccr([1, 1, 2, 2], [1, 2, 2, 2]), 75.0)

    def test_02_ccr_unequal_k(self):
        self.assertEqual(ccr([0, 0, 0, 1, 1, 2], [0, 0, 0, 0, 0, 0]), 50.0)
        self.assertEqual(ccr([0, 0, 1, 1], [0, 1, 2, 3]), 50.0)

    def test_03_constant_prediction(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            true = rng.integers(0, 3, size=15)
            largest = np.bincount(true).max()
            self.assertGreaterEqual(ccr(true, np.zeros(15, dtype=int)), 100.0 * largest / 15 - 1e-12)

    def test_04_ari_examples(self):
        self.assertEqual(adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 2]), 1.0)
        self.assertAlmostEqual(adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]), -0.5, places=12)
        self.assertEqual(adjusted_rand_index([1, 1, 2, 2], [2, 2, 1, 1]), 1.0)

    def test_05_ari_degenerate(self):
        self.assertEqual(adjusted_rand_index([1, 1, 1], [2, 2, 2]), 1.0)
        self.assertEqual(adjusted_rand_index([1, 2, 3], [3, 1, 2]), 1.0)
        self.assertEqual(adjusted_rand_index([5], [7]), 1.0)

    def test_06_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            k_true, k_pred = rng.integers(1, 5, size=2)
            true = rng.integers(0, k_true, size=n)
            pred = rng.integers(0, k_pred, size=n)
            self.assertAlmostEqual(ccr(true, pred), brute_ccr(list(true), list(pred)), places=10)
            expected = brute_ari(list(true), list(pred))
            if expected is not None:
                self.assertAlmostEqual(adjusted_rand_index(true, pred), expected, places=10)
            else:
                self.check_degenerate_ari(true, pred)

    def check_degenerate_ari(self, true, pred):
        # no chance correction possible: equal partitions score 1, others 0
        canonical = lambda labels: [list(labels).index(v) for v in labels]
        expected = 1.0 if canonical(true) == canonical(pred) else 0.0
        self.assertEqual(adjusted_rand_index(true, pred), expected)

    def test_07_relabeling_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            true = rng.integers(0, 3, size=12)
            pred = rng.integers(0, 3, size=12)
            relabeled = rng.permutation(3)[pred] + 10
            self.assertEqual(ccr(true, pred), ccr(true, relabeled))
            self.assertAlmostEqual(adjusted_rand_index(true, pred), adjusted_rand_index(true, relabeled), places=12)

    def test_08_string_labels(self):
        self.assertEqual(ccr(["F", "F", "M"], ["1", "1", "2"]), 100.0)

    def test_09_errors(self):
        with self.assertRaises(DataError):
            ccr([1, 2], [1])
        with self.assertRaises(DataError):
            adjusted_rand_index([], [])

    def test_10_large_k_matching(self):
        rng = np.random.default_rng(3)
        perm = rng.permutation(12)
        true = np.repeat(np.arange(12), 3)
        self.assertEqual(ccr(true, perm[true]), 100.0)
        table = confusion_table(true, perm[true])
        self.assertEqual(max_matching(table.counts), 36)

    def test_11_single_subject(self):
        self.assertEqual(brute_ari([3], [1]), None)
        self.assertEqual(adjusted_rand_index([3], [1]), 1.0)
        self.assertEqual(ccr([3], [1]), 100.0)


class TestHausdorff(unittest.TestCase):
    def test_01_identical(self):
        curves = [np.sin, np.cos]
        self.assertEqual(hausdorff_centers(curves, curves), 0.0)

    def test_02_constant_shift(self):
        f = lambda t: np.sin(3 * t)
        self.assertAlmostEqual(hausdorff_centers([f], [lambda t: f(t) + 0.7]), 0.7, places=12)
        self.assertAlmostEqual(hausdorff_centers([f], [lambda t: f(t) - 0.3]), 0.3, places=12)

    def test_03_quadrature_oracle(self):
        rng = np.random.default_rng(4)
        fine = np.linspace(0, 1, 200001)
        for _ in range(10):
            a = [np.polynomial.Polynomial(rng.normal(size=4)) for _ in range(2)]
            b = [np.polynomial.Polynomial(rng.normal(size=4)) for _ in range(2)]
            d = np.zeros((2, 2))
            for i, f in enumerate(a):
                for j, g in enumerate(b):
                    diff2 = (f(fine) - g(fine)) ** 2
                    d[i, j] = np.sqrt(np.sum((diff2[1:] + diff2[:-1]) / 2.0 * np.diff(fine)))
            expected = max(d.min(axis=1).max(), d.min(axis=0).max())
            self.assertAlmostEqual(hausdorff_centers(a, b, 4096), expected, delta=1e-6 * max(1.0, expected))

    def test_04_metric_properties(self):
        rng = np.random.default_rng(5)
        grid = uniform_grid(256)
        for _ in range(50):
            a, b, c = (rng.normal(size=(int(rng.integers(1, 4)), 256)) for _ in range(3))
            ab, ba = hausdorff_sampled(a, b), hausdorff_sampled(b, a)
            self.assertEqual(ab, ba)
            self.assertGreaterEqual(ab, 0.0)
            self.assertLessEqual(hausdorff_sampled(a, c), ab + hausdorff_sampled(b, c) + 1e-12)
        self.assertEqual(len(grid), 256)
        self.assertTrue(np.all((grid > 0) & (grid < 1)))

    def test_05_errors(self):
        with self.assertRaises(DataError):
            hausdorff_centers([], [np.sin])
        with self.assertRaises(DataError):
            hausdorff_sampled(np.zeros((1, 4)), np.zeros((1, 5)))


if __name__ == '__main__':
    unittest.main()
