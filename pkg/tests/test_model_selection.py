#!/usr/bin/env python3

import sys
sys.path.append('./')
sys.path.append('../')
import unittest

import numpy as np

from lib.dataset import from_arrays
from lib.errors import ConfigError
from lib.fkm_core import FitConfig
from lib.model_selection import disagreement, select_lambda, split_halves


def two_bands(n=24, gap=20.0, seed=0):
    rng = np.random.default_rng(seed)
    times = [rng.uniform(0, 1, 4) for _ in range(n)]
    values = [(i % 2) * gap + rng.normal(0, 0.1, 4) for i in range(n)]
    return from_arrays([str(i) for i in range(n)], times, values, domain=(0.0, 1.0))


class TestSelection(unittest.TestCase):
    def setUp(self):
        self.config = FitConfig(k=2, nbasis=3, restarts=3, seed=0)

    def test_01_disagreement(self):
        self.assertEqual(disagreement([0, 0, 1, 1], [1, 1, 0, 0]), 0.0)
        self.assertEqual(disagreement([0, 0, 1, 1], [0, 1, 1, 1]), 0.25)

    def test_02_split_halves(self):
        a, b = split_halves(11, np.random.default_rng(0))
        self.assertEqual(len(a), 5)
        self.assertEqual(len(b), 6)
        self.assertEqual(sorted(np.concatenate([a, b])), list(range(11)))

    def test_03_separated_clusters(self):
        selection = select_lambda(two_bands(), self.config, [0.0, 10.0], replicates=3, seed=1, restarts=3)
        np.testing.assert_allclose(selection.instability, 0.0, atol=1e-12)
        self.assertEqual(selection.chosen, 0.0)

    def test_04_single_candidate(self):
        selection = select_lambda(two_bands(), self.config, [25.0], replicates=2, seed=1, restarts=2)
        self.assertEqual(selection.chosen, 25.0)
        self.assertEqual(len(selection.instability), 1)

    def test_05_deterministic(self):
        rng = np.random.default_rng(5)
        times = [rng.uniform(0, 1, 3) for _ in range(20)]
        values = [rng.normal(0, 1, 3) for _ in range(20)]
        ds = from_arrays([str(i) for i in range(20)], times, values, domain=(0.0, 1.0))
        a = select_lambda(ds, self.config, [0.01, 1.0, 50.0], replicates=3, seed=7, restarts=2)
        b = select_lambda(ds, self.config, [0.01, 1.0, 50.0], replicates=3, seed=7, restarts=2, workers=4)
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertTrue(np.all((a.instability >= 0) & (a.instability <= 0.5 + 1e-12)))
        self.assertEqual(a.chosen, a.candidates[int(np.argmin(a.instability))])

    def test_06_errors(self):
        ds = two_bands(n=6)
        with self.assertRaises(ConfigError):
            select_lambda(ds, self.config, [], 2, 0)
        with self.assertRaises(ConfigError):
            select_lambda(ds, self.config, [-1.0], 2, 0)
        with self.assertRaises(ConfigError):
            select_lambda(ds, self.config, [1.0], 0, 0)
        with self.assertRaises(ConfigError):
            select_lambda(two_bands(n=3), self.config, [1.0], 2, 0)

    def test_07_serialization(self):
        selection = select_lambda(two_bands(), self.config, [0.0, 5.0], replicates=1, seed=3, restarts=1)
        data = selection.to_dict()
        self.assertEqual(data["candidates"], [0.0, 5.0])
        self.assertEqual(data["replicates"], 1)
        self.assertEqual(data["seed"], 3)


if __name__ == '__main__':
    unittest.main()
