#!/usr/bin/env python3

import sys
sys.path.append('./')
sys.path.append('../')
import unittest

import numpy as np

from lib.errors import ConfigError
from lib.simulation import (MU, N_TERMS, RandomEffect, SimConfig, draw_random_effects, generate, mean_curve,
                            population_centers, sine_design, subject_coefficients)


class TestGenerate(unittest.TestCase):
    def test_01_mu_vectors(self):
        self.assertEqual(MU.shape, (2, 40))
        np.testing.assert_array_equal(MU[0, :6], [0.5, -0.2, 1.0, -0.5, 0.0, -0.7])
        np.testing.assert_array_equal(MU[1, :6], [0.0, -0.75, 0.75, -0.15, 1.4, 0.1])
        self.assertFalse(np.any(MU[:, 6:]))

    def test_02_noise_free(self):
        ds, labels = generate(SimConfig(10, 5, 0.0, seed=1), fixed_z=1.0)
        for s, k in zip(ds.subjects, labels):
            np.testing.assert_allclose(s.values, mean_curve(int(k), s.times), atol=1e-12)

    def test_03_layout(self):
        ds, labels = generate(SimConfig(50, 3, 0.1, seed=1))
        self.assertEqual(ds.n, 50)
        self.assertEqual(ds.domain, (0.0, 1.0))
        np.testing.assert_array_equal(labels, np.repeat([0, 1], 25))
        self.assertEqual(ds.ids[0], "s00001")
        self.assertTrue(np.all(ds.n_obs >= 2))
        self.assertTrue(np.all(np.isfinite(ds.values_flat)))
        for s in ds.subjects:
            self.assertTrue(np.all(np.diff(s.times) >= 0))
            self.assertTrue(np.all((s.times >= 0) & (s.times <= 1)))

    def test_04_measurement_counts(self):
        ds, _ = generate(SimConfig(20000, 3, 1.0, seed=2))
        counts = ds.n_obs
        self.assertEqual(counts.min(), 2)
        # E[max(2, Binomial(6, 1/2))] = 3 + 2 P(N=0) + P(N=1)
        expected = 3 + (2 * 1 + 6) / 64
        self.assertAlmostEqual(counts.mean(), expected, delta=4 * counts.std() / np.sqrt(len(counts)))

        ds, _ = generate(SimConfig(4000, 10, 1.0, seed=3))
        self.assertAlmostEqual(ds.n_obs.mean(), 10.0, delta=4 * ds.n_obs.std() / np.sqrt(4000))

    def test_05_deterministic(self):
        a, _ = generate(SimConfig(30, 5, 1.0, seed=7))
        b, _ = generate(SimConfig(30, 5, 1.0, seed=7))
        c, _ = generate(SimConfig(30, 5, 1.0, seed=8))
        np.testing.assert_array_equal(a.times_flat, b.times_flat)
        np.testing.assert_array_equal(a.values_flat, b.values_flat)
        self.assertFalse(a.values_flat.shape == c.values_flat.shape
                         and np.array_equal(a.values_flat, c.values_flat))

    def test_06_cluster_means(self):
        # the mean curve is the expectation because E[Z] = 1
        for random_effect in ("subject", "term"):
            ds, labels = generate(SimConfig(4000, 10, 0.5, seed=4, random_effect=random_effect))
            self.check_cluster_means(ds, labels)

    def check_cluster_means(self, ds, labels):
        for k in (0, 1):
            bins = np.linspace(0, 1, 6)
            times = np.concatenate([s.times for s, lab in zip(ds.subjects, labels) if lab == k])
            values = np.concatenate([s.values for s, lab in zip(ds.subjects, labels) if lab == k])
            for lo, hi in zip(bins[:-1], bins[1:]):
                inside = (times >= lo) & (times < hi)
                residual = values[inside] - mean_curve(k, times[inside])
                se = residual.std() / np.sqrt(inside.sum())
                # observations of one subject share Z, so allow for the design effect
                self.assertLess(abs(residual.mean()), 6 * se)

    def test_07_small_config(self):
        ds, labels = generate(SimConfig(2, 2, 0.0, seed=0))
        self.assertEqual(ds.n, 2)
        self.assertEqual(list(labels), [0, 1])

    def test_08_validation(self):
        for bad in (SimConfig(3, 5, 1.0), SimConfig(0, 5, 1.0), SimConfig(10, 1.5, 1.0),
                    SimConfig(10, 5, -1.0), SimConfig(10, 5, 1.0, seed=-2), SimConfig(10, 5, 1.0, n_terms=20),
                    SimConfig(10, 5, 1.0, random_effect="cluster")):
            with self.assertRaises(ConfigError):
                bad.validate()

    def test_09_random_effect_shapes(self):
        rng = np.random.default_rng(0)
        self.assertEqual(draw_random_effects(rng, 5).shape, (5,))
        self.assertEqual(draw_random_effects(rng, 5, "term").shape, (5, N_TERMS))
        shared = subject_coefficients(0, [2.0])
        per_term = subject_coefficients(0, np.full((1, N_TERMS), 2.0))
        np.testing.assert_allclose(shared, per_term)
        self.assertEqual(SimConfig(2, 2, 0.0).to_dict()["random_effect"], "subject")
        self.assertEqual(SimConfig(2, 2, 0.0, random_effect=RandomEffect.TERM).to_dict()["random_effect"], "term")

    def test_10_shared_versus_per_term(self):
        # without noise, X - mean = sum_u (Z_iu - 1) u^-1 sqrt(2) sin(pi u t); a shared Z makes the
        # ratio to the sawtooth sum_u u^-1 sqrt(2) sin(pi u t) constant within a subject
        sawtooth = lambda t: sine_design(t) @ (1.0 / np.arange(1, N_TERMS + 1))
        for random_effect, constant in (("subject", True), ("term", False)):
            ds, labels = generate(SimConfig(40, 10, 0.0, seed=6, random_effect=random_effect))
            spread = []
            for s, k in zip(ds.subjects, labels):
                inside = (s.times > 0.05) & (s.times < 0.95)
                if inside.sum() < 2:
                    continue
                ratio = (s.values[inside] - mean_curve(int(k), s.times[inside])) / sawtooth(s.times[inside])
                spread.append(np.ptp(ratio))
            if constant:
                np.testing.assert_allclose(spread, 0.0, atol=1e-9)
            else:
                self.assertGreater(np.median(spread), 0.1)

    def test_11_noise_free_per_term(self):
        ds, labels = generate(SimConfig(10, 5, 0.0, seed=1, random_effect="term"), fixed_z=1.0)
        for s, k in zip(ds.subjects, labels):
            np.testing.assert_allclose(s.values, mean_curve(int(k), s.times), atol=1e-12)


class TestMeanCurve(unittest.TestCase):
    def test_01_endpoints(self):
        for k in (0, 1):
            np.testing.assert_allclose(mean_curve(k, [0.0, 1.0]), [0.0, 0.0], atol=1e-12)

    def test_02_midpoint(self):
        self.assertAlmostEqual(mean_curve(0, [0.5])[0], -np.sqrt(2) / 2, places=12)
        self.assertAlmostEqual(mean_curve(1, [0.5])[0], np.sqrt(2) * (0.0 - 0.75 + 1.4), places=12)

    def test_03_design(self):
        t = np.array([0.25])
        expected = np.sqrt(2) * np.sin(np.pi * t[0] * np.arange(1, 41))
        np.testing.assert_allclose(sine_design(t)[0], expected)
        with self.assertRaises(ConfigError):
            mean_curve(2, t)


class TestPopulationCenters(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid, cls.centers = population_centers(SimConfig(2, 2, 0.0, seed=0), 2000, 120, restarts=5)

    def test_01_shape(self):
        self.assertEqual(self.centers.shape, (2, 120))
        np.testing.assert_allclose(self.grid[[0, -1]], [0.0, 1.0])

    def test_02_vanish_at_ends(self):
        np.testing.assert_allclose(self.centers[:, [0, -1]], 0.0, atol=1e-10)

    def test_03_order(self):
        target = mean_curve(0, self.grid)
        first, second = (np.mean((c - target) ** 2) for c in self.centers)
        self.assertLessEqual(first, second)
        self.assertGreater(np.sqrt(np.mean((self.centers[0] - self.centers[1]) ** 2)), 0.1)

    def test_04_sigma_irrelevant(self):
        _, again = population_centers(SimConfig(2, 2, 3.0, seed=0), 2000, 120, restarts=5)
        np.testing.assert_array_equal(again, self.centers)

    def test_05_per_term_centers(self):
        grid, centers = population_centers(SimConfig(2, 2, 0.0, seed=0, random_effect="term"), 2000, 120,
                                           restarts=5)
        self.assertEqual(centers.shape, (2, 120))
        np.testing.assert_allclose(centers[:, [0, -1]], 0.0, atol=1e-10)
        # each center sits nearer its own cluster's mean curve than the other one
        for k in (0, 1):
            own = np.mean((centers[k] - mean_curve(k, grid)) ** 2)
            other = np.mean((centers[k] - mean_curve(1 - k, grid)) ** 2)
            self.assertLess(own, other)

    def test_06_validation(self):
        cfg = SimConfig(2, 2, 0.0)
        for n_large, grid_size in ((999, 400), (1001, 400), (2000, 50)):
            with self.assertRaises(ConfigError):
                population_centers(cfg, n_large, grid_size)
        with self.assertRaises(ConfigError):
            population_centers(SimConfig(2, 2, 0.0, random_effect="cluster"), 2000, 120)


if __name__ == '__main__':
    unittest.main()
