"""Synthetic two-cluster sparse curves and their dense-data optimal centers.

Subject i of cluster k is observed at N_i uniform times with values

    X_i(t) = sum_u (u^-1 (Z_iu - 1) + mu_ku) sqrt(2) sin(pi u t) + eps

where eps ~ Normal(0, sigma^2) is drawn per observation and
N_i ~ Binomial(2 N_tp, 1/2) is raised to at least 2. The random effect is
Exponential(1) and comes in two forms:

    subject   one Z_i shared by all 40 terms (Z_iu = Z_i)
    term      an independent Z_iu for every term u
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.cluster import KMeans

from lib.dataset import from_arrays
from lib.errors import ConfigError
from lib.log_setup import logger

N_TERMS = 40
MIN_MEASUREMENTS = 2

MU = np.zeros((2, N_TERMS))
MU[0, :6] = (0.5, -0.2, 1.0, -0.5, 0.0, -0.7)
MU[1, :6] = (0.0, -0.75, 0.75, -0.15, 1.4, 0.1)
MU.setflags(write=False)


class RandomEffect(str, Enum):
    SUBJECT = "subject"
    TERM = "term"


@dataclass(frozen=True)
class SimConfig:
    n: int
    ntp: float
    sigma: float
    seed: int = 0
    n_terms: int = N_TERMS
    random_effect: RandomEffect = RandomEffect.SUBJECT

    def validate(self):
        if int(self.n) < 2 or int(self.n) % 2:
            raise ConfigError(f"n must be an even number >= 2, got {self.n}")
        if self.ntp < 2:
            raise ConfigError(f"expected measurements per subject must be >= 2, got {self.ntp}")
        if not self.sigma >= 0:
            raise ConfigError(f"noise standard deviation must be >= 0, got {self.sigma}")
        if int(self.n_terms) != N_TERMS:
            raise ConfigError(f"the generator uses exactly {N_TERMS} sine terms, got {self.n_terms}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        try:
            RandomEffect(self.random_effect)
        except ValueError:
            raise ConfigError(f"unknown random effect {self.random_effect!r}; expected 'subject' or 'term'")
        return self

    def to_dict(self):
        return {"n": int(self.n), "ntp": float(self.ntp), "sigma": float(self.sigma),
                "seed": int(self.seed), "n_terms": int(self.n_terms),
                "random_effect": RandomEffect(self.random_effect).value}


def sine_design(t, n_terms=N_TERMS):
    """sqrt(2) sin(pi u t) for u = 1..n_terms, shape (len(t), n_terms)."""
    t = np.asarray(t, dtype=float).ravel()
    u = np.arange(1, n_terms + 1)
    return np.sqrt(2.0) * np.sin(np.pi * t[:, None] * u[None, :])


def subject_coefficients(cluster, z):
    """Sine coefficients u^-1 (z - 1) + mu_ku, one row per subject.

    z holds one value per subject (shape (s,)) or one per subject and term
    (shape (s, 40)).
    """
    z = np.asarray(z, dtype=float)
    z = np.atleast_1d(z)[:, None] if z.ndim < 2 else z
    u = np.arange(1, N_TERMS + 1)
    return (z - 1.0) / u[None, :] + MU[cluster][None, :]


def draw_random_effects(rng, size, random_effect=RandomEffect.SUBJECT):
    """Exponential(1) random effects for ``size`` subjects in the requested form."""
    if RandomEffect(random_effect) is RandomEffect.TERM:
        return rng.exponential(1.0, (size, N_TERMS))
    return rng.exponential(1.0, size)


def mean_curve(cluster, t):
    """Noise-free cluster curve with Z = 1; cluster is 0 or 1."""
    if cluster not in (0, 1):
        raise ConfigError(f"cluster must be 0 or 1, got {cluster}")
    return sine_design(t) @ MU[cluster]


def generate(cfg, fixed_z=None):
    """Sparse dataset on [0, 1] and the planted 0-based labels.

    The first n/2 subjects belong to cluster 0. Subject i draws from its own
    stream spawned from the seed, so the data are a pure function of cfg.
    ``fixed_z`` replaces every random effect (with 1.0 the noise-free curves remain).
    """
    cfg.validate()
    n = int(cfg.n)
    labels = np.repeat([0, 1], n // 2)
    streams = np.random.SeedSequence(int(cfg.seed)).spawn(n)

    ids, times, values = [], [], []
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        n_obs = max(MIN_MEASUREMENTS, int(rng.binomial(int(round(2 * cfg.ntp)), 0.5)))
        t = rng.uniform(0.0, 1.0, n_obs)
        z = draw_random_effects(rng, 1, cfg.random_effect)
        eps = rng.normal(0.0, cfg.sigma, n_obs) if cfg.sigma > 0 else np.zeros(n_obs)
        if fixed_z is not None:
            z = np.full_like(z, float(fixed_z))
        x = sine_design(t) @ subject_coefficients(labels[i], z)[0] + eps
        ids.append(f"s{i + 1:05d}")
        times.append(t)
        values.append(x)

    ds = from_arrays(ids, times, values, domain=(0.0, 1.0))
    logger.debug(f"Simulated n={n}, ntp={cfg.ntp}, sigma={cfg.sigma}, {RandomEffect(cfg.random_effect).value} "
                 f"random effect: {int(ds.n_obs.sum())} observations")
    return ds, labels


def population_centers(cfg, n_large=10000, grid_size=400, restarts=50):
    """Dense-data k-means centers of the noise-free curve distribution.

    ``n_large`` noise-free subjects (half per cluster) with the random effect
    form of cfg are evaluated on an equispaced grid of ``grid_size`` points
    including both ends. Returns the grid and a (2, grid_size) array; the row
    closer to cluster 0's mean curve comes first. The noise level of cfg plays
    no part.
    """
    if int(n_large) < 1000 or int(n_large) % 2:
        raise ConfigError(f"n_large must be an even number >= 1000, got {n_large}")
    if int(grid_size) < 100:
        raise ConfigError(f"grid_size must be >= 100, got {grid_size}")
    if int(restarts) < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")
    try:
        random_effect = RandomEffect(cfg.random_effect)
    except ValueError:
        raise ConfigError(f"unknown random effect {cfg.random_effect!r}; expected 'subject' or 'term'")

    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(n_large)]))
    grid = np.linspace(0.0, 1.0, int(grid_size))
    half = int(n_large) // 2
    z = draw_random_effects(rng, int(n_large), random_effect)
    coefs = np.vstack([subject_coefficients(0, z[:half]), subject_coefficients(1, z[half:])])
    curves = coefs @ sine_design(grid).T

    km = KMeans(n_clusters=2, n_init=int(restarts), random_state=int(cfg.seed) % 2 ** 32)
    km.fit(curves)
    centers = km.cluster_centers_

    target = mean_curve(0, grid)
    order = np.argsort([np.mean((c - target) ** 2) for c in centers], kind="stable")
    logger.info(f"Population centers from {n_large} dense curves on {grid_size} points "
                f"({random_effect.value} random effect)")
    return grid, centers[order]
