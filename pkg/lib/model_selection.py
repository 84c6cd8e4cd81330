"""Smoothing parameter choice by clustering instability.

For every candidate lambda and replicate the subjects are split at random
into two halves, each half is clustered on its own, and every subject of the
full dataset is labeled once by each half's centers. Instability is the
share of subjects the two labelings disagree on after the best matching of
cluster labels; the candidate with the lowest mean instability wins.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from lib import fkm_core
from lib.dataset import subset
from lib.errors import ConfigError
from lib.log_setup import logger
from lib.metrics import confusion_table, max_matching
from lib.workers import derive_seed, ordered_map

DEFAULT_SELECTION_RESTARTS = 10


@dataclass(frozen=True, eq=False)
class LambdaSelection:
    candidates: np.ndarray
    instability: np.ndarray
    chosen: float
    replicates: int
    seed: int

    def to_dict(self):
        return {
            "candidates": [float(v) for v in self.candidates],
            "instability": [float(v) for v in self.instability],
            "chosen": float(self.chosen),
            "replicates": int(self.replicates),
            "seed": int(self.seed),
        }


def disagreement(labels_a, labels_b):
    """Share of subjects labeled differently after the best one-to-one relabeling."""
    table = confusion_table(labels_a, labels_b)
    return 1.0 - max_matching(table.counts) / table.n


def split_halves(n, rng):
    order = rng.permutation(n)
    return np.sort(order[:n // 2]), np.sort(order[n // 2:])


def select_lambda(ds, base_config, candidates, replicates, seed, restarts=DEFAULT_SELECTION_RESTARTS, workers=1):
    """Mean half-sample instability of every candidate and the minimizer (ties to the smaller lambda).

    ``ds`` must be on [0, 1]. Replicate r uses the same split and the same
    restart seed for every candidate, so candidates are compared on common
    random numbers.
    """
    candidates = np.atleast_1d(np.asarray(candidates, dtype=float))
    k = int(base_config.k)
    if candidates.size == 0:
        raise ConfigError("no candidate smoothing parameters given")
    if np.any(~np.isfinite(candidates)) or np.any(candidates < 0):
        raise ConfigError(f"candidate smoothing parameters must be nonnegative, got {candidates.tolist()}")
    if int(replicates) < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    if ds.n < 2 * k:
        raise ConfigError(f"stability selection needs n >= 2K subjects, got n={ds.n}, K={k}")

    splits = [split_halves(ds.n, np.random.default_rng(np.random.SeedSequence([int(seed), r])))
              for r in range(int(replicates))]

    def run(cell):
        c, r = cell
        config = replace(base_config, lambdas=(float(candidates[c]),), restarts=int(restarts),
                         seed=derive_seed(seed, r))
        half_a, half_b = splits[r]
        fit_a = fkm_core.fit(subset(ds, half_a), config)
        fit_b = fkm_core.fit(subset(ds, half_b), config)
        return disagreement(fkm_core.assign_subjects(ds, fit_a.model), fkm_core.assign_subjects(ds, fit_b.model))

    cells = [(c, r) for c in range(candidates.size) for r in range(int(replicates))]
    scores = np.array(ordered_map(run, cells, workers)).reshape(candidates.size, int(replicates))
    instability = scores.mean(axis=1)

    best = instability.min()
    tied = np.flatnonzero(instability <= best + 1e-12)
    chosen = float(candidates[tied].min())
    for lam, value in zip(candidates, instability):
        logger.info(f"lambda {lam:g}: instability {value:.4f}")
    logger.info(f"Selected lambda {chosen:g}")
    return LambdaSelection(candidates, instability, chosen, int(replicates), int(seed))
