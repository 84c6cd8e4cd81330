"""Agreement between labelings and distances between sets of center curves."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb

from lib.errors import DataError

DEFAULT_HAUSDORFF_GRID = 1024
# exhaustive matching up to this many labels, Hungarian above
EXHAUSTIVE_MATCHING_LIMIT = 8


@dataclass(frozen=True, eq=False)
class ConfusionTable:
    counts: np.ndarray
    true_labels: np.ndarray
    pred_labels: np.ndarray

    @property
    def n(self):
        return int(self.counts.sum())


def confusion_table(true_labels, pred_labels):
    true_labels = np.asarray(true_labels)
    pred_labels = np.asarray(pred_labels)
    if true_labels.shape != pred_labels.shape or true_labels.ndim != 1:
        raise DataError(f"label vectors differ in length: {true_labels.size} vs {pred_labels.size}")
    if true_labels.size == 0:
        raise DataError("label vectors are empty")
    t_values, t_idx = np.unique(true_labels, return_inverse=True)
    p_values, p_idx = np.unique(pred_labels, return_inverse=True)
    counts = np.zeros((len(t_values), len(p_values)), dtype=int)
    np.add.at(counts, (t_idx, p_idx), 1)
    return ConfusionTable(counts, t_values, p_values)


def max_matching(counts):
    """Largest total count over one-to-one pairings of rows with columns.

    Pairings are bijections for square tables and injections from the
    smaller side otherwise.
    """
    counts = np.asarray(counts)
    rows, cols = counts.shape
    if max(rows, cols) <= EXHAUSTIVE_MATCHING_LIMIT:
        if rows <= cols:
            return int(max(counts[np.arange(rows), list(p)].sum()
                           for p in itertools.permutations(range(cols), rows)))
        return int(max(counts[list(p), np.arange(cols)].sum()
                       for p in itertools.permutations(range(rows), cols)))
    r, c = linear_sum_assignment(counts, maximize=True)
    return int(counts[r, c].sum())


def ccr(true_labels, pred_labels):
    """Correct classification rate in percent under the best label mapping."""
    table = confusion_table(true_labels, pred_labels)
    return 100.0 * max_matching(table.counts) / table.n


def adjusted_rand_index(true_labels, pred_labels):
    """Chance-corrected pair agreement of two partitions.

    When the chance-corrected denominator vanishes (single-cluster partitions,
    all-singleton partitions, n = 1) the index is 1 for equal partitions and 0
    otherwise.
    """
    table = confusion_table(true_labels, pred_labels)
    counts = table.counts
    index = comb(counts, 2).sum()
    rows = comb(counts.sum(axis=1), 2).sum()
    cols = comb(counts.sum(axis=0), 2).sum()
    expected = rows * cols / comb(table.n, 2) if table.n > 1 else 0.0
    maximum = (rows + cols) / 2.0
    if maximum == expected:
        same = np.all((counts > 0).sum(axis=0) == 1) and np.all((counts > 0).sum(axis=1) == 1)
        return 1.0 if same else 0.0
    return float((index - expected) / (maximum - expected))


def uniform_grid(grid_size=DEFAULT_HAUSDORFF_GRID):
    """Midpoints of grid_size equal cells of [0, 1]."""
    return (np.arange(grid_size) + 0.5) / grid_size


def _as_sampled(curves, grid):
    if callable(curves):
        curves = [curves]
    sampled = []
    for curve in curves:
        values = curve(grid) if callable(curve) else np.asarray(curve, dtype=float)
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != grid.shape:
            raise DataError(f"curve sampled on {values.size} points, grid has {grid.size}")
        sampled.append(values)
    if not sampled:
        raise DataError("center set is empty")
    return np.stack(sampled)


def rms_distances(a, b):
    """Root-mean-square distance between every row of a and every row of b."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.mean(diff ** 2, axis=2))


def hausdorff_sampled(a, b):
    """Hausdorff distance between two center sets sampled on the same uniform grid."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DataError("center set is empty")
    if a.shape[1] != b.shape[1]:
        raise DataError(f"center sets sampled on different grids ({a.shape[1]} vs {b.shape[1]} points)")
    d = rms_distances(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def hausdorff_centers(a, b, grid_size=DEFAULT_HAUSDORFF_GRID):
    """Hausdorff distance between two sets of curves on [0, 1] in the L2 norm of the uniform law.

    Each set is a sequence of vectorized callables on [0, 1]; the norm is the
    root mean square over a uniform midpoint grid of ``grid_size`` points.
    """
    if grid_size < 1:
        raise DataError(f"grid_size must be positive, got {grid_size}")
    grid = uniform_grid(grid_size)
    return hausdorff_sampled(_as_sampled(a, grid), _as_sampled(b, grid))
