"""Sparse longitudinal data: subjects observed at a few irregular times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from lib.errors import DataError, DomainError, EmptyDataError, ParseError, SchemaError, ValidationError
from lib.log_setup import logger

DEFAULT_COLUMNS = ("id", "time", "value")


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    id: str
    times: np.ndarray
    values: np.ndarray

    @property
    def n_obs(self):
        return len(self.times)


@dataclass(frozen=True)
class TimeTransform:
    """Affine map of [t_lo, t_hi] onto [0, 1]."""
    t_lo: float = 0.0
    t_hi: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.t_lo) and math.isfinite(self.t_hi)) or self.t_hi <= self.t_lo:
            raise DomainError(f"degenerate time domain [{self.t_lo}, {self.t_hi}]")

    @property
    def is_identity(self):
        return self.t_lo == 0.0 and self.t_hi == 1.0

    def forward(self, t):
        return (np.asarray(t, dtype=float) - self.t_lo) / (self.t_hi - self.t_lo)

    def inverse(self, u):
        return self.t_lo + np.asarray(u, dtype=float) * (self.t_hi - self.t_lo)

    def to_dict(self):
        return {"t_lo": self.t_lo, "t_hi": self.t_hi}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["t_lo"]), float(data["t_hi"]))


@dataclass(frozen=True, eq=False)
class SparseFunctionalDataset:
    """Immutable collection of subjects on a common closed time domain.

    ``truth`` optionally carries one external label per subject (for example
    a known group), aligned with ``subjects``.
    """
    subjects: tuple
    domain: tuple
    truth: tuple = None

    @property
    def n(self):
        return len(self.subjects)

    @property
    def ids(self):
        return [s.id for s in self.subjects]

    @cached_property
    def n_obs(self):
        return np.array([s.n_obs for s in self.subjects], dtype=int)

    @cached_property
    def times_flat(self):
        if not self.subjects:
            return np.empty(0)
        return np.concatenate([s.times for s in self.subjects])

    @cached_property
    def values_flat(self):
        if not self.subjects:
            return np.empty(0)
        return np.concatenate([s.values for s in self.subjects])

    @cached_property
    def starts(self):
        """Offset of each subject's first observation in the flat arrays."""
        return np.concatenate([[0], np.cumsum(self.n_obs)[:-1]]).astype(int)

    @cached_property
    def owner(self):
        """Subject index of every flat observation."""
        return np.repeat(np.arange(self.n), self.n_obs)


def from_arrays(ids, times, values, domain=None, truth=None, check=True):
    """Build a dataset from per-subject sequences.

    ``ids``, ``times`` and ``values`` are parallel sequences, one entry per
    subject. Observations are sorted by time with ties kept in input order.
    """
    if not (len(ids) == len(times) == len(values)):
        raise SchemaError("ids, times and values must have one entry per subject")

    subjects = []
    for sid, t, x in zip(ids, times, values):
        t = np.asarray(t, dtype=float).ravel()
        x = np.asarray(x, dtype=float).ravel()
        if len(t) != len(x):
            raise SchemaError(f"subject {sid}: {len(t)} times but {len(x)} values")
        order = np.argsort(t, kind="stable")
        t, x = t[order], x[order]
        t.setflags(write=False)
        x.setflags(write=False)
        subjects.append(SubjectRecord(str(sid), t, x))

    if domain is None:
        observed = [s.times for s in subjects if s.n_obs]
        if observed:
            flat = np.concatenate(observed)
            domain = (float(np.min(flat)), float(np.max(flat)))
        else:
            domain = (0.0, 1.0)
    domain = (float(domain[0]), float(domain[1]))

    ds = SparseFunctionalDataset(tuple(subjects), domain, None if truth is None else tuple(truth))
    if check:
        validate(ds)
    return ds


def _numeric_column(frame, column):
    text = frame[column].str.strip()
    parsed = pd.to_numeric(text, errors="coerce")
    # a literal NaN parses; validate() rejects it with the subject and index
    bad = parsed.isna() & (text.str.lower() != "nan")
    if bad.any():
        idx = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1
        row = idx + 2
        raise ParseError(f"non-numeric {column} {frame[column].iloc[idx]!r} at row {row}", row=row)
    return parsed.to_numpy(dtype=float)


def load_csv(path, cols=DEFAULT_COLUMNS, truth_col=None, domain=None):
    """Read long-format rows (subject, time, value) into a dataset.

    Subjects keep first-appearance order; each subject's observations are
    sorted by time. The domain is the observed time range unless given.
    """
    path = Path(path)
    id_col, time_col, value_col = cols
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyDataError(f"{path} is empty")
    except FileNotFoundError:
        raise DataError(f"{path} does not exist")

    needed = [id_col, time_col, value_col] + ([truth_col] if truth_col else [])
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}; found {', '.join(frame.columns)}")
    if frame.empty:
        raise EmptyDataError(f"{path} has a header but no rows")

    frame = frame.assign(**{time_col: _numeric_column(frame, time_col),
                            value_col: _numeric_column(frame, value_col)})

    ids, times, values, truth = [], [], [], []
    for sid, group in frame.groupby(id_col, sort=False):
        ids.append(sid)
        times.append(group[time_col].to_numpy())
        values.append(group[value_col].to_numpy())
        if truth_col:
            labels = group[truth_col].unique()
            if len(labels) > 1:
                logger.warning(f"subject {sid} has several {truth_col} values, using {labels[0]!r}")
            truth.append(str(labels[0]))

    ds = from_arrays(ids, times, values, domain=domain, truth=truth if truth_col else None)
    logger.info(f"Loaded {path}: {ds.n} subjects, {int(ds.n_obs.sum())} observations, "
                f"domain [{ds.domain[0]:g}, {ds.domain[1]:g}]")
    return ds


def save_csv(ds, path, cols=DEFAULT_COLUMNS):
    id_col, time_col, value_col = cols
    frame = pd.DataFrame({
        id_col: np.repeat(ds.ids, ds.n_obs),
        time_col: ds.times_flat,
        value_col: ds.values_flat,
    })
    frame.to_csv(path, index=False, float_format="%.17g")


def normalize_time(ds):
    """Map the dataset's domain onto [0, 1]; returns the new dataset and the transform."""
    t_lo, t_hi = ds.domain
    if not t_hi > t_lo:
        raise DomainError(f"degenerate time domain [{t_lo}, {t_hi}]: all times are equal")
    transform = TimeTransform(t_lo, t_hi)

    subjects = []
    for s in ds.subjects:
        u = s.times.copy() if transform.is_identity else np.clip(transform.forward(s.times), 0.0, 1.0)
        u.setflags(write=False)
        subjects.append(SubjectRecord(s.id, u, s.values))
    return SparseFunctionalDataset(tuple(subjects), (0.0, 1.0), ds.truth), transform


def subset(ds, indices):
    """Dataset restricted to the given subject indices, domain unchanged."""
    indices = list(indices)
    truth = None if ds.truth is None else tuple(ds.truth[i] for i in indices)
    return SparseFunctionalDataset(tuple(ds.subjects[i] for i in indices), ds.domain, truth)


def validate(ds):
    """Raise ValidationError listing every violated dataset invariant."""
    violations = []
    t_lo, t_hi = ds.domain
    if not (math.isfinite(t_lo) and math.isfinite(t_hi)) or t_lo > t_hi:
        violations.append(f"invalid domain [{t_lo}, {t_hi}]")
    if ds.n == 0:
        violations.append("empty dataset")

    for s in ds.subjects:
        if len(s.times) != len(s.values):
            violations.append(f"subject {s.id}: {len(s.times)} times but {len(s.values)} values")
            continue
        if s.n_obs == 0:
            violations.append(f"empty subject {s.id}")
            continue
        for j in np.flatnonzero(~np.isfinite(s.values)):
            violations.append(f"subject {s.id} index {j}: value is {s.values[j]}")
        for j in np.flatnonzero(~np.isfinite(s.times)):
            violations.append(f"subject {s.id} index {j}: time is {s.times[j]}")
        outside = np.flatnonzero((s.times < t_lo) | (s.times > t_hi))
        for j in outside:
            violations.append(f"subject {s.id} index {j}: time {s.times[j]} outside [{t_lo}, {t_hi}]")

    if violations:
        raise ValidationError(violations)
