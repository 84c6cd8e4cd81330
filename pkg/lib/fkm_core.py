"""Functional k-means for sparsely observed curves.

Cluster centers are basis expansions f_k(t) = beta_k' phi(t). A fit alternates
a penalized weighted least-squares update of every center with a
nearest-center reassignment of subjects, restarted from several random
labelings; the restart with the smallest empirical loss wins.

Labels are 0-based cluster indices throughout the library. Files written by
the command line report them 1-based.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg

from lib.basis import BasisKind, construct_basis, design_matrix, evaluate_derivative
from lib.dataset import TimeTransform
from lib.errors import ConfigError, DomainError, NumericError
from lib.log_setup import logger
from lib.workers import ordered_map

# relative singular value cutoff of the rank-revealing center solve
RANK_TOLERANCE = 1e-10
# stop after this many consecutive iterations improving by less than STALL_TOLERANCE * (1 + |objective|)
STALL_ITERATIONS = 3
STALL_TOLERANCE = 1e-12


class WeightScheme(str, Enum):
    SUBJ = "subj"
    OBS = "obs"


@dataclass(frozen=True)
class FitConfig:
    k: int
    basis_kind: str = "fourier"
    nbasis: int = 15
    order: int = 4
    lambdas: tuple = (0.0,)
    weight_scheme: WeightScheme = WeightScheme.SUBJ
    restarts: int = 1
    max_iter: int = 100
    seed: int = 0

    def validate(self):
        if int(self.k) < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if int(self.restarts) < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if int(self.max_iter) < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        try:
            BasisKind(self.basis_kind)
        except ValueError:
            raise ConfigError(f"unknown basis {self.basis_kind!r}; expected 'fourier' or 'bspline'")
        try:
            WeightScheme(self.weight_scheme)
        except ValueError:
            raise ConfigError(f"unknown weight scheme {self.weight_scheme!r}; expected 'subj' or 'obs'")
        self.lambdas_for()
        return self

    def lambdas_for(self):
        """Per-cluster smoothing parameters; a single value is shared by all clusters."""
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        if lambdas.size == 1:
            lambdas = np.full(int(self.k), lambdas[0])
        if lambdas.size != int(self.k):
            raise ConfigError(f"expected 1 or {self.k} smoothing parameters, got {lambdas.size}")
        if np.any(~np.isfinite(lambdas)) or np.any(lambdas < 0):
            raise ConfigError(f"smoothing parameters must be finite and nonnegative, got {lambdas.tolist()}")
        return lambdas

    def make_basis(self):
        return construct_basis(self.basis_kind, self.nbasis, self.order)

    def to_dict(self):
        return {
            "k": int(self.k),
            "basis": BasisKind(self.basis_kind).value,
            "nbasis": int(self.nbasis),
            "order": int(self.order),
            "lambdas": [float(v) for v in np.atleast_1d(self.lambdas)],
            "weight_scheme": WeightScheme(self.weight_scheme).value,
            "restarts": int(self.restarts),
            "max_iter": int(self.max_iter),
            "seed": int(self.seed),
        }


@dataclass(frozen=True, eq=False)
class ClusterModel:
    basis: object
    coefficients: np.ndarray
    transform: TimeTransform = field(default_factory=TimeTransform)

    def __post_init__(self):
        coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if coefficients.shape[0] < 1:
            raise NumericError("a cluster model needs at least one center")
        if coefficients.shape[1] != self.basis.m:
            raise NumericError(f"coefficient length {coefficients.shape[1]} does not match basis size {self.basis.m}")
        if np.any(~np.isfinite(coefficients)):
            raise NumericError("cluster center coefficients must be finite")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def k(self):
        return self.coefficients.shape[0]

    def centers_at(self, u):
        """Center values at normalized times u, shape (len(u), K)."""
        return design_matrix(self.basis, u) @ self.coefficients.T


@dataclass
class FitResult:
    model: ClusterModel
    labels: np.ndarray
    empirical_loss: float
    penalized_objective: float
    iterations: int
    restart_index: int
    converged: bool
    objective_trace: list
    repairs: int = 0
    restart_losses: list = field(default_factory=list)
    elapsed_ms: float = 0.0


class _Observations:
    """Flat design of a dataset under one basis, shared by every restart."""

    def __init__(self, ds, basis, weight_scheme):
        self.n = ds.n
        self.n_obs = ds.n_obs
        self.starts = ds.starts
        self.owner = ds.owner
        self.values = ds.values_flat
        self.phi = design_matrix(basis, ds.times_flat)
        self.subject_weights = subject_weights(ds.n_obs, weight_scheme)
        self.obs_weights = self.subject_weights[self.owner]

    def sse(self, coefficients):
        """Unweighted squared error of every subject against every center, shape (n, K)."""
        residuals = self.values[:, None] - self.phi @ coefficients.T
        return np.add.reduceat(residuals ** 2, self.starts, axis=0)


def subject_weights(n_obs, weight_scheme=WeightScheme.SUBJ):
    """SUBJ weighs subject i by 1/N_i; OBS weighs every observation by 1/mean(N_i)."""
    n_obs = np.asarray(n_obs, dtype=float)
    if WeightScheme(weight_scheme) is WeightScheme.SUBJ:
        return 1.0 / n_obs
    return np.full(len(n_obs), len(n_obs) / n_obs.sum())


def _check_model(ds, model):
    if model.k < 1:
        raise NumericError("model has no centers")
    if ds.n and (ds.domain[0] < 0.0 or ds.domain[1] > 1.0):
        raise DomainError(f"dataset domain [{ds.domain[0]}, {ds.domain[1]}] is not normalized to [0, 1]")


def empirical_loss(ds, model, weight_scheme=WeightScheme.SUBJ):
    """Mean over subjects of the weighted squared error to the closest center."""
    _check_model(ds, model)
    obs = _Observations(ds, model.basis, weight_scheme)
    return _empirical_loss(obs, obs.sse(model.coefficients))


def _empirical_loss(obs, sse):
    return float(np.mean(obs.subject_weights * sse.min(axis=1)))


def _penalty(model_basis, coefficients, lambdas):
    if not np.any(lambdas > 0):
        return 0.0
    R = model_basis.roughness
    return float(np.sum(lambdas * np.einsum("km,mn,kn->k", coefficients, R, coefficients)))


def penalized_objective(ds, model, labels, lambdas, weight_scheme=WeightScheme.SUBJ):
    """Weighted within-cluster squared error plus sum_k lambda_k beta_k' R beta_k."""
    _check_model(ds, model)
    labels = _check_labels(labels, ds.n, model.k)
    lambdas = _broadcast(lambdas, model.k)
    obs = _Observations(ds, model.basis, weight_scheme)
    return _objective(obs, obs.sse(model.coefficients), labels, model.basis, model.coefficients, lambdas)


def _objective(obs, sse, labels, basis, coefficients, lambdas):
    data = float(np.sum(obs.subject_weights * sse[np.arange(obs.n), labels]))
    return data + _penalty(basis, coefficients, lambdas)


def _broadcast(lambdas, k):
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if lambdas.size == 1:
        lambdas = np.full(k, lambdas[0])
    if lambdas.size != k:
        raise NumericError(f"expected 1 or {k} smoothing parameters, got {lambdas.size}")
    return lambdas


def _check_labels(labels, n, k):
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,):
        raise NumericError(f"assignment has length {labels.size}, dataset has {n} subjects")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise NumericError(f"labels must lie in 0..{k - 1}")
    return labels


def _solve_center(phi, weights, values, lam, root):
    """argmin_beta sum w (x - phi beta)^2 + lam beta' R beta as a stacked least-squares problem.

    The SVD-based solve returns the minimum-norm solution when the system is rank deficient.
    """
    sw = np.sqrt(weights)
    A = phi * sw[:, None]
    b = values * sw
    if lam > 0:
        A = np.vstack([A, np.sqrt(lam) * root])
        b = np.concatenate([b, np.zeros(root.shape[0])])
    beta, _, _, _ = scipy.linalg.lstsq(A, b, cond=RANK_TOLERANCE, lapack_driver="gelsd")
    return beta


def _update_centers(obs, labels, k, basis, lambdas):
    obs_labels = labels[obs.owner]
    coefficients = np.empty((k, basis.m))
    root = basis.roughness_root if np.any(lambdas > 0) else None
    for c in range(k):
        rows = obs_labels == c
        if not rows.any():
            raise NumericError(f"cluster {c} has no observations")
        coefficients[c] = _solve_center(obs.phi[rows], obs.obs_weights[rows], obs.values[rows],
                                        lambdas[c], root)
    if np.any(~np.isfinite(coefficients)):
        raise NumericError("center update produced non-finite coefficients")
    return coefficients


def update_centers(ds, labels, basis, lambdas, weight_scheme=WeightScheme.SUBJ, k=None):
    """Solve (Phi_k' W_k Phi_k + lambda_k R) beta_k = Phi_k' W_k x_k for every cluster.

    Returns a (K, m) coefficient array. Every cluster must own at least one
    subject. K is the number of smoothing parameters unless a single shared
    value is given, in which case it is taken from ``k`` or the labels.
    """
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if k is None:
        k = lambdas.size if lambdas.size > 1 else int(np.max(labels)) + 1
    lambdas = _broadcast(lambdas, k)
    labels = _check_labels(labels, ds.n, k)
    obs = _Observations(ds, basis, weight_scheme)
    return _update_centers(obs, labels, k, basis, lambdas)


def assign_subjects(ds, model):
    """Closest center by unweighted squared error at each subject's own times; ties go to the lower index."""
    _check_model(ds, model)
    obs = _Observations(ds, model.basis, WeightScheme.SUBJ)
    return np.argmin(obs.sse(model.coefficients), axis=1)


def predict(model, subject):
    """Cluster of a single subject given on the model's original time scale."""
    if subject.n_obs == 0:
        raise NumericError(f"empty subject {subject.id}")
    u = _to_unit(model.transform, subject.times)
    residuals = subject.values[:, None] - model.centers_at(u)
    return int(np.argmin(np.sum(residuals ** 2, axis=0)))


def _to_unit(transform, t):
    t = np.asarray(t, dtype=float)
    u = transform.forward(t)
    # endpoints may land a rounding error outside [0, 1]
    slack = 1e-12
    if u.size and (u.min() < -slack or u.max() > 1.0 + slack):
        raise DomainError(f"times outside the model domain [{transform.t_lo}, {transform.t_hi}]")
    return np.clip(u, 0.0, 1.0)


def evaluate_centers(model, grid):
    """Center curves at times given on the original scale, shape (K, len(grid))."""
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        return np.empty((model.k, 0))
    return model.centers_at(_to_unit(model.transform, grid)).T


def center_derivatives(model, grid, deriv=1):
    """deriv-th derivative of the centers with respect to original time, shape (K, len(grid))."""
    grid = np.asarray(grid, dtype=float).ravel()
    u = _to_unit(model.transform, grid)
    scale = (model.transform.t_hi - model.transform.t_lo) ** -deriv
    return scale * (evaluate_derivative(model.basis, u, deriv) @ model.coefficients.T).T


def random_initial_assignment(n, k, rng):
    """Uniform random labels, then every empty cluster takes a random subject from a cluster with two or more."""
    if n < k:
        raise ConfigError(f"cannot split {n} subjects into {k} nonempty clusters")
    labels = rng.integers(0, k, size=n)
    for c in range(k):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=k)
        donors = np.flatnonzero(sizes[labels] > 1)
        labels[donors[rng.integers(0, len(donors))]] = c
    return labels


def _repair_empty(labels, sse, weights, k):
    """Refill every empty cluster with the subject of largest weighted loss among clusters of two or more.

    Equal losses go to the lowest index. Returns the number of moves.
    """
    moves = 0
    for c in range(k):
        sizes = np.bincount(labels, minlength=k)
        if sizes[c] > 0:
            continue
        loss = weights * sse[np.arange(len(labels)), labels]
        loss[sizes[labels] < 2] = -np.inf
        worst = int(np.argmax(loss))
        logger.warning(f"Cluster {c} became empty, moving subject {worst} into it")
        labels[worst] = c
        moves += 1
    return moves


def _fit_once(obs, basis, k, lambdas, max_iter, init, restart_index=0):
    labels = np.array(init, dtype=int, copy=True)
    if np.any(np.bincount(labels, minlength=k)[:k] == 0):
        raise NumericError("initial assignment leaves a cluster empty")

    trace = []
    repairs = 0
    converged = False
    stalled = 0
    coefficients = None
    iterations = 0

    for iterations in range(1, max_iter + 1):
        coefficients = _update_centers(obs, labels, k, basis, lambdas)
        sse = obs.sse(coefficients)
        objective = _objective(obs, sse, labels, basis, coefficients, lambdas)
        if trace and trace[-1] - objective < STALL_TOLERANCE * (1.0 + abs(objective)):
            stalled += 1
        else:
            stalled = 0
        trace.append(objective)

        new_labels = np.argmin(sse, axis=1)
        repairs += _repair_empty(new_labels, sse, obs.subject_weights, k)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        if stalled >= STALL_ITERATIONS:
            logger.info(f"Restart {restart_index}: objective stalled for {stalled} iterations, stopping")
            converged = True
            break
        if iterations == max_iter:
            # keep the labels the final centers were fitted to
            break
        labels = new_labels

    sse = obs.sse(coefficients)
    result = FitResult(
        model=ClusterModel(basis, coefficients),
        labels=labels,
        empirical_loss=_empirical_loss(obs, sse),
        penalized_objective=trace[-1],
        iterations=iterations,
        restart_index=restart_index,
        converged=converged,
        objective_trace=trace,
        repairs=repairs,
    )
    logger.debug(f"Restart {restart_index}: loss {result.empirical_loss:.6g}, "
                 f"{iterations} iterations, converged={converged}")
    return result


def fit_once(ds, config, init, transform=None):
    """One run of the alternating algorithm from a given labeling."""
    config.validate()
    basis = config.make_basis()
    lambdas = config.lambdas_for()
    k = int(config.k)
    init = _check_labels(init, ds.n, k)
    obs = _Observations(ds, basis, config.weight_scheme)
    result = _fit_once(obs, basis, k, lambdas, int(config.max_iter), init)
    result.model = replace(result.model, transform=transform or TimeTransform())
    return result


def restart_rng(seed, restart_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(restart_index)]))


def fit(ds, config, transform=None, init=None, workers=1):
    """Best of ``config.restarts`` runs from seeded random labelings, by empirical loss.

    ``ds`` must be on [0, 1]; ``transform`` records the original time scale.
    Restart r draws its labels from a stream that depends only on (seed, r),
    so the selected result does not depend on ``workers``. An explicit
    ``init`` labeling replaces the random restarts with a single run.
    """
    config.validate()
    k = int(config.k)
    if ds.n < k:
        raise ConfigError(f"{ds.n} subjects cannot form {k} clusters")
    started = time.perf_counter()
    basis = config.make_basis()
    lambdas = config.lambdas_for()
    obs = _Observations(ds, basis, config.weight_scheme)

    def run(restart_index):
        if init is not None:
            start = _check_labels(init, ds.n, k)
        else:
            start = random_initial_assignment(ds.n, k, restart_rng(config.seed, restart_index))
        return _fit_once(obs, basis, k, lambdas, int(config.max_iter), start, restart_index)

    restarts = 1 if init is not None else int(config.restarts)
    results = ordered_map(run, range(restarts), workers)
    losses = [r.empirical_loss for r in results]
    # np.argmin keeps the first of equal losses
    best = results[int(np.argmin(losses))]
    best.model = replace(best.model, transform=transform or TimeTransform())
    best.restart_losses = losses
    best.elapsed_ms = (time.perf_counter() - started) * 1000.0
    logger.debug(f"Fit K={k}: best restart {best.restart_index} of {restarts}, "
                f"loss {best.empirical_loss:.6g}, {best.iterations} iterations, {best.elapsed_ms:.0f} ms")
    return best

