"""Fourier and B-spline basis systems on [0, 1] and their penalty matrices."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline

from lib.errors import BasisError, DomainError


class BasisKind(str, Enum):
    FOURIER = "fourier"
    BSPLINE = "bspline"


@dataclass(frozen=True, eq=False)
class BasisSystem:
    kind: BasisKind
    m: int
    order: int = None
    knots: np.ndarray = None

    @cached_property
    def roughness(self):
        return roughness_matrix(self)

    @cached_property
    def roughness_root(self):
        """Matrix L with L.T @ L == roughness, used to stack the penalty into a least-squares system."""
        R = self.roughness
        if self.kind is BasisKind.FOURIER:
            return np.diag(np.sqrt(np.diag(R)))
        eigval, eigvec = np.linalg.eigh(R)
        return np.sqrt(np.clip(eigval, 0.0, None))[:, None] * eigvec.T

    @cached_property
    def spline(self):
        """Spline with identity coefficients: output j is basis function j."""
        return BSpline(np.array(self.knots), np.eye(self.m), self.order - 1)

    @property
    def interior_knots(self):
        if self.kind is not BasisKind.BSPLINE:
            return np.empty(0)
        return self.knots[self.order:-self.order]

    def to_dict(self):
        data = {"kind": self.kind.value, "m": self.m}
        if self.kind is BasisKind.BSPLINE:
            data["order"] = self.order
            data["knots"] = [float(k) for k in self.knots]
        return data

    def __eq__(self, other):
        if not isinstance(other, BasisSystem):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.kind, self.m, self.order))


def construct_basis(kind, m, order=4):
    """Fourier: constant first, then (sin, cos) pairs of increasing frequency.
    B-spline: m - order equispaced interior knots, boundary knots repeated order times.
    """
    try:
        kind = BasisKind(kind)
    except ValueError:
        raise BasisError(f"unknown basis kind {kind!r}; expected 'fourier' or 'bspline'")
    m = int(m)
    if m < 1:
        raise BasisError(f"basis needs at least one function, got m={m}")

    if kind is BasisKind.FOURIER:
        return BasisSystem(kind, m)

    order = int(order)
    if order < 1:
        raise BasisError(f"B-spline order must be positive, got {order}")
    if m < order:
        raise BasisError(f"B-spline basis of order {order} needs m >= {order}, got m={m}")
    interior = np.linspace(0.0, 1.0, m - order + 2)[1:-1]
    knots = np.concatenate([np.zeros(order), interior, np.ones(order)])
    knots.setflags(write=False)
    return BasisSystem(kind, m, order, knots)


def basis_from_dict(data):
    basis = construct_basis(data["kind"], data["m"], data.get("order", 4))
    if basis.kind is BasisKind.BSPLINE and "knots" in data:
        knots = np.asarray(data["knots"], dtype=float)
        if not np.allclose(knots, basis.knots, rtol=0, atol=1e-12):
            raise BasisError("stored knots do not match the equispaced knot rule")
    return basis


def _check_domain(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size and (np.any(~np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0):
        bad = t[(~np.isfinite(t)) | (t < 0.0) | (t > 1.0)][0]
        raise DomainError(f"time {bad} outside the basis domain [0, 1]")
    return t


def _fourier(m, t, deriv):
    out = np.empty((len(t), m))
    out[:, 0] = 1.0 if deriv == 0 else 0.0
    for j in range(1, m):
        freq = (j + 1) // 2
        w = 2.0 * np.pi * freq
        arg = w * t
        # derivative d of sin/cos is a phase shift by d*pi/2 and a factor w**d
        if j % 2 == 1:
            out[:, j] = np.sqrt(2.0) * w ** deriv * np.sin(arg + deriv * np.pi / 2)
        else:
            out[:, j] = np.sqrt(2.0) * w ** deriv * np.cos(arg + deriv * np.pi / 2)
    return out


def _bspline(basis, t, deriv):
    """Derivative values of every B-spline at t, shape (len(t), m).

    Spans are half-open [u_i, u_i+1), so interior knots take right limits;
    t == 1 belongs to the last nonempty span.
    """
    if deriv > basis.order - 1:
        return np.zeros((len(t), basis.m))
    if deriv == 0:
        return BSpline.design_matrix(t, np.array(basis.knots), basis.order - 1).toarray()
    return basis.spline(t, nu=deriv)


def evaluate_derivative(basis, t, deriv=0):
    """Values of the deriv-th derivative of every basis function, shape (len(t), m)."""
    t = _check_domain(t)
    if deriv < 0:
        raise BasisError(f"derivative order must be nonnegative, got {deriv}")
    if basis.kind is BasisKind.FOURIER:
        return _fourier(basis.m, t, deriv)
    return _bspline(basis, t, deriv)


def evaluate(basis, t):
    """phi(t) for a single time, a vector of m reals."""
    return evaluate_derivative(basis, [float(t)], 0)[0]


def design_matrix(basis, times):
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        return np.empty((0, basis.m))
    return evaluate_derivative(basis, times, 0)


def _span_quadrature(basis, deriv):
    """Integral over [0, 1] of D^deriv phi_a * D^deriv phi_b, Gauss-Legendre per knot span."""
    breaks = np.unique(basis.knots)
    # products are polynomials of degree 2 * (order - 1 - deriv) on each span
    npts = max(5, basis.order)
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    lo, hi = breaks[:-1], breaks[1:]
    half = (hi - lo) / 2.0
    t = ((lo + hi) / 2.0)[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    D = _bspline(basis, t.ravel(), deriv)
    G = (D * w.ravel()[:, None]).T @ D
    return (G + G.T) / 2.0


def roughness_matrix(basis):
    """R[a, b] = integral over [0, 1] of phi_a'' phi_b''."""
    if basis.kind is BasisKind.FOURIER:
        freq = (np.arange(basis.m) + 1) // 2
        return np.diag((2.0 * np.pi * freq) ** 4)
    if basis.order < 3:
        raise BasisError(f"roughness penalty needs B-spline order >= 3, got {basis.order}")
    return _span_quadrature(basis, 2)


def gram_matrix(basis):
    """G[a, b] = integral over [0, 1] of phi_a phi_b."""
    if basis.kind is BasisKind.FOURIER:
        return np.eye(basis.m)
    return _span_quadrature(basis, 0)
