"""Smooth convex losses ``f(y)`` evaluated at ``y = A x``.

Each loss knows its value, gradient (the dual point ``w = grad f(y)``),
Fenchel conjugate, and its smoothness / strong-convexity constants measured
in ``y``-space. Linear terms in ``x`` (MEB, hinge SVM dual) are *not* part of
the loss; they live with the separable penalty, see :mod:`gapscreen.problem`.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, xlogy

from .linalg import as_vector


class DualInfeasibleError(ValueError):
    """A dual point lies outside the domain of ``f*``."""


def _check_finite(y, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite entries")
    return y


class SmoothObjective:
    """Base class. Subclasses define ``value``, ``gradient``, ``conjugate``."""

    kind = "abstract"
    L = 1.0
    mu = None
    #: curvature ``h`` when f is exactly ``h/2 * ||y - c||^2``, else None
    quadratic_curvature = None

    def value(self, y):
        raise NotImplementedError

    def gradient(self, y):
        raise NotImplementedError

    def conjugate(self, w):
        raise NotImplementedError

    def constants(self):
        """Return ``(L, mu)``; ``mu`` is None when f is not strongly convex."""
        return self.L, self.mu

    def shifted_conjugate(self, w, offset):
        """Conjugate of ``y -> f(y + offset)``, i.e. ``f*(w) - offset^T w``."""
        val = self.conjugate(w)
        if offset is not None:
            val -= float(offset @ w)
        return val


@dataclass(frozen=True, eq=False)
class SquaredError(SmoothObjective):
    """``f(y) = 1/2 ||y - b||^2``."""

    b: np.ndarray = field(repr=False)
    kind = "squared_error"
    L = 1.0
    mu = 1.0
    quadratic_curvature = 1.0

    def __post_init__(self):
        object.__setattr__(self, "b", as_vector(self.b, "b"))

    def value(self, y):
        r = _check_finite(y) - self.b
        return 0.5 * float(r @ r)

    def gradient(self, y):
        return _check_finite(y) - self.b

    def conjugate(self, w):
        w = _check_finite(w, "w")
        return 0.5 * float(w @ w) + float(self.b @ w)


@dataclass(frozen=True, eq=False)
class PureQuadratic(SmoothObjective):
    """``f(y) = 1/2 ||y||^2`` (squared-hinge and hinge SVM duals)."""

    kind = "pure_quadratic"
    L = 1.0
    mu = 1.0
    quadratic_curvature = 1.0

    def value(self, y):
        y = _check_finite(y)
        return 0.5 * float(y @ y)

    def gradient(self, y):
        return np.array(_check_finite(y), dtype=np.float64)

    def conjugate(self, w):
        w = _check_finite(w, "w")
        return 0.5 * float(w @ w)


@dataclass(frozen=True, eq=False)
class MebQuadratic(SmoothObjective):
    """``f(y) = ||y||^2``, the quadratic part of the minimum enclosing ball dual."""

    kind = "meb_quadratic"
    L = 2.0
    mu = 2.0
    quadratic_curvature = 2.0

    def value(self, y):
        y = _check_finite(y)
        return float(y @ y)

    def gradient(self, y):
        return 2.0 * _check_finite(y)

    def conjugate(self, w):
        w = _check_finite(w, "w")
        return 0.25 * float(w @ w)


@dataclass(frozen=True, eq=False)
class Logistic(SmoothObjective):
    """``f(y) = sum_j log(1 + exp(y_j))``; labels are folded into ``A``.

    ``L = 1`` is the constant used for the screening radius. The true
    curvature bound is 1/4, so the radius is conservative.
    """

    kind = "logistic"
    L = 1.0
    mu = None

    def value(self, y):
        return float(np.sum(np.logaddexp(0.0, _check_finite(y))))

    def gradient(self, y):
        return expit(_check_finite(y))

    def conjugate(self, w):
        w = _check_finite(w, "w")
        tol = 1e-12
        if np.any(w < -tol) or np.any(w > 1.0 + tol):
            raise DualInfeasibleError(
                "logistic conjugate is finite only for w in [0, 1]^d")
        w = np.clip(w, 0.0, 1.0)
        return float(np.sum(xlogy(w, w) + xlogy(1.0 - w, 1.0 - w)))


def value(f, y):
    return f.value(y)


def gradient(f, y):
    return f.gradient(y)


def conjugate_value(f, w):
    return f.conjugate(w)


def constants(f):
    return f.constants()
