"""Constraint sets and regularizers, the separable ``g`` part of a problem.

Constraint sets expose a linear minimization oracle (LMO) and membership
tests; regularizers expose prox maps, penalty values, conjugates and the
dual rescaling that keeps ``g*(-A^T w)`` finite for norm penalties.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import as_vector


class InfeasibleDualError(ValueError):
    """An indicator-type conjugate was evaluated outside its ball."""


class Vertex(NamedTuple):
    """Sparse description of an LMO answer ``argmin_{z in C} z^T d``."""

    indices: np.ndarray
    values: np.ndarray
    value: float

    def dense(self, n):
        z = np.zeros(n)
        z[self.indices] = self.values
        return z


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------

class ConstraintSpec:
    kind = "abstract"
    bounded = True

    def lmo(self, direction):
        raise NotImplementedError

    def contains(self, x):
        raise NotImplementedError

    def support(self, v):
        """``max_{z in C} z^T v``."""
        return -self.lmo(-np.asarray(v, dtype=np.float64)).value


@dataclass(frozen=True)
class Simplex(ConstraintSpec):
    """The unit simplex ``{x >= 0, sum x = 1}``."""

    kind = "simplex"

    def lmo(self, direction):
        d = np.asarray(direction, dtype=np.float64)
        i = int(np.argmin(d))
        return Vertex(np.array([i]), np.array([1.0]), float(d[i]))

    def contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= -1e-12) and abs(x.sum() - 1.0) <= 1e-9)


@dataclass(frozen=True)
class L1Ball(ConstraintSpec):
    """``{x : ||x||_1 <= radius}``."""

    radius: float = 1.0
    kind = "l1_ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"L1Ball radius must be positive, got {self.radius}")

    def lmo(self, direction):
        d = np.asarray(direction, dtype=np.float64)
        i = int(np.argmax(np.abs(d)))
        sign = -1.0 if d[i] > 0 else 1.0
        if d[i] == 0.0:
            return Vertex(np.array([i]), np.array([self.radius]), 0.0)
        return Vertex(np.array([i]), np.array([sign * self.radius]),
                      -self.radius * abs(float(d[i])))

    def contains(self, x):
        return bool(np.sum(np.abs(x)) <= self.radius * (1 + 1e-9))


@dataclass(frozen=True)
class ElasticNetBall(ConstraintSpec):
    """``{x : alpha ||x||_1 + (1 - alpha)/2 ||x||_2^2 <= scale}``."""

    alpha: float = 0.5
    scale: float = 1.0
    kind = "elastic_ball"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def gauge(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.alpha * np.sum(np.abs(x)) + 0.5 * (1 - self.alpha) * float(x @ x)

    def contains(self, x):
        return bool(self.gauge(x) <= self.scale * (1 + 1e-9))

    def max_norm(self):
        """Largest Euclidean norm of a point in the ball.

        Uses ``||x||_1 >= ||x||_2``: a point of norm ``t`` needs
        ``alpha t + (1 - alpha)/2 t^2 <= scale``.
        """
        a, s = self.alpha, self.scale
        if a == 1.0:
            return s
        return (-a + np.sqrt(a * a + 2.0 * (1.0 - a) * s)) / (1.0 - a)

    def lmo(self, direction):
        d = np.asarray(direction, dtype=np.float64)
        a, s = self.alpha, self.scale
        mag = np.abs(d)
        if not np.any(mag > 0):
            return Vertex(np.array([0]), np.array([0.0]), 0.0)
        if a == 1.0:
            i = int(np.argmax(mag))
            sign = -1.0 if d[i] > 0 else 1.0
            return Vertex(np.array([i]), np.array([sign * s]), -s * float(mag[i]))
        # Stationarity gives |z_i| = (|d_i| v - alpha)_+ / (1 - alpha) for a
        # multiplier 1/v; on the boundary the active set of size k satisfies
        # v^2 = (2 (1 - alpha) s + k alpha^2) / sum_{active} d_i^2.
        order = np.argsort(-mag, kind="stable")
        sorted_mag = mag[order]
        csum = np.cumsum(sorted_mag ** 2)
        k = np.arange(1, d.size + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.sqrt((2.0 * (1.0 - a) * s + k * a * a) / csum)
        nxt = np.append(sorted_mag[1:], 0.0)
        ok = (sorted_mag * v > a) & (nxt * v <= a) & np.isfinite(v)
        kk = int(np.argmax(ok)) if ok.any() else int(np.count_nonzero(sorted_mag))
        vv = v[kk]
        idx = order[: kk + 1]
        vals = -np.sign(d[idx]) * np.maximum(mag[idx] * vv - a, 0.0) / (1.0 - a)
        keep = vals != 0
        idx, vals = idx[keep], vals[keep]
        return Vertex(idx, vals, float(d[idx] @ vals))


@dataclass(frozen=True)
class Box(ConstraintSpec):
    """``{x : 0 <= x_i <= upper}``."""

    upper: float = 1.0
    kind = "box"

    def __post_init__(self):
        if not self.upper > 0:
            raise ValueError(f"Box upper bound must be positive, got {self.upper}")

    def lmo(self, direction):
        d = np.asarray(direction, dtype=np.float64)
        idx = np.flatnonzero(d < 0)
        vals = np.full(idx.size, float(self.upper))
        return Vertex(idx, vals, float(self.upper * d[idx].sum()))

    def contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= -1e-12) and np.all(x <= self.upper + 1e-12))


def lmo(C, direction):
    return C.lmo(direction)


def membership(C, x):
    return C.contains(x)


# ---------------------------------------------------------------------------
# group layout
# ---------------------------------------------------------------------------

class GroupLayout:
    """Partition of ``[0, n)`` into contiguous column ranges."""

    def __init__(self, lengths):
        lengths = [int(k) for k in lengths]
        if not lengths or min(lengths) < 1:
            raise ValueError("group lengths must be positive integers")
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.intp)
        self.ranges = tuple(zip(starts.tolist(), lengths))
        self.n_features = int(sum(lengths))
        self.lookup = np.repeat(np.arange(len(lengths)), lengths)

    @property
    def n_groups(self):
        return len(self.ranges)

    @property
    def lengths(self):
        return [ln for _, ln in self.ranges]

    def indices(self, g):
        start, ln = self.ranges[g]
        return np.arange(start, start + ln)

    def restrict(self, groups):
        return GroupLayout([self.ranges[g][1] for g in groups])

    def __repr__(self):
        return f"GroupLayout(lengths={self.lengths})"


# ---------------------------------------------------------------------------
# regularizers
# ---------------------------------------------------------------------------

def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class RegularizerSpec:
    kind = "abstract"

    def value(self, x):
        raise NotImplementedError

    def prox(self, v, step):
        raise NotImplementedError

    def dual_scale(self, atw):
        """Largest ``s`` in (0, 1] with ``g*(-s A^T w)`` finite."""
        return 1.0

    def conjugate(self, neg_atw):
        raise NotImplementedError

    def restrict(self, active):
        return self


@dataclass(frozen=True)
class L1(RegularizerSpec):
    """``lam * ||x||_1``."""

    lam: float
    kind = "l1"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def prox(self, v, step):
        return soft_threshold(np.asarray(v, dtype=np.float64), step * self.lam)

    def dual_scale(self, atw):
        m = float(np.max(np.abs(atw))) if np.size(atw) else 0.0
        return 1.0 if m <= self.lam else self.lam / m

    def conjugate(self, neg_atw):
        m = float(np.max(np.abs(neg_atw))) if np.size(neg_atw) else 0.0
        if m > self.lam * (1 + 1e-12):
            raise InfeasibleDualError(
                f"||A^T w||_inf = {m:.6g} exceeds lambda = {self.lam:.6g}; rescale w")
        return 0.0


@dataclass(frozen=True)
class ElasticNet(RegularizerSpec):
    """``lam2 * ||x||_2^2 + lam1 * ||x||_1`` (regression form)."""

    lam1: float
    lam2: float = 0.0
    kind = "elastic_net"

    def __post_init__(self):
        if not self.lam1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lam1}")
        if not self.lam2 >= 0:
            raise ValueError(f"lambda2 must be non-negative, got {self.lam2}")

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.lam2 * float(x @ x) + self.lam1 * float(np.sum(np.abs(x)))

    def prox(self, v, step):
        v = np.asarray(v, dtype=np.float64)
        return soft_threshold(v, step * self.lam1) / (1.0 + 2.0 * step * self.lam2)

    def conjugate(self, neg_atw):
        v = np.abs(np.asarray(neg_atw, dtype=np.float64))
        if self.lam2 == 0.0:
            return L1(self.lam1).conjugate(neg_atw)
        excess = np.maximum(v - self.lam1, 0.0)
        return float(excess @ excess) / (4.0 * self.lam2)


@dataclass(frozen=True)
class ElasticNetUnit(RegularizerSpec):
    """``(1 - alpha)/2 ||x||_2^2 + alpha ||x||_1``."""

    alpha: float
    kind = "elastic_net_unit"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * (1 - self.alpha) * float(x @ x) + self.alpha * float(np.sum(np.abs(x)))

    def prox(self, v, step):
        v = np.asarray(v, dtype=np.float64)
        return soft_threshold(v, step * self.alpha) / (1.0 + step * (1.0 - self.alpha))

    def conjugate(self, neg_atw):
        excess = np.maximum(np.abs(np.asarray(neg_atw, dtype=np.float64)) - self.alpha, 0.0)
        return float(excess @ excess) / (2.0 * (1.0 - self.alpha))


@dataclass(frozen=True, eq=False)
class GroupL2L1(RegularizerSpec):
    """``sum_g weight_g * ||x_g||_2`` over a :class:`GroupLayout`.

    ``weights`` holds ``sqrt(rho_g)`` (times lambda, if any) per group.
    """

    weights: np.ndarray = field(repr=False)
    layout: GroupLayout = None
    kind = "group_l2l1"

    def __post_init__(self):
        w = as_vector(self.weights, "weights")
        if self.layout is None:
            raise ValueError("GroupL2L1 needs a GroupLayout")
        if w.size != self.layout.n_groups:
            raise ValueError(
                f"{w.size} weights for {self.layout.n_groups} groups")
        if np.any(w <= 0):
            raise ValueError("group weights must be strictly positive")
        object.__setattr__(self, "weights", w)

    def _block_norms(self, v):
        v = np.asarray(v, dtype=np.float64)
        return np.sqrt(np.bincount(self.layout.lookup, weights=v * v,
                                   minlength=self.layout.n_groups))

    def value(self, x):
        return float(self.weights @ self._block_norms(x))

    def prox(self, v, step):
        v = np.asarray(v, dtype=np.float64)
        nrm = self._block_norms(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(nrm > 0, np.maximum(1.0 - step * self.weights / nrm, 0.0), 0.0)
        return v * shrink[self.layout.lookup]

    def dual_scale(self, atw):
        nrm = self._block_norms(atw)
        ratio = np.where(nrm > self.weights, self.weights / np.maximum(nrm, 1e-300), 1.0)
        return float(min(1.0, ratio.min()))

    def conjugate(self, neg_atw):
        nrm = self._block_norms(neg_atw)
        if np.any(nrm > self.weights * (1 + 1e-12)):
            raise InfeasibleDualError("a block of A^T w leaves its dual ball; rescale w")
        return 0.0

    def restrict(self, active):
        active = np.asarray(active, dtype=np.intp)
        groups = np.unique(self.layout.lookup[active])
        return GroupL2L1(self.weights[groups], self.layout.restrict(groups))


def prox(R, v, step):
    return R.prox(v, step)


def penalty_value(R, x):
    return R.value(x)


def dual_feasibility_scale(R, atw):
    return R.dual_scale(atw)


def conjugate_penalty_value(R, neg_atw):
    return R.conjugate(neg_atw)
