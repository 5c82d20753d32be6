"""Duality-gap certificates and the distance bounds derived from them.

For a dual point ``w`` the dual objective is ``f*(w) - o^T w + g*(-A^T w - q)``.
Norm penalties have indicator conjugates, so ``w`` is first shrunk by the
largest factor that keeps ``-A^T w`` inside the dual ball.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import ElasticNet
from .objectives import SquaredError
from .problem import Iterate


class GapError(ArithmeticError):
    """A computed gap is negative beyond rounding: weak duality is violated."""


class RuleUnavailableError(ValueError):
    """A screening rule needs a constant the objective does not provide."""


@dataclass(frozen=True)
class GapCertificate:
    duality_gap: float
    wolfe_gap: float
    dual_radius: float
    image_radius: float
    grad_radius: float
    dual_point: np.ndarray
    dual_scale: float
    #: per-column scores the rules compare: ``A^T w + q`` when constrained,
    #: ``A^T w~`` (augmented for the regression elastic net) when penalized
    scores: np.ndarray
    at_iterate: int = 0


def _clamp(gap, magnitude, what="duality gap"):
    if not np.isfinite(gap):
        raise GapError(f"{what} is not finite ({gap})")
    if gap >= 0.0:
        return float(gap)
    if gap >= -1e-10 * max(1.0, magnitude):
        return 0.0
    raise GapError(f"{what} = {gap:.3e} is negative beyond rounding")


def _constrained(problem, it):
    C = problem.constraint
    scores = it.atw if problem.linear is None else it.atw + problem.linear
    vertex = C.lmo(scores)
    fx = float(scores @ it.x)
    mag = float(np.abs(scores) @ np.abs(it.x)) + abs(vertex.value)
    wolfe = _clamp(fx - vertex.value, mag, "Wolfe gap")
    f_part = problem.loss.value(it.y) + problem.loss.shifted_conjugate(it.w, problem.offset)
    lin = 0.0 if problem.linear is None else float(problem.linear @ it.x)
    raw = f_part + lin - vertex.value
    dual = _clamp(raw, mag + abs(f_part) + abs(lin))
    return dual, wolfe, it.w, 1.0, scores


def _augmented_elastic(problem, it):
    """Gap of ``1/2 ||Ax - b||^2 + lam2 ||x||^2 + lam1 ||x||_1`` written as a lasso
    on ``[A; sqrt(2 lam2) I]``."""
    pen = problem.penalty
    r = it.w
    x = it.x
    scores = it.atw + 2.0 * pen.lam2 * x
    m = float(np.max(np.abs(scores))) if scores.size else 0.0
    s = 1.0 if m <= pen.lam1 else pen.lam1 / m
    sq = float(r @ r) + 2.0 * pen.lam2 * float(x @ x)
    l1 = pen.lam1 * float(np.sum(np.abs(x)))
    cross = float(x @ scores)
    raw = 0.5 * (1.0 - s) ** 2 * sq + s * cross + l1
    gap = _clamp(raw, sq + abs(cross) + l1)
    w_top = s * r
    return gap, s, w_top, s * scores


def _penalized(problem, it):
    pen, loss = problem.penalty, problem.loss
    if isinstance(pen, ElasticNet) and isinstance(loss, SquaredError):
        gap, s, w, scores = _augmented_elastic(problem, it)
        return gap, None, w, s, scores
    atw = it.atw
    s = pen.dual_scale(atw)
    gx = pen.value(it.x)
    conj = pen.conjugate(-s * atw)
    if isinstance(loss, SquaredError) and problem.offset is None:
        r = it.w
        cross = float(it.x @ atw)
        rr = float(r @ r)
        raw = 0.5 * (1.0 - s) ** 2 * rr + s * cross + gx + conj
        mag = rr + abs(cross) + gx + conj
    else:
        fy = loss.value(it.y)
        fc = loss.shifted_conjugate(s * it.w, problem.offset)
        raw = fy + gx + fc + conj
        mag = abs(fy) + gx + abs(fc) + conj
    return _clamp(raw, mag), None, s * it.w, s, s * atw


def duality_gap(problem, it):
    """``G(x)`` at the mapped (and, for norm penalties, rescaled) dual point."""
    if problem.is_constrained:
        return _constrained(problem, it)[0]
    return _penalized(problem, it)[0]


def wolfe_gap(C, it):
    """``max_{z in C} (Ax - Az)^T grad`` including any linear term of the problem."""
    if not C.contains(it.x):
        raise ValueError("Wolfe gap requested at an infeasible point")
    problem = it.problem
    scores = it.atw if problem.linear is None else it.atw + problem.linear
    vertex = C.lmo(scores)
    fx = float(scores @ it.x)
    return _clamp(fx - vertex.value, float(np.abs(scores) @ np.abs(it.x)) + abs(vertex.value),
                  "Wolfe gap")


def certify(problem, it, iteration=0, require_mu=False):
    """Build the :class:`GapCertificate` of ``it``.

    ``require_mu`` makes a missing strong-convexity constant an error instead
    of leaving the image and gradient radii unset.
    """
    if not isinstance(it, Iterate):
        it = Iterate(problem, it)
    L, mu = problem.loss.constants()
    if problem.is_constrained:
        dual, wolfe, w, s, scores = _constrained(problem, it)
    else:
        dual, wolfe, w, s, scores = _penalized(problem, it)
    image = grad = None
    if wolfe is not None:
        if mu is None:
            if require_mu:
                raise RuleUnavailableError(
                    f"rule family unavailable for this objective: {problem.loss.kind} "
                    "has no strong-convexity constant")
        else:
            image = float(np.sqrt(wolfe / mu))
            grad = L * image
    return GapCertificate(
        duality_gap=dual, wolfe_gap=wolfe,
        dual_radius=float(np.sqrt(2.0 * L * dual)),
        image_radius=image, grad_radius=grad,
        dual_point=w, dual_scale=float(s), scores=scores, at_iterate=int(iteration))
