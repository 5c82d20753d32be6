"""Safe screening rules and the monotone mask they commit to.

Every rule reads an :class:`~gapscreen.problem.Iterate` of the current
(compressed) problem and its :class:`~gapscreen.gaps.GapCertificate`, and
returns a :class:`RuleReport` naming the original indices it proved to be
fixed at the optimum. The strict inequalities are tested with a rounding
guard: a rule fires only when its margin exceeds ``tau`` plus a small
multiple of machine epsilon times the size of the terms involved.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .gaps import RuleUnavailableError
from .geometry import (Box, ElasticNet, ElasticNetBall, ElasticNetUnit, GroupL2L1,
                       L1, L1Ball, Simplex)
from .objectives import MebQuadratic, PureQuadratic, SquaredError

ACTIVE, FIXED_ZERO, FIXED_UPPER = 0, 1, 2
STATUS_NAMES = {FIXED_ZERO: "fixed_zero", FIXED_UPPER: "fixed_upper"}
_GUARD = 64.0 * np.finfo(np.float64).eps


class ScreenMask:
    """Per-variable status with permanent transitions out of Active."""

    def __init__(self, n, upper=None):
        self.status = np.zeros(int(n), dtype=np.int8)
        self.upper = upper
        self._active = np.arange(int(n))

    @property
    def n(self):
        return self.status.size

    @property
    def active_to_original(self):
        return self._active

    @property
    def fixed_upper_indices(self):
        return np.flatnonzero(self.status == FIXED_UPPER)

    @property
    def n_active(self):
        return int(self._active.size)

    @property
    def n_fixed_zero(self):
        return int(np.count_nonzero(self.status == FIXED_ZERO))

    @property
    def n_fixed_upper(self):
        return int(np.count_nonzero(self.status == FIXED_UPPER))

    def fixed_offset(self, A):
        """``sum_{i fixed at the bound} C * a_i`` for the full matrix ``A``."""
        z = np.zeros(self.n)
        idx = self.fixed_upper_indices
        if idx.size:
            z[idx] = self.upper
        return A.matvec(z)

    def commit(self, fixed):
        """Apply ``(index, status)`` pairs; returns the number of transitions.

        Raises ValueError when an index is not Active, since that would
        revert or duplicate an earlier decision.
        """
        if len(fixed) == 0:
            return 0
        pairs = np.array(fixed, dtype=np.intp).reshape(-1, 2)
        idx, st = pairs[:, 0], pairs[:, 1]
        if not np.all((st == FIXED_ZERO) | (st == FIXED_UPPER)):
            raise ValueError(f"invalid status in {sorted(set(st.tolist()))}")
        if self.upper is None and FIXED_UPPER in st:
            raise ValueError("this mask has no upper bound to fix at")
        if np.any(self.status[idx] != ACTIVE):
            raise ValueError(f"variable {idx[self.status[idx] != ACTIVE][0]} is already fixed")
        self.status[idx] = st
        active = np.flatnonzero(self.status == ACTIVE)
        if active.size != self._active.size - idx.size:
            self.status[idx] = ACTIVE
            raise ValueError("the same variable is fixed twice in one commit")
        self._active = active
        return int(idx.size)

    def copy(self):
        other = ScreenMask(self.n, self.upper)
        other.status = self.status.copy()
        other._active = self._active.copy()
        return other


@dataclass
class RuleReport:
    rule_id: str
    iteration: int = 0
    newly_fixed: list = field(default_factory=list)
    lhs: list = field(default_factory=list)
    rhs: list = field(default_factory=list)

    @property
    def indices(self):
        return [i for i, _ in self.newly_fixed]

    def rows(self):
        for (i, st), l, r in zip(self.newly_fixed, self.lhs, self.rhs):
            yield (self.rule_id, self.iteration, int(i), STATUS_NAMES[st], repr(float(l)),
                   repr(float(r)))

    def to_csv(self, header=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(REPORT_HEADER)
        writer.writerows(self.rows())
        return buf.getvalue()


REPORT_HEADER = ("rule_id", "iter", "index", "status", "lhs", "rhs")


def _original(mask, k):
    return k if mask is None else mask.active_to_original[k]


def _fires(margin, scale, tau, loosen):
    return margin > tau + _GUARD * scale - loosen


def _collect(report, mask, fire, status, lhs, rhs):
    ks = np.flatnonzero(fire)
    if ks.size == 0:
        return
    orig = ks if mask is None else mask.active_to_original[ks]
    report.newly_fixed.extend(zip(orig.tolist(), [status] * ks.size))
    report.lhs.extend(np.asarray(lhs, dtype=np.float64)[ks].tolist())
    report.rhs.extend(np.asarray(rhs, dtype=np.float64)[ks].tolist())


def _col_norms(problem):
    return problem.A.col_norms()


def _need(cert, attr, rule):
    val = getattr(cert, attr)
    if val is None:
        raise RuleUnavailableError(
            f"rule family unavailable for this objective: {rule} needs a "
            "strong-convexity constant")
    return val


def _distances(problem, ax):
    """``||a_i - Ax||`` for every column, rounded upward for sparse storage."""
    A = problem.A
    if not A.is_sparse:
        return np.linalg.norm(A.data - ax[:, None], axis=0)
    sq = A.col_sq_norms()
    axx = float(ax @ ax)
    d2 = sq - 2.0 * A.rmatvec(ax) + axx
    return np.sqrt(np.maximum(d2, 0.0) + _GUARD * (sq + axx))


# ---------------------------------------------------------------------------
# constrained problems
# ---------------------------------------------------------------------------

def screen_simplex(it, cert, mask=None, tau=0.0, loosen=0.0, iteration=None,
                   rule_id="simplex"):
    """Simplex rule: ``(e_i - x)^T (A^T w + q) > L sqrt(G_W / mu) ||a_i - Ax||``."""
    problem = it.problem
    if not isinstance(problem.constraint, Simplex):
        raise ValueError(f"{rule_id} rule needs a simplex constraint")
    radius = _need(cert, "grad_radius", rule_id)
    scores = cert.scores
    fx = float(scores @ it.x)
    lhs = scores - fx
    rhs = radius * _distances(problem, it.ax)
    scale = np.abs(scores) + float(np.abs(scores) @ np.abs(it.x)) + rhs
    rep = RuleReport(rule_id, cert.at_iterate if iteration is None else iteration)
    _collect(rep, mask, _fires(lhs - rhs, scale, tau, loosen), FIXED_ZERO, lhs, rhs)
    return rep


def screen_sq_hinge_svm(it, cert, mask=None, **kw):
    """Squared-hinge SVM dual: the simplex rule with ``L = mu = 1``."""
    p = it.problem
    if not (isinstance(p.loss, PureQuadratic) and isinstance(p.constraint, Simplex)
            and p.linear is None):
        raise ValueError("sq_hinge_svm rule needs min 1/2 ||Ax||^2 over the simplex")
    return screen_simplex(it, cert, mask, rule_id="sq_hinge_svm", **kw)


def screen_meb(it, cert, mask=None, **kw):
    """Enclosing-ball dual: the simplex rule with ``L = mu = 2`` and ``q_i = -||a_i||^2``.

    A fired point lies strictly inside the optimal ball.
    """
    if not isinstance(it.problem.loss, MebQuadratic):
        raise ValueError("meb rule needs the enclosing-ball dual")
    return screen_simplex(it, cert, mask, rule_id="meb", **kw)


def _ball_terms(it, cert, rule_id):
    p = it.problem
    if p.linear is not None:
        raise ValueError(f"{rule_id} rule does not support a linear term")
    delta = _need(cert, "grad_radius", rule_id)
    ax = it.ax
    axw = float(ax @ it.w)
    return delta, ax, axw, float(np.linalg.norm(ax))


def screen_l1_constrained(it, cert, mask=None, radius=None, tau=0.0, loosen=0.0,
                          iteration=None):
    """L1-ball rule, for the ball of radius ``r``:

    ``r |a_i^T w| + (Ax)^T w + (r ||a_i|| + ||Ax||) delta < 0``
    with ``delta = L sqrt(G_W / mu)``.
    """
    p = it.problem
    if radius is None:
        if not isinstance(p.constraint, L1Ball):
            raise ValueError("l1_ball rule needs an L1-ball constraint")
        radius = p.constraint.radius
    delta, ax, axw, ax_norm = _ball_terms(it, cert, "l1_ball")
    scores = cert.scores
    norms = _col_norms(p)
    lhs = radius * np.abs(scores) + axw + (radius * norms + ax_norm) * delta
    scale = radius * np.abs(scores) + abs(axw) + (radius * norms + ax_norm) * delta
    rhs = np.zeros_like(lhs)
    rep = RuleReport("l1_ball", cert.at_iterate if iteration is None else iteration)
    _collect(rep, mask, _fires(-lhs, scale, tau, loosen), FIXED_ZERO, lhs, rhs)
    return rep


def elastic_ball_factor(alpha, scale=1.0, mode="certified"):
    """Lower bound on ``alpha / (2 scale - alpha ||x*||_1)`` for a boundary optimum.

    ``mode="unit_norm"`` returns ``2 alpha / (3 - alpha)``, which presumes
    ``||x*||_2 <= 1`` and is only offered for ``scale == 1``.
    """
    if mode == "unit_norm":
        if scale != 1.0:
            raise ValueError("the unit_norm factor is defined for scale 1 only")
        return 2.0 * alpha / (3.0 - alpha)
    if mode != "certified":
        raise ValueError(f"unknown factor mode {mode!r}")
    t = ElasticNetBall(alpha, scale).max_norm()
    return alpha / (2.0 * scale - alpha * t)


def screen_elastic_constrained(it, cert, mask=None, alpha=None, factor=None, tau=0.0,
                               loosen=0.0, iteration=None):
    """Elastic-net-ball rule:

    ``|a_i^T w| + phi (Ax)^T w + (||a_i|| + phi ||Ax||) delta < 0``.
    """
    p = it.problem
    C = p.constraint
    if not isinstance(C, ElasticNetBall):
        raise ValueError("elastic_ball rule needs an elastic-net-ball constraint")
    alpha = C.alpha if alpha is None else alpha
    if alpha == 1.0:
        rep = screen_l1_constrained(it, cert, mask, radius=C.scale, tau=tau,
                                    loosen=loosen, iteration=iteration)
        rep.rule_id = "elastic_ball"
        return rep
    mode = p.options.get("ball_factor", "certified")
    phi = elastic_ball_factor(alpha, C.scale, mode) if factor is None else factor
    delta, ax, axw, ax_norm = _ball_terms(it, cert, "elastic_ball")
    scores = cert.scores
    norms = _col_norms(p)
    lhs = np.abs(scores) + phi * axw + (norms + phi * ax_norm) * delta
    scale = np.abs(scores) + phi * abs(axw) + (norms + phi * ax_norm) * delta
    rhs = np.zeros_like(lhs)
    rep = RuleReport("elastic_ball", cert.at_iterate if iteration is None else iteration)
    _collect(rep, mask, _fires(-lhs, scale, tau, loosen), FIXED_ZERO, lhs, rhs)
    return rep


def screen_box(it, cert, mask=None, radius=None, tau=0.0, loosen=0.0, iteration=None,
               rule_id="box"):
    """Box rule: ``s_i - ||a_i|| R > 0`` fixes at 0, ``s_i + ||a_i|| R < 0`` fixes
    at the bound, where ``s = A^T w + q`` and ``R = sqrt(2 L G)`` by default."""
    p = it.problem
    if not isinstance(p.constraint, Box):
        raise ValueError(f"{rule_id} rule needs a box constraint")
    R = cert.dual_radius if radius is None else radius
    scores = cert.scores
    slack = _col_norms(p) * R
    scale = np.abs(scores) + slack
    rep = RuleReport(rule_id, cert.at_iterate if iteration is None else iteration)
    lo = _fires(scores - slack, scale, tau, loosen)
    hi = _fires(-scores - slack, scale, tau, loosen)
    _collect(rep, mask, lo, FIXED_ZERO, scores, slack)
    _collect(rep, mask, hi & ~lo, FIXED_UPPER, scores, -slack)
    return rep


def screen_hinge_svm(it, cert, mask=None, improved=None, **kw):
    """Hinge SVM dual: box rule on ``a_i^T A x - 1`` with radius ``sqrt(2 G)``,
    or ``sqrt(G)`` when ``improved``."""
    p = it.problem
    if not isinstance(p.loss, PureQuadratic):
        raise ValueError("hinge_svm rule needs f = 1/2 ||y||^2")
    if improved is None:
        improved = bool(p.options.get("improved", False))
    G = cert.duality_gap
    R = float(np.sqrt(G if improved else 2.0 * G))
    return screen_box(it, cert, mask, radius=R, rule_id="hinge_svm", **kw)


# ---------------------------------------------------------------------------
# penalized problems
# ---------------------------------------------------------------------------

def _threshold_rule(rule_id, it, cert, mask, thresholds, norms, radius, tau, loosen,
                    iteration):
    scores = np.abs(cert.scores)
    rhs = thresholds - norms * radius
    scale = scores + thresholds + norms * radius
    rep = RuleReport(rule_id, cert.at_iterate if iteration is None else iteration)
    _collect(rep, mask, _fires(rhs - scores, scale, tau, loosen), FIXED_ZERO, scores, rhs)
    return rep


def screen_l1_penalized(it, cert, mask=None, lam=None, tau=0.0, loosen=0.0,
                        iteration=None):
    """``|a_i^T w~| < lam - ||a_i|| sqrt(2 L G)``."""
    p = it.problem
    if lam is None:
        if not isinstance(p.penalty, L1):
            raise ValueError("l1_penalty rule needs an L1 penalty")
        lam = p.penalty.lam
    return _threshold_rule("l1_penalty", it, cert, mask, lam, _col_norms(p),
                           cert.dual_radius, tau, loosen, iteration)


def screen_elastic_penalized(it, cert, mask=None, tau=0.0, loosen=0.0, iteration=None):
    """Elastic-net penalties.

    Unit form: ``|a_i^T w| < alpha - ||a_i|| sqrt(2 L G)``. Regression form
    with squared loss: the lasso rule on ``[A; sqrt(2 lam2) I]``, i.e.
    ``|s (a_i^T (Ax - b) + 2 lam2 x_i)| < lam1 - sqrt(2 (||a_i||^2 + 2 lam2) G)``.
    """
    p = it.problem
    pen = p.penalty
    if isinstance(pen, ElasticNetUnit):
        return _threshold_rule("elastic_penalty", it, cert, mask, pen.alpha, _col_norms(p),
                               cert.dual_radius, tau, loosen, iteration)
    if isinstance(pen, ElasticNet):
        if not isinstance(p.loss, SquaredError):
            raise ValueError("the regression elastic-net rule needs a squared-error loss")
        norms = np.sqrt(p.A.col_sq_norms() + 2.0 * pen.lam2)
        return _threshold_rule("elastic_penalty", it, cert, mask, pen.lam1, norms,
                               cert.dual_radius, tau, loosen, iteration)
    raise ValueError("elastic_penalty rule needs an elastic-net penalty")


def screen_group(it, cert, mask=None, tau=0.0, loosen=0.0, iteration=None):
    """``||A_g^T w~|| + sqrt(2 L G) ||A_g||_F < weight_g``, applied to whole groups."""
    p = it.problem
    pen = p.penalty
    if not isinstance(pen, GroupL2L1):
        raise ValueError("group rule needs a group penalty")
    layout = pen.layout
    lookup = layout.lookup
    s = cert.scores
    block = np.sqrt(np.bincount(lookup, weights=s * s, minlength=layout.n_groups))
    frob = np.sqrt(np.bincount(lookup, weights=p.A.col_sq_norms(),
                               minlength=layout.n_groups))
    R = cert.dual_radius
    lhs = block + R * frob
    rhs = pen.weights
    fire = _fires(rhs - lhs, lhs + rhs, tau, loosen)
    rep = RuleReport("group", cert.at_iterate if iteration is None else iteration)
    _collect(rep, mask, fire[lookup], FIXED_ZERO, lhs[lookup], rhs[lookup])
    return rep


# ---------------------------------------------------------------------------
# dispatch and compression
# ---------------------------------------------------------------------------

RULES = {
    "simplex_ls": screen_simplex,
    "l1_ls": screen_l1_constrained,
    "elastic_ball_ls": screen_elastic_constrained,
    "box_svm_hinge": screen_hinge_svm,
    "sq_hinge_svm": screen_sq_hinge_svm,
    "meb": screen_meb,
    "lasso": screen_l1_penalized,
    "elastic_net": screen_elastic_penalized,
    "group_lasso": screen_group,
    "logistic_l1": screen_l1_penalized,
}


def rule_for(problem):
    """Default rule of a problem, checked against its structure up front."""
    kind = problem.kind
    if kind in RULES:
        rule = RULES[kind]
    elif isinstance(problem.constraint, Simplex):
        rule = screen_simplex
    elif isinstance(problem.constraint, L1Ball):
        rule = screen_l1_constrained
    elif isinstance(problem.constraint, ElasticNetBall):
        rule = screen_elastic_constrained
    elif isinstance(problem.constraint, Box):
        rule = screen_box
    elif isinstance(problem.penalty, L1):
        rule = screen_l1_penalized
    elif isinstance(problem.penalty, (ElasticNet, ElasticNetUnit)):
        rule = screen_elastic_penalized
    elif isinstance(problem.penalty, GroupL2L1):
        rule = screen_group
    else:
        raise ValueError(f"no screening rule for problem kind {kind!r}")
    if problem.is_constrained and rule is not screen_box and rule is not screen_hinge_svm:
        if problem.loss.constants()[1] is None:
            raise RuleUnavailableError(
                "rule family unavailable for this objective: constrained rules need "
                "a strongly convex loss")
    return rule


def apply_mask(mask, problem):
    """Compressed view of ``problem`` on the Active variables of ``mask``.

    Returns None once every variable is fixed: the mask alone then determines
    the solution.
    """
    if mask.n_active == 0:
        return None
    if mask.n_active == problem.n and mask.n_fixed_upper == 0:
        return problem
    return problem.restrict(mask.active_to_original, mask.fixed_upper_indices)
