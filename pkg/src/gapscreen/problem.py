"""Problem instances ``min_x f(Ax + o) + g(x) + q^T x`` and their iterates.

``g`` is either the indicator of a constraint set or a penalty. The linear
term ``q`` carries the ``c^T x`` of the enclosing-ball dual and the
``-1^T x`` of the hinge SVM dual. The offset ``o`` appears once variables
are fixed at a nonzero bound and their columns are folded into ``Ax``.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from .geometry import (Box, ConstraintSpec, ElasticNet, ElasticNetBall,
                       ElasticNetUnit, GroupL2L1, GroupLayout, L1, L1Ball,
                       RegularizerSpec, Simplex)
from .linalg import ColumnMatrix, DimensionError, as_vector
from .objectives import (Logistic, MebQuadratic, PureQuadratic, SmoothObjective,
                         SquaredError)

KINDS = (
    "simplex_ls", "l1_ls", "elastic_ball_ls", "box_svm_hinge", "sq_hinge_svm",
    "meb", "lasso", "elastic_net", "group_lasso", "logistic_l1",
)


@dataclass(frozen=True, eq=False)
class Problem:
    """A primal problem bound to its data matrix.

    Exactly one of ``constraint`` and ``penalty`` is set.
    """

    A: ColumnMatrix
    loss: SmoothObjective
    constraint: ConstraintSpec = None
    penalty: RegularizerSpec = None
    linear: np.ndarray = None
    offset: np.ndarray = None
    constant: float = 0.0
    kind: str = "custom"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.A, ColumnMatrix):
            object.__setattr__(self, "A", ColumnMatrix(self.A))
        if (self.constraint is None) == (self.penalty is None):
            raise ValueError("a problem needs exactly one of constraint / penalty")
        n, d = self.A.n_cols, self.A.n_rows
        if self.linear is not None:
            q = as_vector(self.linear, "linear")
            if q.size != n:
                raise DimensionError(f"linear term has length {q.size}, expected {n}")
            object.__setattr__(self, "linear", q)
        if self.offset is not None:
            o = as_vector(self.offset, "offset")
            if o.size != d:
                raise DimensionError(f"offset has length {o.size}, expected {d}")
            object.__setattr__(self, "offset", o)
        b = getattr(self.loss, "b", None)
        if b is not None and b.size != d:
            raise DimensionError(f"targets have length {b.size}, matrix has {d} rows")
        layout = getattr(self.penalty, "layout", None)
        if layout is not None and layout.n_features != n:
            raise DimensionError(
                f"group layout covers {layout.n_features} columns, matrix has {n}")

    @property
    def n(self):
        return self.A.n_cols

    @property
    def is_constrained(self):
        return self.constraint is not None

    @property
    def upper(self):
        return self.constraint.upper if isinstance(self.constraint, Box) else None

    def image(self, x):
        y = self.A.matvec(x)
        if self.offset is not None:
            y = y + self.offset
        return y

    def g_value(self, x):
        val = 0.0 if self.penalty is None else self.penalty.value(x)
        if self.linear is not None:
            val += float(self.linear @ x)
        return val + self.constant

    def value(self, x):
        """Primal objective at ``x``."""
        x = as_vector(x, "x")
        return self.loss.value(self.image(x)) + self.g_value(x)

    def restrict(self, active, fixed_upper=()):
        """Compressed view on the columns ``active``.

        Columns listed in ``fixed_upper`` are held at the box bound and enter
        through the offset and the constant.
        """
        active = np.asarray(active, dtype=np.intp)
        fixed_upper = np.asarray(fixed_upper, dtype=np.intp)
        offset, constant = self.offset, self.constant
        if fixed_upper.size:
            C = self.upper
            if C is None:
                raise ValueError("only box problems can fix variables at a bound")
            z = np.zeros(self.n)
            z[fixed_upper] = C
            extra = self.A.matvec(z)
            offset = extra if offset is None else offset + extra
            if self.linear is not None:
                constant += C * float(self.linear[fixed_upper].sum())
        penalty = None if self.penalty is None else self.penalty.restrict(active)
        linear = None if self.linear is None else self.linear[active]
        return replace(self, A=self.A.columns(active), penalty=penalty,
                       linear=linear, offset=offset, constant=constant)

    def embed(self, x_view, active, fixed_upper=()):
        """Map a view point back to full length."""
        x = np.zeros(self.n)
        x[np.asarray(active, dtype=np.intp)] = x_view
        if len(fixed_upper):
            x[np.asarray(fixed_upper, dtype=np.intp)] = self.upper
        return x


class Iterate:
    """A point ``x`` with cached ``y = Ax + o``, ``w = grad f(y)`` and ``A^T w``."""

    __slots__ = ("problem", "x", "_y", "_w", "_atw", "_primal")

    def __init__(self, problem, x, y=None):
        self.problem = problem
        self.x = as_vector(x, "x")
        if self.x.size != problem.n:
            raise DimensionError(
                f"iterate has length {self.x.size}, problem has {problem.n} variables")
        self._y = None if y is None else as_vector(y, "y")
        self._w = None
        self._atw = None
        self._primal = None

    @property
    def y(self):
        if self._y is None:
            self._y = self.problem.image(self.x)
        return self._y

    @property
    def w(self):
        if self._w is None:
            self._w = self.problem.loss.gradient(self.y)
        return self._w

    @property
    def atw(self):
        if self._atw is None:
            self._atw = self.problem.A.rmatvec(self.w)
        return self._atw

    @property
    def ax(self):
        """``A x`` without the offset."""
        o = self.problem.offset
        return self.y if o is None else self.y - o

    @property
    def primal_value(self):
        if self._primal is None:
            self._primal = self.problem.loss.value(self.y) + self.problem.g_value(self.x)
        return self._primal


# ---------------------------------------------------------------------------
# constructors, one per supported kind
# ---------------------------------------------------------------------------

def _matrix(A):
    return A if isinstance(A, ColumnMatrix) else ColumnMatrix(A)


def simplex_ls(A, b):
    """``min 1/2 ||Ax - b||^2`` over the unit simplex."""
    return Problem(_matrix(A), SquaredError(b), constraint=Simplex(), kind="simplex_ls")


def l1_ls(A, b, radius):
    """``min 1/2 ||Ax - b||^2`` over the L1 ball of the given radius."""
    return Problem(_matrix(A), SquaredError(b), constraint=L1Ball(radius), kind="l1_ls")


def elastic_ball_ls(A, b, alpha, scale=1.0, ball_factor="certified"):
    if ball_factor not in ("certified", "unit_norm"):
        raise ValueError(f"ball_factor must be 'certified' or 'unit_norm', got {ball_factor!r}")
    return Problem(_matrix(A), SquaredError(b), constraint=ElasticNetBall(alpha, scale),
                   kind="elastic_ball_ls", options={"ball_factor": ball_factor})


def _label_vector(labels, n):
    y = as_vector(labels, "labels")
    if y.size != n:
        raise DimensionError(f"{y.size} labels for {n} samples")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    return y


def _samples_as_columns(X, labels):
    """Columns ``y_i * x_i`` from a samples-by-features matrix."""
    M = _matrix(X)
    y = _label_vector(labels, M.n_rows)
    if M.is_sparse:
        return ColumnMatrix((sparse.diags(y) @ M.data).T.tocsc())
    return ColumnMatrix((M.data * y[:, None]).T)


def box_svm_hinge(X, labels, C=1.0, improved=False):
    """Dual of the bias-free hinge SVM: ``min 1/2 ||Ax||^2 - 1^T x``, ``0 <= x <= C``."""
    A = _samples_as_columns(X, labels)
    return Problem(A, PureQuadratic(), constraint=Box(C), linear=-np.ones(A.n_cols),
                   kind="box_svm_hinge", options={"improved": bool(improved)})


def sq_hinge_svm(X, labels):
    """Dual of the squared-hinge SVM: ``min 1/2 ||Ax||^2`` over the simplex."""
    return Problem(_samples_as_columns(X, labels), PureQuadratic(),
                   constraint=Simplex(), kind="sq_hinge_svm")


def meb(points):
    """Dual of the minimum enclosing ball of the rows of ``points``."""
    P = _matrix(points)
    A = ColumnMatrix(P.data.T.tocsc() if P.is_sparse else P.data.T)
    return Problem(A, MebQuadratic(), constraint=Simplex(), linear=-A.col_sq_norms(),
                   kind="meb")


def meb_ball(problem, x):
    """Centre ``Ax`` and radius of the ball encoded by a dual point ``x``."""
    center = problem.A.matvec(x)
    r2 = float(problem.A.col_sq_norms() @ x) - float(center @ center)
    return center, float(np.sqrt(max(r2, 0.0)))


def lasso(A, b, lam):
    return Problem(_matrix(A), SquaredError(b), penalty=L1(lam), kind="lasso")


def elastic_net(A, b, lam1=None, lam2=0.0, alpha=None):
    """Squared-loss elastic net.

    Pass ``lam1`` (and ``lam2``) for ``lam2 ||x||^2 + lam1 ||x||_1``, or
    ``alpha`` alone for ``(1 - alpha)/2 ||x||^2 + alpha ||x||_1``.
    """
    if (lam1 is None) == (alpha is None):
        raise ValueError("elastic_net needs either lam1 or alpha")
    penalty = ElasticNetUnit(alpha) if alpha is not None else ElasticNet(lam1, lam2)
    return Problem(_matrix(A), SquaredError(b), penalty=penalty, kind="elastic_net")


def group_lasso(A, b, lam, groups, rho=None):
    """``lam * sum_g sqrt(rho_g) ||x_g||`` with groups given by their lengths.

    ``rho`` defaults to the group sizes.
    """
    layout = groups if isinstance(groups, GroupLayout) else GroupLayout(groups)
    rho = np.asarray(layout.lengths if rho is None else rho, dtype=np.float64)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return Problem(_matrix(A), SquaredError(b),
                   penalty=GroupL2L1(lam * np.sqrt(rho), layout), kind="group_lasso")


def logistic_l1(X, labels, lam):
    """``sum_j log(1 + exp(-y_j x_j^T beta)) + lam ||beta||_1``."""
    M = _matrix(X)
    y = _label_vector(labels, M.n_rows)
    if M.is_sparse:
        A = ColumnMatrix(sparse.diags(-y) @ M.data)
    else:
        A = ColumnMatrix(-y[:, None] * M.data)
    return Problem(A, Logistic(), penalty=L1(lam), kind="logistic_l1")
