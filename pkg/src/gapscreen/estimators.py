"""scikit-learn style estimators backed by the screened solvers.

Every estimator exposes the usual ``fit`` / ``predict`` / ``get_params``
interface and records, after fitting, ``coef_``, ``n_iter_``,
``duality_gap_``, ``converged_``, ``screen_mask_`` and ``trace_``.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import type_of_target, unique_labels
from sklearn.utils.validation import check_is_fitted, validate_data

from . import problem as P
from .linalg import ColumnMatrix
from .solvers import SolverConfig, solve


class _ScreenedBase(BaseEstimator):
    """Shared solver settings and result bookkeeping."""

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.sparse = True
        return tags

    def _solver_config(self):
        return SolverConfig(max_iter=self.max_iter, gap_tol=self.tol,
                            screening_enabled=self.screening,
                            screening_period=self.screening_period,
                            safety_slack=self.safety_slack, seed=self.random_state)

    def _run(self, problem):
        res = solve(problem, self._solver_config())
        self.result_ = res
        # a start that is already optimal still costs one certificate pass
        self.n_iter_ = max(res.n_iter, 1)
        self.duality_gap_ = res.gap
        self.converged_ = res.converged
        self.screen_mask_ = res.mask
        self.trace_ = res.trace
        return res

    def _check_X(self, X):
        check_is_fitted(self)
        return validate_data(self, X, accept_sparse="csc", dtype=np.float64, reset=False)


class _Regressor(RegressorMixin, _ScreenedBase):
    def _data(self, X, y):
        return validate_data(self, X, y, accept_sparse="csc", dtype=np.float64,
                             y_numeric=True)

    def predict(self, X):
        return np.asarray(self._check_X(X) @ self.coef_).ravel()


class ScreenedLasso(_Regressor):
    """``1/2 ||y - X w||^2 + alpha ||w||_1`` with dynamic gap screening."""

    def __init__(self, alpha=1.0, tol=1e-7, max_iter=20000, screening=True,
                 screening_period=10, safety_slack=0.0, random_state=0):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._data(X, y)
        self.coef_ = self._run(P.lasso(X, y, self.alpha)).x
        return self


class ScreenedElasticNet(_Regressor):
    """``1/2 ||y - X w||^2 + l1 ||w||_1 + l2 ||w||^2``."""

    def __init__(self, l1=1.0, l2=0.0, tol=1e-7, max_iter=20000, screening=True,
                 screening_period=10, safety_slack=0.0, random_state=0):
        self.l1 = l1
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._data(X, y)
        self.coef_ = self._run(P.elastic_net(X, y, lam1=self.l1, lam2=self.l2)).x
        return self


class ScreenedGroupLasso(_Regressor):
    """``1/2 ||y - X w||^2 + alpha sum_g sqrt(rho_g) ||w_g||`` over contiguous groups.

    ``groups`` lists the group lengths; ``None`` puts every feature in its
    own group.
    """

    def __init__(self, alpha=1.0, groups=None, rho=None, tol=1e-7, max_iter=20000,
                 screening=True, screening_period=10, safety_slack=0.0, random_state=0):
        self.alpha = alpha
        self.groups = groups
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._data(X, y)
        groups = [1] * X.shape[1] if self.groups is None else list(self.groups)
        if sum(groups) != X.shape[1]:
            raise ValueError(f"groups cover {sum(groups)} features, X has {X.shape[1]}")
        self.coef_ = self._run(P.group_lasso(X, y, self.alpha, groups, self.rho)).x
        return self


class ConstrainedLeastSquares(_Regressor):
    """``min 1/2 ||y - X w||^2`` over a simplex, L1 ball or elastic-net ball.

    Parameters
    ----------
    constraint : {"simplex", "l1", "elastic"}
    radius : float
        L1-ball radius (``constraint="l1"``).
    l1_ratio, level : float
        Elastic-net ball ``l1_ratio ||w||_1 + (1 - l1_ratio)/2 ||w||^2 <= level``.
    """

    def __init__(self, constraint="simplex", radius=1.0, l1_ratio=0.5, level=1.0,
                 tol=1e-7, max_iter=20000, screening=True, screening_period=10,
                 safety_slack=0.0, random_state=0):
        self.constraint = constraint
        self.radius = radius
        self.l1_ratio = l1_ratio
        self.level = level
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._data(X, y)
        if self.constraint == "simplex":
            prob = P.simplex_ls(X, y)
        elif self.constraint == "l1":
            prob = P.l1_ls(X, y, self.radius)
        elif self.constraint == "elastic":
            prob = P.elastic_ball_ls(X, y, self.l1_ratio, self.level)
        else:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        self.coef_ = self._run(prob).x
        return self


class _BinaryClassifier(ClassifierMixin, _ScreenedBase):
    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def _data(self, X, y):
        X, y = validate_data(self, X, y, accept_sparse="csc", dtype=np.float64)
        kind = type_of_target(y, input_name="y", raise_unknown=True)
        if kind != "binary":
            raise ValueError(f"Only binary classification is supported. The type of the "
                             f"target is {kind}.")
        self.classes_ = unique_labels(y)
        if self.classes_.size < 2:
            raise ValueError(f"training data holds only one class: {self.classes_[0]!r}")
        return X, np.where(y == self.classes_[1], 1.0, -1.0)

    def decision_function(self, X):
        return np.asarray(self._check_X(X) @ self.coef_).ravel()

    def predict(self, X):
        positive = self.decision_function(X) > 0
        return self.classes_[positive.astype(int)]


class ScreenedLogisticRegression(_BinaryClassifier):
    """L1-penalized logistic regression without intercept."""

    def __init__(self, alpha=1.0, tol=1e-7, max_iter=20000, screening=True,
                 screening_period=10, safety_slack=0.0, random_state=0):
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, labels = self._data(X, y)
        self.coef_ = self._run(P.logistic_l1(X, labels, self.alpha)).x
        return self

    def predict_proba(self, X):
        p = 0.5 * (1.0 + np.tanh(0.5 * self.decision_function(X)))
        return np.column_stack([1.0 - p, p])


class ScreenedSVC(_BinaryClassifier):
    """Bias-free linear SVM solved in the dual with screening of the multipliers.

    ``loss="hinge"`` uses the box-constrained dual with bound ``C``;
    ``loss="squared_hinge"`` the simplex dual of the squared-hinge SVM.
    ``dual_coef_`` holds the multipliers and ``coef_`` the primal weights.
    """

    def __init__(self, C=1.0, loss="hinge", tol=1e-7, max_iter=20000, screening=True,
                 screening_period=10, safety_slack=0.0, random_state=0):
        self.C = C
        self.loss = loss
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y):
        X, labels = self._data(X, y)
        if self.loss == "hinge":
            prob = P.box_svm_hinge(X, labels, self.C)
        elif self.loss == "squared_hinge":
            prob = P.sq_hinge_svm(X, labels)
        else:
            raise ValueError(f"unknown loss {self.loss!r}")
        res = self._run(prob)
        self.dual_coef_ = res.x
        w = prob.A.matvec(res.x)
        if self.loss == "squared_hinge":
            # the simplex dual recovers the weights up to the margin scale
            w = w / max(float(w @ w), np.finfo(float).tiny)
        self.coef_ = w
        self.support_ = np.flatnonzero(res.x > 0)
        return self


class MinimumEnclosingBall(_ScreenedBase):
    """Smallest ball containing the rows of ``X``.

    After fitting, ``center_``, ``radius_`` and ``weights_`` (the dual point)
    are available; ``predict`` returns 1 inside the ball and -1 outside.
    """

    def __init__(self, tol=1e-10, max_iter=20000, screening=True, screening_period=10,
                 safety_slack=0.0, random_state=0):
        self.tol = tol
        self.max_iter = max_iter
        self.screening = screening
        self.screening_period = screening_period
        self.safety_slack = safety_slack
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, accept_sparse="csc", dtype=np.float64)
        prob = P.meb(ColumnMatrix(X))
        res = self._run(prob)
        self.weights_ = res.x
        self.center_, self.radius_ = P.meb_ball(prob, res.x)
        self.support_ = np.flatnonzero(res.x > 0)
        return self

    def decision_function(self, X):
        X = self._check_X(X)
        dense = X.toarray() if hasattr(X, "toarray") else X
        diff = dense - self.center_[None, :]
        return self.radius_ - np.sqrt(np.sum(diff ** 2, axis=1))

    def predict(self, X):
        return np.where(self.decision_function(X) >= -1e-9 * max(1.0, self.radius_), 1, -1)
