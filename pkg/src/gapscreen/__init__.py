"""Safe screening with duality-gap certificates."""
from .gaps import GapCertificate, certify, duality_gap, wolfe_gap
from .geometry import (Box, ElasticNet, ElasticNetBall, ElasticNetUnit, GroupL2L1,
                       GroupLayout, L1, L1Ball, Simplex)
from .linalg import ColumnMatrix
from .objectives import Logistic, MebQuadratic, PureQuadratic, SquaredError
from .problem import (Iterate, Problem, box_svm_hinge, elastic_ball_ls, elastic_net,
                      group_lasso, l1_ls, lasso, logistic_l1, meb, simplex_ls,
                      sq_hinge_svm)
from .screening import ScreenMask, apply_mask
from .solvers import SolverConfig, SolveTrace, solve

__version__ = "0.1.0"

_ESTIMATORS = ("ScreenedLasso", "ScreenedElasticNet", "ScreenedGroupLasso",
               "ConstrainedLeastSquares", "ScreenedLogisticRegression", "ScreenedSVC",
               "MinimumEnclosingBall")


def __getattr__(name):
    # estimators pull in scikit-learn, so they load on first access
    if name in _ESTIMATORS:
        from . import estimators
        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
