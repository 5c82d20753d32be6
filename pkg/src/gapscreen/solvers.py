"""Iterative solvers with dynamic screening.

Each solver works on the compressed view of the problem. Every
``screening_period`` iterations the driver certifies the current iterate,
runs the problem's rule, commits the newly fixed variables and shrinks the
view; trace rows are written at those checkpoints and every ``trace_every``
iterations.
"""
import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import svds

from .gaps import certify
from .geometry import Box, ElasticNetBall, L1Ball, Simplex
from .objectives import SquaredError
from .problem import Iterate
from .screening import ScreenMask, apply_mask, rule_for

TRACE_HEADER = ("iter", "elapsed_ms", "primal", "gap", "wolfe_gap", "n_active",
                "n_fixed_zero", "n_fixed_upper")
ALGORITHMS = ("auto", "pairwise_frank_wolfe", "proximal_gradient", "coordinate_descent_box")


@dataclass
class SolverConfig:
    algorithm: str = "auto"
    max_iter: int = 20000
    gap_tol: float = 1e-7
    screening_enabled: bool = True
    screening_period: int = 10
    safety_slack: float = 0.0
    seed: int = 0
    trace_every: int = 25
    #: test hook: lowers every rule threshold by this amount (breaks safety)
    loosen: float = 0.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if int(self.screening_period) < 1:
            raise ValueError("screening_period must be at least 1")
        if int(self.trace_every) < 1:
            raise ValueError("trace_every must be at least 1")
        if int(self.max_iter) < 0:
            raise ValueError("max_iter must be non-negative")
        if self.safety_slack < 0:
            raise ValueError("safety_slack must be non-negative")


class SolveTrace:
    """Checkpoint rows in the fixed CSV layout of :data:`TRACE_HEADER`."""

    def __init__(self):
        self.rows = []

    def add(self, iteration, elapsed_ms, primal, gap, wolfe_gap, n_active, n_zero, n_upper):
        self.rows.append((int(iteration), float(elapsed_ms), float(primal), float(gap),
                          None if wolfe_gap is None else float(wolfe_gap),
                          int(n_active), int(n_zero), int(n_upper)))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        j = TRACE_HEADER.index(name)
        return np.array([np.nan if r[j] is None else r[j] for r in self.rows])

    def to_csv(self, include_elapsed=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = list(TRACE_HEADER)
        if not include_elapsed:
            header.remove("elapsed_ms")
        writer.writerow(header)
        for r in self.rows:
            cells = [str(r[0]), f"{r[1]:.3f}"] + [
                "" if v is None else repr(v) for v in r[2:5]] + [str(v) for v in r[5:]]
            if not include_elapsed:
                del cells[1]
            writer.writerow(cells)
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


@dataclass
class SolveResult:
    x: np.ndarray
    trace: SolveTrace
    mask: ScreenMask
    reports: list
    n_iter: int
    converged: bool
    certificate: object = None
    elapsed: float = 0.0
    problem: object = field(default=None, repr=False)

    @property
    def gap(self):
        return None if self.certificate is None else self.certificate.duality_gap

    @property
    def primal(self):
        return self.problem.value(self.x)


class ScreeningDriver:
    """Owns the mask, the compressed view, the reports and the trace of one solve.

    The rule is resolved at construction, so a rule that does not fit the
    problem fails before any iteration runs.
    """

    def __init__(self, problem, cfg, rule=None):
        self.problem = problem
        self.cfg = cfg
        self.rule = rule if rule is not None else (
            rule_for(problem) if cfg.screening_enabled else None)
        self.mask = ScreenMask(problem.n, problem.upper)
        self.view = problem
        self.reports = []
        self.trace = SolveTrace()
        self._t0 = time.perf_counter()

    def due(self, k):
        return k % self.cfg.screening_period == 0 or k % self.cfg.trace_every == 0

    def certify(self, k, x_view, y=None, atw=None):
        it = Iterate(self.view, x_view, y)
        if atw is not None:
            it._atw = atw
        return it, certify(self.view, it, k)

    def screen(self, k, it, cert):
        """Run the rule if due; returns the positions (in the old view) that stay
        active, or None when nothing changed."""
        if (self.rule is None or not self.cfg.screening_enabled
                or k % self.cfg.screening_period != 0):
            return None
        rep = self.rule(it, cert, self.mask, tau=self.cfg.safety_slack,
                        loosen=self.cfg.loosen, iteration=k)
        if not rep.newly_fixed:
            return None
        before = self.mask.active_to_original.copy()
        self.mask.commit(rep.newly_fixed)
        self.reports.append(rep)
        self.view = apply_mask(self.mask, self.problem)
        return np.flatnonzero(np.isin(before, self.mask.active_to_original))

    def record(self, k, it, cert):
        m = self.mask
        if it is None:
            primal, gap, wolfe = self.problem.value(self.solution(np.zeros(0))), 0.0, None
            if self.problem.is_constrained:
                wolfe = 0.0
        else:
            primal, gap, wolfe = it.primal_value, cert.duality_gap, cert.wolfe_gap
        self.trace.add(k, 1000.0 * (time.perf_counter() - self._t0), primal, gap, wolfe,
                       m.n_active, m.n_fixed_zero, m.n_fixed_upper)

    def solution(self, x_view):
        return self.problem.embed(x_view, self.mask.active_to_original,
                                  self.mask.fixed_upper_indices)

    def result(self, x_view, k, converged, cert):
        return SolveResult(self.solution(x_view), self.trace, self.mask, self.reports, k,
                           converged, cert, time.perf_counter() - self._t0, self.problem)


# ---------------------------------------------------------------------------
# Frank-Wolfe
# ---------------------------------------------------------------------------

def _vertex_values(loss, M, offset, linear):
    """Objective value at every atom (unit weight on one column)."""
    h = loss.quadratic_curvature
    if h is not None:
        centre = loss.b if isinstance(loss, SquaredError) else np.zeros(M.n_rows)
        u = -centre if offset is None else offset - centre
        vals = 0.5 * h * (M.col_sq_norms() + 2.0 * M.rmatvec(u) + float(u @ u))
    else:
        o = 0.0 if offset is None else offset
        vals = np.array([loss.value(M.column(j) + o) for j in range(M.n_cols)])
    if linear is not None:
        vals = vals + linear
    return vals


class _Atoms:
    """Columns the pairwise solver mixes: ``A`` for the simplex, ``r [A, -A]``
    for the L1 ball. ``owner`` maps atoms to original variables."""

    def __init__(self, problem):
        C = problem.constraint
        n = problem.n
        if isinstance(C, Simplex):
            self.M = problem.A
            self.owner = np.arange(n)
            self.radius = None
        elif isinstance(C, L1Ball):
            self.M = problem.A.hstack_neg().scaled(C.radius)
            self.owner = np.concatenate([np.arange(n), np.arange(n)])
            self.radius = C.radius
        else:
            raise ValueError("pairwise Frank-Wolfe needs a simplex or L1-ball constraint")
        self.linear = problem.linear

    def select(self, active):
        """Atom indices of the active originals, in view column order."""
        if self.radius is None:
            return active
        return np.concatenate([active, active + self.M.n_cols // 2])

    def to_view(self, lam_act):
        if self.radius is None:
            return lam_act
        k = lam_act.size // 2
        return self.radius * (lam_act[:k] - lam_act[k:])


def pairwise_frank_wolfe(problem, cfg=None, callback=None):
    """Pairwise Frank-Wolfe over the simplex or an L1 ball (elastic-net balls
    use the vanilla variant, having no finite atom set).

    ``callback(k, weights, cert)`` is called at every checkpoint with the full
    atom weight vector.
    """
    cfg = cfg or SolverConfig()
    if isinstance(problem.constraint, ElasticNetBall):
        return frank_wolfe(problem, cfg, callback)
    atoms = _Atoms(problem)
    driver = ScreeningDriver(problem, cfg)
    loss, o = problem.loss, problem.offset
    h = loss.quadratic_curvature
    n_atoms = atoms.M.n_cols

    lam = np.zeros(n_atoms)
    lam[int(np.argmin(_vertex_values(loss, atoms.M, o, atoms.linear)))] = 1.0
    sel = atoms.select(driver.mask.active_to_original)
    M, q = atoms.M, atoms.linear
    lam_act = lam.copy()

    def image():
        y = M.matvec(lam_act)
        return y if o is None else y + o

    y = image()
    k, converged, cert = 0, False, None
    while True:
        w = loss.gradient(y)
        g = M.rmatvec(w)
        if q is not None:
            g = g + q
        s = int(np.argmin(g))
        wolfe = float(g @ lam_act) - g[s]
        done = wolfe <= cfg.gap_tol or k >= cfg.max_iter
        if driver.due(k) or done:
            y = image()
            it, cert = driver.certify(k, atoms.to_view(lam_act), y)
            keep = driver.screen(k, it, cert)
            if keep is not None:
                lam[:] = 0.0
                lam[sel] = lam_act
                old_sel = sel
                sel = atoms.select(driver.mask.active_to_original)
                if driver.view is None:
                    driver.record(k, None, None)
                    return driver.result(np.zeros(0), k, True, None)
                M = atoms.M.columns(sel)
                q = None if atoms.linear is None else atoms.linear[sel]
                lam_act = lam[sel].copy()
                total = lam_act.sum()
                if total > 0:
                    lam_act /= total
                else:
                    # every weighted atom was removed: restart from the best survivor
                    lam_act[int(np.argmin(g[np.isin(old_sel, sel)]))] = 1.0
                y = image()
                it, cert = driver.certify(k, atoms.to_view(lam_act), y)
                w = loss.gradient(y)
                g = M.rmatvec(w) if q is None else M.rmatvec(w) + q
                s = int(np.argmin(g))
                wolfe = float(g @ lam_act) - g[s]
                done = wolfe <= cfg.gap_tol or k >= cfg.max_iter
            driver.record(k, it, cert)
            if callback is not None:
                full = np.zeros(n_atoms)
                full[sel] = lam_act
                callback(k, full, cert)
        if done:
            converged = wolfe <= cfg.gap_tol
            break
        supp = np.flatnonzero(lam_act > 0)
        v = int(supp[np.argmax(g[supp])])
        slope = g[s] - g[v]
        if slope >= 0:
            break
        gmax = lam_act[v]
        dy = M.column(s) - M.column(v)
        if h is not None:
            den = h * float(dy @ dy)
            gamma = gmax if den <= 0 else min(gmax, -slope / den)
        else:
            gamma = _armijo(problem, y, dy, gmax, slope,
                            0.0 if q is None else q[s] - q[v])
        lam_act[s] += gamma
        lam_act[v] = 0.0 if gamma >= gmax else lam_act[v] - gamma
        y = y + gamma * dy
        k += 1
    return driver.result(atoms.to_view(lam_act), k, converged, cert)


def _armijo(problem, y, dy, gmax, slope, dq):
    f0 = problem.loss.value(y)
    gamma = gmax
    while gamma > 1e-16:
        if problem.loss.value(y + gamma * dy) + gamma * dq <= f0 + 1e-4 * gamma * slope:
            return gamma
        gamma *= 0.5
    return 0.0


def frank_wolfe(problem, cfg=None, callback=None):
    """Vanilla Frank-Wolfe with exact line search for quadratic losses."""
    cfg = cfg or SolverConfig()
    C = problem.constraint
    if C is None or not C.bounded:
        raise ValueError("Frank-Wolfe needs a bounded constraint set")
    driver = ScreeningDriver(problem, cfg)
    loss = problem.loss
    h = loss.quadratic_curvature
    view = problem
    x = np.zeros(problem.n) if not isinstance(C, Simplex) else np.eye(1, problem.n, 0)[0]
    y = view.image(x)
    k, converged, cert = 0, False, None
    while True:
        w = loss.gradient(y)
        g = view.A.rmatvec(w)
        if view.linear is not None:
            g = g + view.linear
        vert = C.lmo(g)
        wolfe = float(g @ x) - vert.value
        done = wolfe <= cfg.gap_tol or k >= cfg.max_iter
        if driver.due(k) or done:
            y = view.image(x)
            it, cert = driver.certify(k, x, y)
            keep = driver.screen(k, it, cert)
            if keep is not None:
                view = driver.view
                if view is None:
                    driver.record(k, None, None)
                    return driver.result(np.zeros(0), k, True, None)
                x = x[keep]
                y = view.image(x)
                it, cert = driver.certify(k, x, y)
                w = loss.gradient(y)
                g = view.A.rmatvec(w) if view.linear is None else view.A.rmatvec(w) + view.linear
                vert = C.lmo(g)
                wolfe = float(g @ x) - vert.value
                done = wolfe <= cfg.gap_tol or k >= cfg.max_iter
            driver.record(k, it, cert)
            if callback is not None:
                callback(k, driver.solution(x), cert)
        if done:
            converged = wolfe <= cfg.gap_tol
            break
        s = vert.dense(x.size)
        d = s - x
        dy = view.A.matvec(s) - (y if view.offset is None else y - view.offset)
        if h is not None:
            den = h * float(dy @ dy)
            gamma = 1.0 if den <= 0 else min(1.0, wolfe / den)
        else:
            dq = 0.0 if view.linear is None else float(view.linear @ d)
            gamma = _armijo(view, y, dy, 1.0, -wolfe, dq)
        if gamma <= 0:
            break
        x = x + gamma * d
        y = y + gamma * dy
        k += 1
    return driver.result(x, k, converged, cert)


# ---------------------------------------------------------------------------
# coordinate descent on a box
# ---------------------------------------------------------------------------

class _ColumnAccess:
    def __init__(self, A):
        self.dense = not A.is_sparse
        self.data = A.data
        self.sq = A.col_sq_norms()

    def dot(self, i, v):
        if self.dense:
            return float(self.data[:, i] @ v)
        lo, hi = self.data.indptr[i], self.data.indptr[i + 1]
        return float(self.data.data[lo:hi] @ v[self.data.indices[lo:hi]])

    def axpy(self, i, a, v):
        if self.dense:
            v += a * self.data[:, i]
        else:
            lo, hi = self.data.indptr[i], self.data.indptr[i + 1]
            v[self.data.indices[lo:hi]] += a * self.data.data[lo:hi]


def coordinate_descent_box(problem, cfg=None):
    """Cyclic exact coordinate minimization clipped to ``[0, C]``.

    One iteration is one sweep over the active coordinates. The loss must be
    a quadratic ``h/2 ||y - c||^2``.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(problem.constraint, Box):
        raise ValueError("coordinate_descent_box needs a box constraint")
    h = problem.loss.quadratic_curvature
    if h is None:
        raise ValueError("coordinate_descent_box needs a quadratic loss")
    C = problem.constraint.upper
    centre = problem.loss.b if isinstance(problem.loss, SquaredError) else None
    driver = ScreeningDriver(problem, cfg)
    view = problem
    x = np.zeros(problem.n)
    k, converged, cert = 0, False, None
    while True:
        y = view.image(x)
        it, cert = driver.certify(k, x, y)
        done = cert.duality_gap <= cfg.gap_tol or k >= cfg.max_iter
        if driver.due(k) or done:
            keep = driver.screen(k, it, cert)
            if keep is not None:
                view = driver.view
                if view is None:
                    driver.record(k, None, None)
                    return driver.result(np.zeros(0), k, True, None)
                x = x[keep]
                y = view.image(x)
                it, cert = driver.certify(k, x, y)
                done = cert.duality_gap <= cfg.gap_tol or k >= cfg.max_iter
            driver.record(k, it, cert)
        if done:
            converged = cert.duality_gap <= cfg.gap_tol
            break
        cols = _ColumnAccess(view.A)
        q = view.linear
        r = y.copy() if centre is None else y - centre
        for i in range(x.size):
            qi = 0.0 if q is None else q[i]
            gi = h * cols.dot(i, r) + qi
            if cols.sq[i] > 0:
                new = min(max(x[i] - gi / (h * cols.sq[i]), 0.0), C)
            else:
                new = C if qi < 0 else 0.0
            delta = new - x[i]
            if delta != 0.0:
                x[i] = new
                cols.axpy(i, delta, r)
        k += 1
    return driver.result(x, k, converged, cert)


# ---------------------------------------------------------------------------
# proximal gradient
# ---------------------------------------------------------------------------

def spectral_norm_sq(A):
    """``||A||_2^2``; exact SVD for small matrices, Lanczos (padded 1%) otherwise."""
    if min(A.shape) <= 600 and not A.is_sparse:
        return float(np.linalg.norm(A.data, 2)) ** 2
    if min(A.shape) == 1:
        return float(A.col_sq_norms().sum())
    s = svds(A.data, k=1, return_singular_vectors=False, random_state=0)
    return 1.01 * float(s[0]) ** 2


def proximal_gradient(problem, cfg=None):
    """Proximal gradient with the constant step ``1 / (L ||A||_2^2)``."""
    cfg = cfg or SolverConfig()
    R = problem.penalty
    if R is None:
        raise ValueError("proximal_gradient needs a penalized problem")
    L = problem.loss.constants()[0]
    lip = L * spectral_norm_sq(problem.A)
    step = 1.0 / lip if lip > 0 else 1.0
    driver = ScreeningDriver(problem, cfg)
    view = problem
    x = np.zeros(problem.n)
    k, converged, cert = 0, False, None
    while True:
        it, cert = driver.certify(k, x)
        done = cert.duality_gap <= cfg.gap_tol or k >= cfg.max_iter
        if driver.due(k) or done:
            keep = driver.screen(k, it, cert)
            if keep is not None:
                view = driver.view
                if view is None:
                    driver.record(k, None, None)
                    return driver.result(np.zeros(0), k, True, None)
                x = x[keep]
                it, cert = driver.certify(k, x)
                done = cert.duality_gap <= cfg.gap_tol or k >= cfg.max_iter
            driver.record(k, it, cert)
        if done:
            converged = cert.duality_gap <= cfg.gap_tol
            break
        x = view.penalty.prox(x - step * it.atw, step)
        k += 1
    return driver.result(x, k, converged, cert)


def solve(problem, cfg=None):
    """Dispatch to the solver matching the problem (or ``cfg.algorithm``)."""
    cfg = cfg or SolverConfig()
    algo = cfg.algorithm
    if algo == "auto":
        if problem.penalty is not None:
            algo = "proximal_gradient"
        elif isinstance(problem.constraint, Box):
            algo = "coordinate_descent_box"
        else:
            algo = "pairwise_frank_wolfe"
    if algo == "pairwise_frank_wolfe":
        return pairwise_frank_wolfe(problem, cfg)
    if algo == "proximal_gradient":
        return proximal_gradient(problem, cfg)
    return coordinate_descent_box(problem, cfg)
