"""High-precision reference solutions and brute-force checks.

Nothing here calls the screening, gap or solver modules: problems are read
as plain arrays and solved by accelerated projected/proximal gradient
followed by an exact solve of the optimality system on the detected
support ("polishing"). Enclosing balls use Welzl's algorithm. Each method
certifies its answer with its own gap formula.
"""
import sys
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, nnls
from scipy.special import expit, xlogy


class ReferenceBudgetError(RuntimeError):
    """The target gap was not reached within the iteration budget."""


@dataclass(frozen=True)
class ReferenceSolution:
    x_ref: np.ndarray
    gap_ref: float
    method: str
    center: np.ndarray = None
    radius: float = None


@dataclass(frozen=True)
class Violation:
    iteration: int
    index: int
    rule_id: str
    status: str
    x_ref_value: float


# ---------------------------------------------------------------------------
# projections and accelerated gradient
# ---------------------------------------------------------------------------

def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort and threshold)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_l1(v, r):
    if np.sum(np.abs(v)) <= r:
        return v.copy()
    return np.sign(v) * project_simplex(np.abs(v) / r) * r


def _elastic_h(z, alpha):
    return alpha * np.sum(np.abs(z)) + 0.5 * (1 - alpha) * float(z @ z)


def project_elastic(v, alpha, sigma):
    if _elastic_h(v, alpha) <= sigma:
        return v.copy()

    def shrink(nu):
        return np.sign(v) * np.maximum(np.abs(v) - nu * alpha, 0.0) / (1 + nu * (1 - alpha))

    hi = 1.0
    while _elastic_h(shrink(hi), alpha) > sigma:
        hi *= 2.0
    nu = brentq(lambda t: _elastic_h(shrink(t), alpha) - sigma, 0.0, hi, xtol=1e-15,
                rtol=4 * np.finfo(float).eps, maxiter=500)
    return shrink(nu)


def _fista(grad, prox, x0, step, iters):
    x = x0.copy()
    z = x0.copy()
    t = 1.0
    for _ in range(iters):
        x_new = prox(z - step * grad(z), step)
        if float((z - x_new) @ (x_new - x)) > 0:
            t = 1.0
            z = x_new
            x = x_new
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return x


def _lipschitz(Q):
    return max(float(np.linalg.eigvalsh(Q)[-1]), 1e-300)


# ---------------------------------------------------------------------------
# quadratic programs 1/2 x^T Q x + p^T x over constraint sets
# ---------------------------------------------------------------------------

def _qp_data(problem):
    A = problem.A.toarray()
    kind = problem.loss.kind
    if kind == "squared_error":
        h, centre = 1.0, problem.loss.b
    elif kind == "pure_quadratic":
        h, centre = 1.0, np.zeros(A.shape[0])
    elif kind == "meb_quadratic":
        h, centre = 2.0, np.zeros(A.shape[0])
    else:
        raise ValueError(f"no quadratic reference for loss {kind!r}")
    u = -centre if problem.offset is None else problem.offset - centre
    Q = h * (A.T @ A)
    p = h * (A.T @ u)
    if problem.linear is not None:
        p = p + problem.linear
    return Q, p


def _solve_sym(K, rhs):
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol


def _gap_simplex(Q, p, x):
    g = Q @ x + p
    return float(g @ x - g.min())


def _qp_simplex(Q, p, target, iters):
    n = p.size
    step = 1.0 / _lipschitz(Q)
    x = _fista(lambda z: Q @ z + p, lambda v, s: project_simplex(v), np.full(n, 1.0 / n),
               step, iters)
    best, best_gap = x, _gap_simplex(Q, p, x)
    S = x > 1e-9
    for _ in range(4 * n + 10):
        idx = np.flatnonzero(S)
        k = idx.size
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = Q[np.ix_(idx, idx)]
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        sol = _solve_sym(K, np.concatenate([-p[idx], [1.0]]))
        xs = sol[:k]
        if np.any(xs < 0):
            S[idx[np.argmin(xs)]] = False
            continue
        cand = np.zeros(n)
        cand[idx] = xs
        gap = _gap_simplex(Q, p, cand)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        g = Q @ cand + p
        j = int(np.argmin(g))
        if S[j]:
            break
        S[j] = True
    return best, best_gap


def _gap_box(Q, p, x, C):
    g = Q @ x + p
    return float(g @ x - C * np.minimum(g, 0.0).sum())


def _qp_box(Q, p, C, target, iters):
    n = p.size
    step = 1.0 / _lipschitz(Q)
    x = _fista(lambda z: Q @ z + p, lambda v, s: np.clip(v, 0.0, C), np.zeros(n), step, iters)
    best, best_gap = x, _gap_box(Q, p, x, C)
    tol = 1e-9 * max(1.0, C)
    for _ in range(2 * n + 10):
        g = Q @ x + p
        lower = (x <= tol) & (g >= 0)
        upper = (x >= C - tol) & (g <= 0)
        free = ~(lower | upper)
        cand = np.where(upper, C, 0.0)
        fi = np.flatnonzero(free)
        if fi.size:
            rhs = -(p[fi] + Q[np.ix_(fi, np.flatnonzero(upper))] @ cand[upper])
            cand[fi] = _solve_sym(Q[np.ix_(fi, fi)], rhs)
        cand = np.clip(cand, 0.0, C)
        gap = _gap_box(Q, p, cand, C)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target or np.array_equal(cand, x):
            break
        x = cand
    return best, best_gap


def _gap_l1(Q, p, x, r):
    g = Q @ x + p
    return float(g @ x + r * np.max(np.abs(g)))


def _qp_l1(Q, p, r, target, iters):
    n = p.size
    step = 1.0 / _lipschitz(Q)
    x = _fista(lambda z: Q @ z + p, lambda v, s: project_l1(v, r), np.zeros(n), step, iters)
    best, best_gap = x, _gap_l1(Q, p, x, r)
    S = np.abs(x) > 1e-9
    sign = np.sign(x)
    for _ in range(4 * n + 10):
        idx = np.flatnonzero(S)
        k = idx.size
        sg = sign[idx]
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = Q[np.ix_(idx, idx)]
        K[:k, k] = sg
        K[k, :k] = sg
        sol = _solve_sym(K, np.concatenate([-p[idx], [r]]))
        xs = sol[:k]
        bad = sg * xs < 0
        if np.any(bad):
            S[idx[np.argmin(sg * xs)]] = False
            continue
        cand = np.zeros(n)
        cand[idx] = xs
        gap = _gap_l1(Q, p, cand, r)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        g = Q @ cand + p
        j = int(np.argmax(np.abs(g)))
        if S[j]:
            break
        S[j] = True
        sign[j] = -np.sign(g[j])
    return best, best_gap


def elastic_support_value(u, alpha, sigma):
    """``max_{h(z) <= sigma} u^T z`` by a root search on the multiplier."""
    if not np.any(u):
        return 0.0
    if alpha == 1.0:
        return sigma * float(np.max(np.abs(u)))

    def z_of(nu):
        return np.sign(u) * np.maximum(np.abs(u) - nu * alpha, 0.0) / (nu * (1 - alpha))

    lo, hi = 1e-300, 1.0
    while _elastic_h(z_of(hi), alpha) > sigma:
        hi *= 2.0
    lo = hi / 2.0
    while _elastic_h(z_of(lo), alpha) < sigma:
        lo /= 2.0
    nu = brentq(lambda t: _elastic_h(z_of(t), alpha) - sigma, lo, hi, xtol=1e-300,
                rtol=4 * np.finfo(float).eps, maxiter=1000)
    return float(u @ z_of(nu))


def _gap_elastic(Q, p, x, alpha, sigma):
    g = Q @ x + p
    return float(g @ x + elastic_support_value(-g, alpha, sigma))


def _qp_elastic(Q, p, alpha, sigma, target, iters):
    n = p.size
    step = 1.0 / _lipschitz(Q)
    x = _fista(lambda z: Q @ z + p, lambda v, s: project_elastic(v, alpha, sigma),
               np.zeros(n), step, iters)
    best, best_gap = x, _gap_elastic(Q, p, x, alpha, sigma)
    S = np.abs(x) > 1e-9
    sign = np.sign(x)
    for _ in range(2 * n + 10):
        idx = np.flatnonzero(S)
        if idx.size == 0:
            break
        sg = sign[idx]
        QS, pS = Q[np.ix_(idx, idx)], p[idx]
        eye = np.eye(idx.size)

        def xs_of(nu):
            return np.linalg.solve(QS + nu * (1 - alpha) * eye, -(pS + nu * alpha * sg))

        def resid(nu):
            return _elastic_h(xs_of(nu), alpha) - sigma

        hi = 1.0
        while resid(hi) > 0 and hi < 1e12:
            hi *= 2.0
        if resid(0.0) <= 0:
            nu = 0.0
        elif resid(hi) > 0:
            # no multiplier keeps these signs: drop the worst coordinate
            xs = xs_of(hi)
            S[idx[np.argmin(sg * xs)]] = False
            continue
        else:
            nu = brentq(resid, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                        maxiter=1000)
        xs = xs_of(nu)
        if np.any(sg * xs < 0):
            S[idx[np.argmin(sg * xs)]] = False
            continue
        cand = np.zeros(n)
        cand[idx] = xs
        gap = _gap_elastic(Q, p, cand, alpha, sigma)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        g = Q @ cand + p
        off = np.flatnonzero(~S)
        if off.size == 0:
            break
        j = off[np.argmax(np.abs(g[off]))]
        S[j] = True
        sign[j] = -np.sign(g[j])
    return best, best_gap


# ---------------------------------------------------------------------------
# enclosing ball
# ---------------------------------------------------------------------------

def _sphere_through(R):
    if len(R) == 0:
        return None, -1.0
    P = np.array(R)
    p0 = P[0]
    if len(R) == 1:
        return p0.copy(), 0.0
    U = (P[1:] - p0).T
    G = U.T @ U
    mu = _solve_sym(2.0 * G, np.diag(G))
    c = p0 + U @ mu
    return c, float(np.max(np.linalg.norm(P - c, axis=1)))


def welzl(points, seed=0):
    """Exact minimum enclosing ball of the rows of ``points``."""
    P = np.asarray(points, dtype=np.float64)
    order = np.random.Generator(np.random.Philox(seed)).permutation(P.shape[0])
    P = P[order]
    dim = P.shape[1]
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * P.shape[0] + 100))
    try:
        def rec(n, R):
            if n == 0 or len(R) == dim + 1:
                return _sphere_through(R)
            c, r = rec(n - 1, R)
            p = P[n - 1]
            if c is not None and np.linalg.norm(p - c) <= r * (1 + 1e-12) + 1e-15:
                return c, r
            return rec(n - 1, R + [p])

        return rec(P.shape[0], [])
    finally:
        sys.setrecursionlimit(limit)


def _meb_reference(problem, target):
    A = problem.A.toarray()
    pts = A.T
    c, r = welzl(pts)
    dist = np.linalg.norm(pts - c, axis=1)
    B = np.flatnonzero(np.abs(dist - r) <= 1e-9 * max(1.0, r))
    M = np.vstack([A[:, B], np.ones((1, B.size))])
    rhs = np.concatenate([c, [1.0]])
    wB = _solve_sym(M, rhs)
    if np.any(wB < 0):
        wB, _ = nnls(M, rhs)
    x = np.zeros(A.shape[1])
    x[B] = wB / wB.sum()
    Q, p = _qp_data(problem)
    gap = _gap_simplex(Q, p, x)
    if gap > target:
        x2, gap2 = _qp_simplex(Q, p, target, 5000)
        if gap2 < gap:
            x, gap = x2, gap2
    return ReferenceSolution(x, max(gap, 0.0), "welzl", center=c, radius=float(r))


# ---------------------------------------------------------------------------
# penalized problems
# ---------------------------------------------------------------------------

def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _lasso_gap(A, b, x, lam, tau):
    """Gap of ``1/2 ||Ax - b||^2 + tau/2 ||x||^2 + lam ||x||_1`` as a lasso on
    ``[A; sqrt(tau) I]``."""
    r = A @ x - b
    corr = A.T @ r + tau * x
    m = float(np.max(np.abs(corr)))
    s = 1.0 if m <= lam else lam / m
    sq = float(r @ r) + tau * float(x @ x)
    # s x^T corr and lam ||x||_1 cancel at the optimum: pair them per coordinate
    return 0.5 * (1 - s) ** 2 * sq + float(x @ (s * corr + lam * np.sign(x)))


def _squared_l1_reference(A, b, lam, tau, target, iters):
    n = A.shape[1]
    Q = A.T @ A + tau * np.eye(n)
    Atb = A.T @ b
    step = 1.0 / _lipschitz(Q)
    x = _fista(lambda z: Q @ z - Atb, lambda v, s: _soft(v, s * lam), np.zeros(n), step, iters)
    best, best_gap = x, _lasso_gap(A, b, x, lam, tau)
    S = np.abs(x) > 1e-10
    sign = np.sign(x)
    for _ in range(2 * n + 10):
        idx = np.flatnonzero(S)
        cand = np.zeros(n)
        if idx.size:
            xs = np.linalg.solve(Q[np.ix_(idx, idx)], Atb[idx] - lam * sign[idx])
            if np.any(sign[idx] * xs < 0):
                S[idx[np.argmin(sign[idx] * xs)]] = False
                continue
            cand[idx] = xs
        gap = _lasso_gap(A, b, cand, lam, tau)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        corr = Q @ cand - Atb
        off = np.flatnonzero(~S)
        if off.size == 0:
            break
        j = off[np.argmax(np.abs(corr[off]))]
        if abs(corr[j]) <= lam:
            break
        S[j] = True
        sign[j] = -np.sign(corr[j])
    return best, best_gap


def _group_gap(A, b, x, weights, lookup, G):
    r = A @ x - b
    corr = A.T @ r
    block = np.sqrt(np.bincount(lookup, weights=corr * corr, minlength=G))
    with np.errstate(divide="ignore"):
        ratio = np.where(block > weights, weights / block, 1.0)
    s = min(1.0, float(ratio.min()))
    xn = np.sqrt(np.bincount(lookup, weights=x * x, minlength=G))
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(xn[lookup] > 0, x / xn[lookup], 0.0)
    # weights_g ||x_g|| = x_g^T (weights_g x_g / ||x_g||), paired with s x^T corr
    return 0.5 * (1 - s) ** 2 * float(r @ r) + float(x @ (s * corr + weights[lookup] * unit))


def _group_reference(A, b, weights, lookup, target, iters):
    n = A.shape[1]
    G = weights.size
    Q = A.T @ A
    Atb = A.T @ b
    step = 1.0 / _lipschitz(Q)

    def prox(v, s):
        nrm = np.sqrt(np.bincount(lookup, weights=v * v, minlength=G))
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(nrm > 0, np.maximum(1 - s * weights / nrm, 0.0), 0.0)
        return v * k[lookup]

    x = _fista(lambda z: Q @ z - Atb, prox, np.zeros(n), step, iters)
    best, best_gap = x, _group_gap(A, b, x, weights, lookup, G)
    for _ in range(50):
        xn = np.sqrt(np.bincount(lookup, weights=x * x, minlength=G))
        act = xn > 1e-12
        cols = np.flatnonzero(act[lookup])
        if cols.size == 0:
            break
        xs = x[cols].copy()
        sub = lookup[cols]
        # Newton on the smooth restricted objective
        for _ in range(50):
            nr = np.sqrt(np.bincount(sub, weights=xs * xs, minlength=G))
            gvec = Q[np.ix_(cols, cols)] @ xs - Atb[cols] + weights[sub] * xs / nr[sub]
            H = Q[np.ix_(cols, cols)].copy()
            for g in np.unique(sub):
                loc = np.flatnonzero(sub == g)
                xg = xs[loc]
                ng = nr[g]
                H[np.ix_(loc, loc)] += weights[g] * (np.eye(loc.size) / ng
                                                     - np.outer(xg, xg) / ng ** 3)
            dx = np.linalg.solve(H, -gvec)
            t = 1.0
            while t > 1e-12:
                trial = xs + t * dx
                tn = np.sqrt(np.bincount(sub, weights=trial * trial, minlength=G))
                if np.all(tn[np.unique(sub)] > 0):
                    break
                t *= 0.5
            xs = xs + t * dx
            if np.linalg.norm(t * dx) <= 1e-15 * max(1.0, np.linalg.norm(xs)):
                break
        cand = np.zeros(n)
        cand[cols] = xs
        gap = _group_gap(A, b, cand, weights, lookup, G)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        x = _fista(lambda z: Q @ z - Atb, prox, cand, step, iters // 4)
    return best, best_gap


def _logistic_gap(A, x, lam):
    y = A @ x
    w = expit(y)
    corr = A.T @ w
    m = float(np.max(np.abs(corr)))
    s = 1.0 if m <= lam else lam / m

    def neg_entropy(v):
        return xlogy(v, v) + xlogy(1 - v, 1 - v)

    # f(y) = w^T y - f*(w), so the gap is w^T y + f*(s w) - f*(w) + lam ||x||_1
    conj_diff = float(np.sum(neg_entropy(s * w) - neg_entropy(w)))
    return float(w @ y) + conj_diff + lam * float(np.abs(x).sum())


def _logistic_reference(A, lam, target, iters):
    n = A.shape[1]
    step = 4.0 / _lipschitz(A.T @ A)
    x = _fista(lambda z: A.T @ expit(A @ z), lambda v, s: _soft(v, s * lam), np.zeros(n),
               step, iters)
    best, best_gap = x, _logistic_gap(A, x, lam)
    for _ in range(20):
        S = np.flatnonzero(np.abs(x) > 1e-10)
        cand = x.copy()
        if S.size:
            sg = np.sign(x[S])
            AS = A[:, S]
            xs = x[S].copy()
            for _ in range(50):
                y = AS @ xs
                w = expit(y)
                grad = AS.T @ w + lam * sg
                H = (AS * (w * (1 - w))[:, None]).T @ AS
                dx = np.linalg.solve(H + 1e-300 * np.eye(S.size), -grad)
                xs = xs + dx
                if np.linalg.norm(dx) <= 1e-15 * max(1.0, np.linalg.norm(xs)):
                    break
            cand = np.zeros(n)
            cand[S] = xs
        gap = _logistic_gap(A, cand, lam)
        if gap < best_gap:
            best, best_gap = cand, gap
        if gap <= target:
            break
        x = _fista(lambda z: A.T @ expit(A @ z), lambda v, s: _soft(v, s * lam), best,
                   step, iters)
    return best, best_gap


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def reference_gap(problem, x):
    """Independent duality gap of ``x`` for any supported problem."""
    x = np.asarray(x, dtype=np.float64)
    C, R = problem.constraint, problem.penalty
    if C is not None:
        Q, p = _qp_data(problem)
        name = type(C).__name__
        if name == "Simplex":
            return _gap_simplex(Q, p, x)
        if name == "L1Ball":
            return _gap_l1(Q, p, x, C.radius)
        if name == "Box":
            return _gap_box(Q, p, x, C.upper)
        if name == "ElasticNetBall":
            return _gap_elastic(Q, p, x, C.alpha, C.scale)
    A = problem.A.toarray()
    name = type(R).__name__
    if problem.loss.kind == "logistic" and name == "L1":
        return _logistic_gap(A, x, R.lam)
    b = problem.loss.b
    if name == "L1":
        return _lasso_gap(A, b, x, R.lam, 0.0)
    if name == "ElasticNet":
        return _lasso_gap(A, b, x, R.lam1, 2.0 * R.lam2)
    if name == "ElasticNetUnit":
        return _lasso_gap(A, b, x, R.alpha, 1.0 - R.alpha)
    if name == "GroupL2L1":
        return _group_gap(A, b, x, R.weights, R.layout.lookup, R.layout.n_groups)
    raise ValueError(f"no reference gap for {problem.kind!r}")


def solve_reference(problem, target=1e-12, iters=4000):
    """Solve ``problem`` to duality gap ``<= target`` or raise
    :class:`ReferenceBudgetError`."""
    if problem.n > 500:
        raise ValueError("reference solves are limited to n <= 500")
    C, R = problem.constraint, problem.penalty
    if problem.kind == "meb":
        sol = _meb_reference(problem, target)
        if sol.gap_ref > target:
            raise ReferenceBudgetError(f"meb reference gap {sol.gap_ref:.3e} > {target:.1e}")
        return sol
    if C is not None:
        Q, p = _qp_data(problem)
        name = type(C).__name__
        if name == "Simplex":
            x, gap = _qp_simplex(Q, p, target, iters)
        elif name == "L1Ball":
            x, gap = _qp_l1(Q, p, C.radius, target, iters)
        elif name == "Box":
            x, gap = _qp_box(Q, p, C.upper, target, iters)
        elif name == "ElasticNetBall":
            x, gap = _qp_elastic(Q, p, C.alpha, C.scale, target, iters)
        else:
            raise ValueError(f"no reference method for constraint {name}")
        method = f"qp_{name.lower()}"
    else:
        A = problem.A.toarray()
        name = type(R).__name__
        if problem.loss.kind == "logistic":
            if name != "L1":
                raise ValueError("logistic reference supports the L1 penalty only")
            x, gap = _logistic_reference(A, R.lam, target, iters)
        elif name == "GroupL2L1":
            x, gap = _group_reference(A, problem.loss.b, R.weights, R.layout.lookup,
                                      target, iters)
        else:
            lam, tau = {"L1": (getattr(R, "lam", None), 0.0),
                        "ElasticNet": (getattr(R, "lam1", None), 2.0 * getattr(R, "lam2", 0.0)),
                        "ElasticNetUnit": (getattr(R, "alpha", None),
                                           1.0 - getattr(R, "alpha", 0.0))}[name]
            x, gap = _squared_l1_reference(A, problem.loss.b, lam, tau, target, iters)
        method = f"prox_{name.lower()}"
    if not gap <= target:
        raise ReferenceBudgetError(f"{problem.kind} reference gap {gap:.3e} > {target:.1e}")
    return ReferenceSolution(x, max(float(gap), 0.0), method)


def brute_force_conjugate(g, v, grid):
    """``max_u v u - g(u)`` over a grid; the maximizer must be interior."""
    u = np.asarray(grid, dtype=np.float64)
    try:
        gu = np.asarray(g(u), dtype=np.float64)
    except (TypeError, ValueError):
        gu = None
    if gu is None or gu.shape != u.shape:
        gu = np.vectorize(g, otypes=[float])(u)
    vals = v * u - gu
    k = int(np.argmax(vals))
    if k == 0 or k == u.size - 1:
        raise ValueError("maximizer on the grid boundary: widen the grid")
    return float(vals[k])


def check_safety(reports, x_ref, upper=None, tol=1e-8):
    """Every fixed index in ``reports`` must match ``x_ref`` within ``tol``."""
    x_ref = np.asarray(x_ref, dtype=np.float64)
    out = []
    # statuses: 1 = fixed at zero, 2 = fixed at the upper bound
    for rep in reports:
        for idx, status in rep.newly_fixed:
            target = 0.0 if status == 1 else upper
            if target is None or abs(x_ref[idx] - target) > tol:
                out.append(Violation(rep.iteration, int(idx), rep.rule_id,
                                     "fixed_zero" if status == 1 else "fixed_upper",
                                     float(x_ref[idx])))
    return out
