import dataclasses

import numpy as np
import pytest

import gapscreen as gs
from gapscreen.gaps import RuleUnavailableError, certify, duality_gap
from gapscreen.problem import Iterate
from gapscreen.reference import project_simplex, solve_reference
from gapscreen.screening import (ACTIVE, FIXED_UPPER, FIXED_ZERO, REPORT_HEADER, RuleReport,
                                 ScreenMask, apply_mask, elastic_ball_factor, rule_for,
                                 screen_box, screen_elastic_constrained,
                                 screen_elastic_penalized, screen_group, screen_hinge_svm,
                                 screen_l1_constrained, screen_l1_penalized, screen_meb,
                                 screen_simplex, screen_sq_hinge_svm)
from instances import make_instance, random_feasible

ALL_KINDS = ("simplex_ls", "l1_ls", "elastic_ball_ls", "box_svm_hinge", "sq_hinge_svm", "meb",
             "lasso", "elastic_net", "group_lasso", "logistic_l1")


def run(problem, x, rule=None, mask=None, **kw):
    it = Iterate(problem, x)
    rule = rule or rule_for(problem)
    return rule(it, certify(problem, it), mask, **kw)


# ---------------------------------------------------------------------------
# simplex family
# ---------------------------------------------------------------------------

def test_simplex_fixes_second_coordinate_at_optimum():
    b = np.array([0.9, -0.5])
    p = gs.simplex_ls(np.eye(2), b)
    x = project_simplex(b)
    np.testing.assert_array_equal(x, [1.0, 0.0])
    rep = run(p, x)
    assert rep.newly_fixed == [(1, FIXED_ZERO)]
    assert rep.lhs[0] == pytest.approx(0.4)
    assert rep.rhs[0] == 0.0


def test_simplex_zero_gradient_fixes_nothing():
    b = np.array([0.2, 0.5, 0.3])
    assert run(gs.simplex_ls(np.eye(3), b), b).newly_fixed == []


def test_simplex_coincident_column_never_fixed():
    g = np.random.default_rng(30)
    a0, a1 = g.standard_normal(4), g.standard_normal(4)
    A = np.column_stack([a0, a1, 0.5 * (a0 + a1)])
    p = gs.simplex_ls(A, 3.0 * g.standard_normal(4))
    assert 2 not in run(p, np.array([0.5, 0.5, 0.0])).indices


def test_simplex_needs_strong_convexity():
    A = np.random.default_rng(31).standard_normal((5, 3))
    p = gs.Problem(gs.ColumnMatrix(A), gs.Logistic(), constraint=gs.Simplex())
    with pytest.raises(RuleUnavailableError):
        rule_for(p)
    it = Iterate(p, np.full(3, 1 / 3))
    with pytest.raises(RuleUnavailableError):
        screen_simplex(it, certify(p, it))


def test_sq_hinge_duplicate_columns_share_decisions():
    g = np.random.default_rng(32)
    X = g.standard_normal((12, 3))
    y = np.where(g.random(12) < 0.5, -1.0, 1.0)
    X += 1.5 * y[:, None]
    x_opt = solve_reference(gs.sq_hinge_svm(X, y)).x_ref
    j = int(np.argmin(x_opt))
    p = gs.sq_hinge_svm(np.vstack([X, X[j]]), np.append(y, y[j]))
    x_opt = solve_reference(p).x_ref
    hits = 0
    for eps in np.linspace(0.0, 0.5, 50):
        fixed = set(run(p, (1 - eps) * x_opt + eps * random_feasible(p, g)).indices)
        assert (j in fixed) == (12 in fixed)
        hits += j in fixed
    assert hits > 0


def test_sq_hinge_rejects_other_problems():
    p = gs.simplex_ls(np.eye(2), np.zeros(2))
    it = Iterate(p, np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="sq_hinge_svm"):
        screen_sq_hinge_svm(it, certify(p, it))


def test_sq_hinge_at_optimum_drops_non_support_vectors():
    p = make_instance("sq_hinge_svm", 4, 60, 30)
    ref = solve_reference(p)
    it = Iterate(p, ref.x_ref)
    margin = it.atw - float(it.atw @ ref.x_ref)
    fixed = set(screen_sq_hinge_svm(it, certify(p, it)).indices)
    assert fixed <= set(np.flatnonzero(margin > 0))
    assert set(np.flatnonzero(margin > 1e-3)) <= fixed


def test_meb_duplicate_points_share_decisions():
    g = np.random.default_rng(33)
    P = g.standard_normal((15, 2))
    P[9] = P[2]
    p = gs.meb(P)
    for _ in range(50):
        fixed = set(run(p, random_feasible(p, g)).indices)
        assert (2 in fixed) == (9 in fixed)


def test_meb_interior_point_screened():
    p = gs.meb(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.1]]))
    for x in ([0.5, 0.5, 0.0], [0.49, 0.49, 0.02]):
        assert run(p, np.array(x)).indices == [2]


def test_meb_equilateral_keeps_every_vertex():
    t = 2 * np.pi * np.arange(3) / 3
    p = gs.meb(np.column_stack([np.cos(t), np.sin(t)]))
    assert run(p, np.full(3, 1 / 3)).newly_fixed == []


def test_meb_rejects_other_losses():
    p = gs.simplex_ls(np.eye(2), np.zeros(2))
    it = Iterate(p, np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="meb"):
        screen_meb(it, certify(p, it))


# ---------------------------------------------------------------------------
# L1 and elastic-net balls
# ---------------------------------------------------------------------------

def test_l1_ball_at_optimum_matches_score_ordering():
    p = make_instance("l1_ls", 5, 80, 30)
    ref = solve_reference(p, target=1e-13)
    it = Iterate(p, ref.x_ref)
    cert = certify(p, it)
    s = np.abs(cert.scores)
    # the optimal image attains the most negative value of the support function
    assert float(it.ax @ it.w) == pytest.approx(-p.constraint.radius * s.max(), abs=1e-8)
    fixed = set(screen_l1_constrained(it, cert).indices)
    assert fixed <= set(np.flatnonzero(s < s.max()))
    assert set(np.flatnonzero(s < s.max() - 1e-3)) <= fixed


def test_l1_ball_zero_column_fixed():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    rep = run(gs.l1_ls(A, np.array([2.0, 0.0]), 1.0), np.array([1.0, 0.0]))
    assert rep.newly_fixed == [(1, FIXED_ZERO)]
    assert rep.lhs[0] == pytest.approx(-1.0)


def test_l1_ball_vacuous_at_large_gap():
    p = make_instance("l1_ls", 6, 60, 20)
    g = np.random.default_rng(34)
    for _ in range(20):
        it = Iterate(p, random_feasible(p, g))
        cert = certify(p, it)
        delta = cert.grad_radius
        s = np.abs(cert.scores)
        norms = p.A.col_norms()
        ax = np.linalg.norm(it.ax)
        vacuous = np.flatnonzero((norms + ax) * delta >= s.max())
        fixed = set(screen_l1_constrained(it, cert).indices)
        assert fixed.isdisjoint(vacuous)


def test_elastic_ball_at_alpha_one_is_the_l1_rule():
    g = np.random.default_rng(35)
    A, b = g.standard_normal((20, 10)) / np.sqrt(20), g.standard_normal(20) / np.sqrt(20)
    p1, pe = gs.l1_ls(A, b, 0.8), gs.elastic_ball_ls(A, b, 1.0, 0.8)
    x_opt = solve_reference(p1).x_ref
    fired = 0
    for eps in np.linspace(0.0, 0.3, 30):
        x = (1 - eps) * x_opt + eps * random_feasible(p1, g)
        r1, re = run(p1, x), run(pe, x)
        assert r1.newly_fixed == re.newly_fixed
        np.testing.assert_array_equal(r1.lhs, re.lhs)
        fired += len(r1.newly_fixed)
    assert fired > 0


def test_elastic_ball_factor():
    assert elastic_ball_factor(0.5, mode="unit_norm") == pytest.approx(0.4)
    assert elastic_ball_factor(1.0) == pytest.approx(1.0)
    C = gs.ElasticNetBall(0.5, 2.0)
    assert elastic_ball_factor(0.5, 2.0) == pytest.approx(0.5 / (4.0 - 0.5 * C.max_norm()))
    with pytest.raises(ValueError):
        elastic_ball_factor(0.5, 2.0, mode="unit_norm")
    with pytest.raises(ValueError):
        elastic_ball_factor(0.5, mode="loose")


@pytest.mark.parametrize("seed", range(3))
def test_elastic_ball_safe_near_optimum(seed):
    p = make_instance("elastic_ball_ls", seed, 80, 30)
    ref = solve_reference(p)
    g = np.random.default_rng(36 + seed)
    for eps in (0.0, 1e-6, 1e-4, 1e-2):
        x = (1 - eps) * ref.x_ref + eps * random_feasible(p, g)
        for i in run(p, x).indices:
            assert abs(ref.x_ref[i]) <= 1e-8


def test_elastic_ball_explicit_factor():
    p = make_instance("elastic_ball_ls", 1, 40, 16)
    x = random_feasible(p, np.random.default_rng(37))
    it = Iterate(p, x)
    cert = certify(p, it)
    a = screen_elastic_constrained(it, cert)
    b = screen_elastic_constrained(it, cert, factor=elastic_ball_factor(p.constraint.alpha,
                                                                         p.constraint.scale))
    assert a.newly_fixed == b.newly_fixed


# ---------------------------------------------------------------------------
# box family
# ---------------------------------------------------------------------------

def _box_ls(A, b, C=1.0):
    return gs.Problem(gs.ColumnMatrix(A), gs.SquaredError(b), constraint=gs.Box(C))


def test_box_zero_column_never_fixed():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    g = np.random.default_rng(38)
    p = _box_ls(A, np.array([0.3, 5.0]))
    for _ in range(20):
        assert 1 not in run(p, g.random(2)).indices


def test_box_at_zero_gap_splits_by_score_sign():
    p = _box_ls(np.eye(3), np.array([0.5, 2.0, -1.0]))
    rep = run(p, np.array([0.5, 1.0, 0.0]))
    assert sorted(rep.newly_fixed) == [(1, FIXED_UPPER), (2, FIXED_ZERO)]


def test_hinge_improved_dominates():
    g = np.random.default_rng(39)
    for seed in range(5):
        p = make_instance("box_svm_hinge", 2 * seed, 60, 30)
        for _ in range(10):
            it = Iterate(p, random_feasible(p, g))
            cert = certify(p, it)
            plain = set(screen_hinge_svm(it, cert, improved=False).newly_fixed)
            better = set(screen_hinge_svm(it, cert, improved=True).newly_fixed)
            assert plain <= better


def test_hinge_saturated_and_free_points_match_reference():
    p = make_instance("box_svm_hinge", 0, 60, 30)
    ref = solve_reference(p)
    it = Iterate(p, ref.x_ref)
    rep = screen_hinge_svm(it, certify(p, it))
    assert rep.newly_fixed
    C = p.constraint.upper
    for i, st in rep.newly_fixed:
        assert abs(ref.x_ref[i] - (C if st == FIXED_UPPER else 0.0)) <= 1e-8


def test_hinge_zero_sample_never_fixed():
    X = np.array([[1.0, 0.5], [0.0, 0.0], [-0.3, 1.0]])
    p = gs.box_svm_hinge(X, np.array([1.0, 1.0, -1.0]), C=1.0)
    g = np.random.default_rng(40)
    for _ in range(20):
        it = Iterate(p, random_feasible(p, g))
        cert = certify(p, it)
        # a zero sample enters with the -1 of the linear term only; its
        # score a_i^T A x stays 0 against a zero radius term
        assert cert.scores[1] == pytest.approx(-1.0)
        rep = screen_box(it, dataclasses.replace(cert, scores=cert.scores - p.linear))
        assert 1 not in rep.indices


def test_hinge_rejects_other_losses():
    p = _box_ls(np.eye(2), np.zeros(2))
    it = Iterate(p, np.zeros(2))
    with pytest.raises(ValueError, match="hinge_svm"):
        screen_hinge_svm(it, certify(p, it))


# ---------------------------------------------------------------------------
# penalized rules
# ---------------------------------------------------------------------------

def test_lasso_at_zero_above_lambda_max_fixes_everything():
    g = np.random.default_rng(41)
    A, b = g.standard_normal((20, 8)), g.standard_normal(20)
    corr = np.abs(A.T @ b)
    p = gs.lasso(A, b, 1.01 * corr.max())
    rep = run(p, np.zeros(8))
    assert rep.indices == list(range(8))
    np.testing.assert_allclose(rep.lhs, corr)


def test_lasso_vacuous_when_radius_exceeds_lambda():
    p = make_instance("lasso", 2, 40, 16)
    x = 50.0 * np.random.default_rng(42).standard_normal(16)
    it = Iterate(p, x)
    cert = certify(p, it)
    assert cert.dual_radius * p.A.col_norms().min() >= p.penalty.lam
    assert screen_l1_penalized(it, cert).newly_fixed == []


def test_logistic_rule_uses_sigmoid_scores():
    p = make_instance("logistic_l1", 3, 60, 20)
    x = 0.1 * np.random.default_rng(43).standard_normal(p.n)
    it = Iterate(p, x)
    cert = certify(p, it)
    y = p.A.matvec(x)
    w = np.exp(y) / (np.exp(y) + 1.0)
    s = cert.dual_scale * (p.A.toarray().T @ w)
    expected = np.abs(s) < p.penalty.lam - p.A.col_norms() * np.sqrt(2.0 * cert.duality_gap)
    assert screen_l1_penalized(it, cert).indices == list(np.flatnonzero(expected))


def test_elastic_net_without_ridge_is_the_lasso_rule():
    p = make_instance("lasso", 4, 60, 24)
    q = gs.elastic_net(p.A, p.loss.b, p.penalty.lam, 0.0)
    g = np.random.default_rng(44)
    for _ in range(20):
        x = 0.3 * g.standard_normal(24) * (g.random(24) < 0.3)
        a, b = run(p, x), run(q, x)
        assert a.newly_fixed == b.newly_fixed
        np.testing.assert_allclose(a.rhs, b.rhs, rtol=1e-14)


def test_elastic_net_unit_form_at_optimum():
    g = np.random.default_rng(45)
    A = g.standard_normal((40, 20)) / np.sqrt(40)
    b = g.standard_normal(40) / np.sqrt(40)
    alpha = 0.5 * float(np.max(np.abs(A.T @ b)))
    p = gs.elastic_net(A, b, alpha=alpha)
    ref = solve_reference(p)
    it = Iterate(p, ref.x_ref)
    cert = certify(p, it)
    s = np.abs(cert.scores)
    fixed = set(screen_elastic_penalized(it, cert).indices)
    assert fixed <= set(np.flatnonzero(s < alpha))
    assert set(np.flatnonzero(s < alpha - 1e-4)) <= fixed
    assert all(abs(ref.x_ref[i]) <= 1e-8 for i in fixed)


def test_elastic_regression_form_needs_squared_loss():
    A = np.random.default_rng(46).standard_normal((5, 3))
    p = gs.Problem(gs.ColumnMatrix(A), gs.Logistic(), penalty=gs.ElasticNet(0.5, 0.1))
    it = Iterate(p, np.zeros(3))
    with pytest.raises(ValueError, match="squared-error"):
        screen_elastic_penalized(it, certify(p, it))


def test_group_orthonormal_block_soft_threshold():
    b = np.array([0.3, -0.4, 3.0, 4.0])
    lam = 1.0
    p = gs.group_lasso(np.eye(4), b, lam, [2, 2])
    # both groups below threshold at x = 0 with a tiny b
    small = gs.group_lasso(np.eye(4), 0.1 * b, lam, [2, 2])
    assert run(small, np.zeros(4)).indices == [0, 1, 2, 3]
    # at the closed-form optimum only the weak group is fixed
    x = np.zeros(4)
    x[2:] = (1.0 - lam * np.sqrt(2.0) / 5.0) * b[2:]
    assert duality_gap(p, Iterate(p, x)) == pytest.approx(0.0, abs=1e-14)
    assert run(p, x).indices == [0, 1]


def test_singleton_groups_reproduce_the_lasso_rule():
    p = make_instance("lasso", 5, 50, 20)
    lam = p.penalty.lam
    q = gs.group_lasso(p.A, p.loss.b, 1.0, [1] * 20, rho=np.full(20, lam ** 2))
    g = np.random.default_rng(47)
    x_opt = solve_reference(p).x_ref
    fired = 0
    for eps in np.linspace(0.0, 0.2, 20):
        x = x_opt + eps * g.standard_normal(20)
        a, b = run(p, x), run(q, x)
        assert a.indices == b.indices
        fired += len(a.indices)
    assert fired > 0


def test_group_fixes_whole_groups():
    p = make_instance("group_lasso", 6, 60, 24)
    g = np.random.default_rng(48)
    lookup = p.penalty.layout.lookup
    for _ in range(20):
        fixed = set(run(p, 0.1 * g.standard_normal(24)).indices)
        for grp in set(lookup[list(fixed)]):
            assert set(np.flatnonzero(lookup == grp)) <= fixed


# ---------------------------------------------------------------------------
# conservatism, consistency, masks
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ALL_KINDS)
def test_every_rule_is_silent_at_huge_radius(kind):
    p = make_instance(kind, 7, 50, 20)
    g = np.random.default_rng(49)
    rule = rule_for(p)
    for _ in range(10):
        it = Iterate(p, random_feasible(p, g))
        cert = certify(p, it)
        huge = dataclasses.replace(cert, duality_gap=1e12, dual_radius=1e6, image_radius=1e6,
                                   grad_radius=1e6)
        assert rule(it, huge).newly_fixed == []


def _embedded(p, mask, x_view):
    return p.embed(x_view, mask.active_to_original, mask.fixed_upper_indices)


@pytest.mark.parametrize("kind", ["simplex_ls", "l1_ls", "box_svm_hinge", "meb", "lasso",
                                  "elastic_net", "group_lasso", "logistic_l1"])
def test_view_and_full_problem_agree(kind):
    p = make_instance(kind, 9, 60, 24)
    ref = solve_reference(p)
    rule = rule_for(p)
    g = np.random.default_rng(50)
    checked = 0
    for eps in (1e-8, 1e-5, 1e-3):
        x = ref.x_ref.copy()
        if p.is_constrained:
            x = (1 - eps) * x + eps * random_feasible(p, g)
        else:
            x = x + eps * g.standard_normal(p.n)
        full = rule(Iterate(p, x), certify(p, Iterate(p, x)))
        if not full.newly_fixed:
            continue
        # commit part of the firings; whole groups for the group penalty
        lookup = p.penalty.layout.lookup if kind == "group_lasso" else np.arange(p.n)
        first = [f for f in full.newly_fixed if lookup[f[0]] % 2 == 0]
        mask = ScreenMask(p.n, p.upper)
        mask.commit(first)
        view = apply_mask(mask, p)
        xv = x[mask.active_to_original]
        xe = _embedded(p, mask, xv)
        it_v, it_f = Iterate(view, xv), Iterate(p, xe)
        assert view.value(xv) == pytest.approx(p.value(xe), rel=1e-12, abs=1e-12)
        assert duality_gap(view, it_v) == pytest.approx(duality_gap(p, it_f), abs=1e-10)
        on_view = rule(it_v, certify(view, it_v), mask)
        on_full = rule(it_f, certify(p, it_f))
        already = {i for i, _ in first}
        assert on_view.newly_fixed == [f for f in on_full.newly_fixed if f[0] not in already]
        checked += 1
    assert checked > 0


def test_box_fixed_upper_view_value_identity():
    p = make_instance("box_svm_hinge", 1, 60, 30)
    g = np.random.default_rng(51)
    mask = ScreenMask(p.n, p.upper)
    mask.commit([(0, FIXED_UPPER), (3, FIXED_UPPER), (4, FIXED_ZERO), (7, FIXED_UPPER)])
    view = apply_mask(mask, p)
    assert view.n == p.n - 4
    z = np.zeros(p.n)
    z[[0, 3, 7]] = p.upper
    np.testing.assert_allclose(mask.fixed_offset(p.A), p.A.matvec(z))
    for _ in range(10):
        xv = g.random(view.n) * p.upper
        assert view.value(xv) == pytest.approx(p.value(_embedded(p, mask, xv)), rel=1e-13)


def test_apply_mask_identity_and_exhaustion():
    p = make_instance("lasso", 0, 30, 6)
    mask = ScreenMask(6)
    assert apply_mask(mask, p) is p
    mask.commit([(i, FIXED_ZERO) for i in range(6)])
    assert apply_mask(mask, p) is None


def test_mask_commit_is_permanent_and_checked():
    mask = ScreenMask(5, upper=2.0)
    assert mask.commit([]) == 0
    assert mask.commit([(1, FIXED_ZERO), (3, FIXED_UPPER)]) == 2
    np.testing.assert_array_equal(mask.active_to_original, [0, 2, 4])
    assert (mask.n_active, mask.n_fixed_zero, mask.n_fixed_upper) == (3, 1, 1)
    with pytest.raises(ValueError, match="already fixed"):
        mask.commit([(1, FIXED_UPPER)])
    with pytest.raises(ValueError, match="twice"):
        mask.commit([(0, FIXED_ZERO), (0, FIXED_ZERO)])
    assert mask.status[0] == ACTIVE
    with pytest.raises(ValueError, match="invalid status"):
        mask.commit([(0, 7)])
    with pytest.raises(ValueError, match="upper bound"):
        ScreenMask(3).commit([(0, FIXED_UPPER)])
    other = mask.copy()
    other.commit([(0, FIXED_ZERO)])
    assert mask.n_active == 3 and other.n_active == 2


def test_report_indices_are_original_under_a_mask():
    b = np.array([0.9, -0.5, -0.7, 0.4])
    p = gs.simplex_ls(np.eye(4), b)
    mask = ScreenMask(4)
    mask.commit([(0, FIXED_ZERO)])
    view = apply_mask(mask, p)
    x = project_simplex(b[1:])
    rep = run(view, x, mask=mask)
    assert set(rep.indices) <= {1, 2, 3} and rep.indices


def test_report_csv():
    rep = RuleReport("lasso", 20, [(3, FIXED_ZERO), (5, FIXED_UPPER)], [0.1, -0.2], [0.5, 0.3])
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER)
    assert lines[1] == "lasso,20,3,fixed_zero,0.1,0.5"
    assert lines[2] == "lasso,20,5,fixed_upper,-0.2,0.3"
    assert rep.to_csv(header=False).splitlines() == lines[1:]
    assert rep.indices == [3, 5]


def test_tau_and_loosen_move_the_threshold():
    b = np.array([0.9, -0.5])
    p = gs.simplex_ls(np.eye(2), b)
    x = np.array([1.0, 0.0])
    assert run(p, x, tau=0.39).indices == [1]
    assert run(p, x, tau=0.41).indices == []
    assert run(p, x, loosen=0.5).indices == [0, 1]
