import numpy as np
import pytest

import gapscreen as gs
from gapscreen.data_io import SyntheticSpec, synth_regression
from gapscreen.geometry import membership
from gapscreen.reference import solve_reference
from gapscreen.screening import FIXED_UPPER
from gapscreen.solvers import (TRACE_HEADER, SolverConfig, coordinate_descent_box, frank_wolfe,
                               pairwise_frank_wolfe, proximal_gradient, solve)
from instances import CONSTRAINED, REGRESSION, make_instance


def desk_l1(seed, noise=0.0):
    ds, xt = synth_regression(SyntheticSpec(300, 60, 7, noise, seed))
    return gs.l1_ls(ds.X, ds.y, 3.5), xt


def test_single_vertex_simplex_needs_no_iterations():
    p = gs.simplex_ls(np.array([[1.0], [2.0]]), np.array([0.0, 1.0]))
    res = solve(p)
    assert res.n_iter == 0 and res.converged
    assert res.gap == 0.0
    np.testing.assert_array_equal(res.x, [1.0])


@pytest.mark.parametrize("seed", range(3))
def test_desk_scale_l1_ball_matches_reference(seed):
    p, _ = desk_l1(seed)
    ref = solve_reference(p)
    res = pairwise_frank_wolfe(p, SolverConfig(gap_tol=1e-12, max_iter=200000))
    assert res.converged
    assert np.max(np.abs(res.x - ref.x_ref)) <= 1e-5


@pytest.mark.parametrize("kind", REGRESSION + ("box_svm_hinge", "sq_hinge_svm", "meb",
                                               "logistic_l1"))
def test_screening_does_not_change_the_limit(kind):
    p = make_instance(kind, 11, 80, 32)
    on = solve(p, SolverConfig(gap_tol=1e-10))
    off = solve(p, SolverConfig(gap_tol=1e-10, screening_enabled=False))
    assert on.converged and off.converged
    assert on.primal == pytest.approx(off.primal, abs=1e-9)


def test_large_lambda_lasso_screens_everything_at_once():
    g = np.random.default_rng(60)
    A, b = g.standard_normal((30, 12)), g.standard_normal(30)
    p = gs.lasso(A, b, 1.01 * np.max(np.abs(A.T @ b)))
    res = proximal_gradient(p)
    assert res.n_iter == 0 and res.converged
    np.testing.assert_array_equal(res.x, np.zeros(12))
    assert len(res.reports) == 1 and res.reports[0].iteration == 0
    assert res.mask.n_active == 0


def test_group_lasso_drops_weak_groups_before_convergence():
    g = np.random.default_rng(61)
    A = g.standard_normal((80, 20)) / np.sqrt(80)
    xt = np.zeros(20)
    xt[:4] = [3.0, -2.0, 2.5, 1.0]
    b = A @ xt + 0.01 * g.standard_normal(80)
    p = gs.group_lasso(A, b, 0.05, [4] * 5)
    res = proximal_gradient(p, SolverConfig(gap_tol=1e-10))
    assert res.converged
    fixed = {i for rep in res.reports for i in rep.indices}
    assert fixed == set(range(4, 20))
    ks = res.trace.column("iter")
    assert res.reports[-1].iteration < ks[-1]


def test_elastic_net_trace_tends_to_the_lasso_trace():
    p = make_instance("lasso", 12, 60, 24)
    cfg = SolverConfig(gap_tol=1e-9)
    lasso = proximal_gradient(p, cfg)
    enet = proximal_gradient(gs.elastic_net(p.A, p.loss.b, p.penalty.lam, 1e-14), cfg)
    assert len(lasso.trace) == len(enet.trace)
    for name in ("iter", "n_active"):
        np.testing.assert_array_equal(lasso.trace.column(name), enet.trace.column(name))
    np.testing.assert_allclose(enet.trace.column("primal"), lasso.trace.column("primal"),
                               atol=1e-8)
    np.testing.assert_allclose(enet.trace.column("gap"), lasso.trace.column("gap"), atol=1e-8)


def test_box_with_loose_bound_is_least_squares():
    g = np.random.default_rng(62)
    A = g.standard_normal((30, 6))
    x_ls = np.abs(g.standard_normal(6)) + 0.5
    b = A @ x_ls
    p = gs.Problem(gs.ColumnMatrix(A), gs.SquaredError(b), constraint=gs.Box(1e6))
    res = coordinate_descent_box(p, SolverConfig(gap_tol=1e-12, max_iter=100000))
    assert res.converged
    np.testing.assert_allclose(res.x, x_ls, atol=1e-6)


def test_separable_svm_saturated_set_matches_screening():
    g = np.random.default_rng(63)
    X = np.vstack([g.standard_normal((15, 2)) + [2.0, 2.0],
                   g.standard_normal((15, 2)) - [2.0, 2.0]])
    y = np.repeat([1.0, -1.0], 15)
    p = gs.box_svm_hinge(X, y, C=0.5)
    ref = solve_reference(p)
    res = coordinate_descent_box(p, SolverConfig(gap_tol=1e-10))
    assert res.converged
    saturated = set(np.flatnonzero(ref.x_ref >= 0.5 - 1e-8))
    upper = set(np.flatnonzero(res.mask.status == FIXED_UPPER))
    assert upper == saturated
    np.testing.assert_allclose(res.x, ref.x_ref, atol=1e-5)


def test_single_variable_box_solved_in_one_sweep():
    p = gs.Problem(gs.ColumnMatrix(np.array([[2.0]])), gs.SquaredError([3.0]),
                   constraint=gs.Box(1.0))
    res = coordinate_descent_box(p, SolverConfig(screening_enabled=False))
    assert res.n_iter == 1 and res.converged
    np.testing.assert_array_equal(res.x, [1.0])


@pytest.mark.parametrize("kind", ["l1_ls", "lasso", "box_svm_hinge"])
def test_disabled_screening_is_deterministic(kind):
    p = make_instance(kind, 13, 60, 24)
    cfg = SolverConfig(screening_enabled=False, seed=3)
    a, b = solve(p, cfg), solve(p, cfg)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.trace.to_csv(include_elapsed=False) == b.trace.to_csv(include_elapsed=False)
    assert a.mask.n_active == p.n and a.reports == []


@pytest.mark.parametrize("kind", ["l1_ls", "lasso", "group_lasso", "box_svm_hinge"])
def test_period_one_screens_at_least_as_early(kind):
    p = make_instance(kind, 14, 80, 32)
    r1 = solve(p, SolverConfig(screening_period=1, gap_tol=1e-10))
    r10 = solve(p, SolverConfig(screening_period=10, gap_tol=1e-10))
    assert r1.primal == pytest.approx(r10.primal, abs=1e-9)

    def fixed_by(res, k):
        return {i for rep in res.reports if rep.iteration <= k for i in rep.indices}

    for rep in r10.reports:
        assert fixed_by(r10, rep.iteration) <= fixed_by(r1, rep.iteration)
    assert fixed_by(r10, 10 ** 9) == fixed_by(r1, 10 ** 9)


def test_all_fixed_termination_back_fills():
    p = gs.box_svm_hinge(np.array([[3.0, 0.0], [0.0, 3.0], [0.1, 0.0]]),
                         np.array([1.0, 1.0, 1.0]), C=0.05)
    res = coordinate_descent_box(p, SolverConfig(screening_period=1))
    assert res.converged and res.mask.n_active == 0
    np.testing.assert_array_equal(res.x, [0.05, 0.05, 0.05])
    assert res.trace.column("n_active")[-1] == 0


@pytest.mark.parametrize("kind", CONSTRAINED[:3] + ("sq_hinge_svm", "meb"))
def test_frank_wolfe_iterates_stay_feasible(kind):
    p = make_instance(kind, 15, 60, 24)
    seen = []

    def check(k, weights, cert):
        seen.append(k)

    res = pairwise_frank_wolfe(p, SolverConfig(gap_tol=1e-9), callback=check)
    assert membership(p.constraint, res.x)
    assert seen
    for k in range(5, 200, 37):
        part = pairwise_frank_wolfe(p, SolverConfig(max_iter=k))
        assert membership(p.constraint, part.x)


def test_vanilla_frank_wolfe_on_elastic_ball():
    p = make_instance("elastic_ball_ls", 3, 80, 30)
    ref = solve_reference(p)
    res = frank_wolfe(p, SolverConfig(gap_tol=1e-7, max_iter=200000))
    assert res.converged
    assert membership(p.constraint, res.x)
    assert p.value(res.x) - p.value(ref.x_ref) <= 1e-7


@pytest.mark.parametrize("kind", ["lasso", "elastic_net", "group_lasso", "logistic_l1"])
def test_proximal_gradient_descends(kind):
    p = make_instance(kind, 16, 60, 24)
    values = [p.value(proximal_gradient(p, SolverConfig(max_iter=k,
                                                        screening_enabled=False)).x)
              for k in range(0, 60, 3)]
    assert all(b <= a + 1e-10 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("kind", REGRESSION + ("box_svm_hinge", "meb"))
def test_active_count_never_grows(kind):
    res = solve(make_instance(kind, 17, 80, 32), SolverConfig(gap_tol=1e-9))
    n_active = res.trace.column("n_active")
    assert np.all(np.diff(n_active) <= 0)


def test_trace_layout():
    res = solve(make_instance("l1_ls", 0, 60, 20), SolverConfig(gap_tol=1e-8))
    lines = res.trace.to_csv().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(lines) == len(res.trace) + 1
    ks = res.trace.column("iter")
    assert ks[0] == 0 and np.all(np.diff(ks) > 0)
    assert all(k % 25 == 0 or k % 10 == 0 or k == ks[-1] for k in ks)
    short = res.trace.to_csv(include_elapsed=False).splitlines()[0]
    assert "elapsed_ms" not in short


def test_penalized_trace_has_no_wolfe_gap():
    res = solve(make_instance("lasso", 0, 40, 16))
    assert np.all(np.isnan(res.trace.column("wolfe_gap")))


def test_solver_config_validation():
    for bad in (dict(gap_tol=0.0), dict(screening_period=0), dict(algorithm="newton"),
                dict(trace_every=0), dict(max_iter=-1), dict(safety_slack=-1.0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_solver_rejects_mismatched_problems():
    with pytest.raises(ValueError):
        proximal_gradient(make_instance("l1_ls", 0, 20, 8))
    with pytest.raises(ValueError):
        coordinate_descent_box(make_instance("simplex_ls", 0, 20, 8))


def test_logistic_constrained_fails_before_iterating():
    A = np.random.default_rng(64).standard_normal((6, 3))
    p = gs.Problem(gs.ColumnMatrix(A), gs.Logistic(), constraint=gs.Simplex())
    with pytest.raises(gs.gaps.RuleUnavailableError):
        solve(p)
    res = solve(p, SolverConfig(screening_enabled=False, gap_tol=1e-6))
    assert res.converged


def test_screening_speeds_up_a_large_instance():
    # at this size the removed column work outweighs per-iteration overhead
    import time
    ds, _ = synth_regression(SyntheticSpec(3000, 600, 70, 0.0, 0))
    p = gs.l1_ls(ds.X, ds.y, 35.0)
    times = {}
    for flag in (True, False):
        t0 = time.perf_counter()
        res = pairwise_frank_wolfe(p, SolverConfig(screening_enabled=flag))
        times[flag] = time.perf_counter() - t0
        assert res.converged
    assert times[True] < times[False]
