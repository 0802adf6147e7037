import numpy as np
import pytest

from obstaclecontrol.assembly import vector_norm
from obstaclecontrol.newton import (
    NewtonConfig,
    newton_step_matrix_apply,
    run,
    solve_newton_system,
    solve_newton_system_cg,
)
from obstaclecontrol.operators import DerivativeSelector

from conftest import mesh_and_mats

PAPER_Y_D = lambda x1, x2: -x1 - x2
PAPER_PSI = lambda x1, x2: np.full_like(x1, -5.0)


def all_constrained(mats):
    return DerivativeSelector.from_node_set(np.arange(mats.interior.size), mats)


def unconstrained(mats):
    return DerivativeSelector.from_node_set(np.array([], dtype=int), mats)


def test_apply_identity_when_fully_constrained(rng):
    mesh, mats = mesh_and_mats(4)
    y = rng.standard_normal(mesh.num_nodes)
    out = newton_step_matrix_apply(y, all_constrained(mats), 1e-5, mats)
    assert np.array_equal(out, y)


def test_apply_constant_against_dense_composition():
    mesh, mats = mesh_and_mats(4)
    alpha = 1e-2
    sel = unconstrained(mats)
    c = 3.0
    y = np.full(mesh.num_nodes, c)
    out = newton_step_matrix_apply(y, sel, alpha, mats)
    # dense composition of the three solves
    import numpy.linalg as la

    a_dense = mats.A.toarray()
    m_dense = mats.M.toarray()
    p = la.solve(a_dense, m_dense)
    k_int = mats.K_int.toarray()
    ext = np.zeros((mesh.num_nodes, mats.interior.size))
    ext[mats.interior, np.arange(mats.interior.size)] = 1.0
    dense_op = (
        np.eye(mesh.num_nodes)
        + (p @ ext @ la.solve(k_int, m_dense[mats.interior] @ p)) / alpha
    )
    assert np.allclose(out, dense_op @ y, atol=1e-9)


def test_apply_linearity(rng):
    mesh, mats = mesh_and_mats(8)
    sel = DerivativeSelector.from_node_set(np.arange(0, 20), mats)
    y1 = rng.standard_normal(mesh.num_nodes)
    y2 = rng.standard_normal(mesh.num_nodes)
    lhs = newton_step_matrix_apply(y1 + y2, sel, 1e-3, mats)
    rhs = newton_step_matrix_apply(y1, sel, 1e-3, mats) + newton_step_matrix_apply(
        y2, sel, 1e-3, mats
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (1.0 + np.max(np.abs(lhs)))


def test_solve_fully_constrained_returns_rhs(rng):
    mesh, mats = mesh_and_mats(4)
    rhs = rng.standard_normal(mesh.num_nodes)
    assert np.array_equal(solve_newton_system(rhs, all_constrained(mats), 1e-5, mats), rhs)


def test_solve_matches_dense_probe(rng):
    mesh, mats = mesh_and_mats(4)
    alpha = 1e-3
    sel = unconstrained(mats)
    nw = mesh.num_nodes
    dense = np.empty((nw, nw))
    for k in range(nw):
        e = np.zeros(nw)
        e[k] = 1.0
        dense[:, k] = newton_step_matrix_apply(e, sel, alpha, mats)
    rhs = rng.standard_normal(nw)
    y = solve_newton_system(rhs, sel, alpha, mats)
    expected = np.linalg.solve(dense, rhs)
    assert np.linalg.norm(y - expected) <= 1e-8 * np.linalg.norm(expected)


def test_solve_residual_in_m_norm(rng):
    mesh, mats = mesh_and_mats(8)
    alpha = 1e-5
    m = mats.interior.size
    sel = DerivativeSelector.from_node_set(np.flatnonzero(rng.random(m) < 0.3), mats)
    rhs = rng.standard_normal(mesh.num_nodes)
    y = solve_newton_system(rhs, sel, alpha, mats)
    resid = newton_step_matrix_apply(y, sel, alpha, mats) - rhs
    rel = vector_norm(resid, "L2", mats.K, mats.M) / vector_norm(rhs, "L2", mats.K, mats.M)
    assert rel <= 5e-10


def test_contraction_bound(rng):
    mesh, mats = mesh_and_mats(8)
    m = mats.interior.size
    for _ in range(20):
        sel = DerivativeSelector.from_node_set(
            np.flatnonzero(rng.random(m) < rng.uniform(0, 1)), mats
        )
        rhs = rng.uniform(-10, 10, mesh.num_nodes)
        y = solve_newton_system(rhs, sel, 1e-5, mats)
        assert vector_norm(y, "L2", mats.K, mats.M) <= (1 + 1e-9) * vector_norm(
            rhs, "L2", mats.K, mats.M
        )


def test_cg_cross_check(rng):
    for n in (8, 16):
        mesh, mats = mesh_and_mats(n)
        m = mats.interior.size
        sel = DerivativeSelector.from_node_set(np.flatnonzero(rng.random(m) < 0.4), mats)
        rhs = rng.standard_normal(mesh.num_nodes)
        direct = solve_newton_system(rhs, sel, 1e-5, mats)
        iterative = solve_newton_system_cg(rhs, sel, 1e-5, mats)
        diff = vector_norm(direct - iterative, "L2", mats.K, mats.M)
        assert diff <= 5e-9 * vector_norm(direct, "L2", mats.K, mats.M)


def test_paper_run_n16():
    mesh, mats = mesh_and_mats(16)
    config = NewtonConfig(alpha=1e-5, tol=1e-7)
    report = run(config, PAPER_Y_D, PAPER_PSI, mesh, mats)
    assert report.status == "converged"
    assert abs(report.iterations - 6) <= 1
    assert report.residuals[-1] <= 1e-7
    assert len(report.history) == report.iterations + 1


def test_unconstrained_problem_converges_fast():
    mesh, mats = mesh_and_mats(8)
    config = NewtonConfig(alpha=1e-5, tol=1e-7)
    report = run(config, PAPER_Y_D, lambda x1, x2: np.full_like(x1, -1e9), mesh, mats)
    assert report.status == "converged"
    assert report.iterations <= 2
    # the constraint never bites, so the final control solves the linear system
    assert report.final_solution.strictly_active.size == 0
    assert report.final_solution.biactive.size == 0


def test_infinite_tol_stops_at_iteration_zero():
    mesh, mats = mesh_and_mats(8)
    config = NewtonConfig(alpha=1e-5, tol=np.inf)
    report = run(config, PAPER_Y_D, PAPER_PSI, mesh, mats)
    assert report.status == "converged"
    assert report.iterations == 0
    assert len(report.history) == 1


def test_max_iter_reached_is_reported_not_raised():
    mesh, mats = mesh_and_mats(8)
    config = NewtonConfig(alpha=1e-5, tol=0.0, max_iter=2)
    report = run(config, PAPER_Y_D, PAPER_PSI, mesh, mats)
    assert report.status == "max_iter_reached"
    assert len(report.history) == 3


def test_fixed_point_consistency():
    mesh, mats = mesh_and_mats(16)
    config = NewtonConfig(alpha=1e-5, tol=1e-7)
    report = run(config, PAPER_Y_D, PAPER_PSI, mesh, mats)
    rerun = NewtonConfig(alpha=1e-5, tol=1e-7, y0_policy="custom", y0_custom=report.y)
    second = run(rerun, PAPER_Y_D, PAPER_PSI, mesh, mats)
    assert second.status == "converged"
    assert second.iterations == 0


def test_superlinear_tail_n16():
    mesh, mats = mesh_and_mats(16)
    config = NewtonConfig(alpha=1e-5, tol=1e-7)
    report = run(config, PAPER_Y_D, PAPER_PSI, mesh, mats)
    r = report.residuals
    assert r[-1] / r[-2] <= 0.05
    assert r[-1] / r[-2] < r[-2] / r[-3]


def test_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(alpha=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(alpha=1.0, tol=-1.0)
    with pytest.raises(ValueError):
        NewtonConfig(alpha=1.0, max_iter=0)
    with pytest.raises(ValueError):
        NewtonConfig(alpha=1.0, selector_policy="bogus")


def test_selector_policies_reach_same_solution():
    mesh, mats = mesh_and_mats(16)
    base = NewtonConfig(alpha=1e-5, tol=1e-7)
    alt = NewtonConfig(alpha=1e-5, tol=1e-7, selector_policy="strict_plus_biactive")
    r1 = run(base, PAPER_Y_D, PAPER_PSI, mesh, mats)
    r2 = run(alt, PAPER_Y_D, PAPER_PSI, mesh, mats)
    diff = vector_norm(r1.y - r2.y, "L2", mats.K, mats.M)
    assert diff <= 1e-6
