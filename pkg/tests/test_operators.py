import numpy as np
import pytest

from obstaclecontrol.assembly import SPACE_W, NodalFunction, interpolate
from obstaclecontrol.obstacle import solve_obstacle
from obstaclecontrol.operators import (
    DerivativeSelector,
    apply_G,
    apply_P,
    extend_interior,
)

from conftest import mesh_and_mats


def test_p_fixes_constants():
    mesh, mats = mesh_and_mats(8)
    for c in (1.0, -3.5):
        u = np.full(mesh.num_nodes, c)
        assert np.max(np.abs(apply_P(u, mats) - c)) < 1e-10


def test_p_self_adjoint_in_l2(rng):
    mesh, mats = mesh_and_mats(8)
    for _ in range(8):
        u = rng.standard_normal(mesh.num_nodes)
        v = rng.standard_normal(mesh.num_nodes)
        lhs = u @ (mats.M @ apply_P(v, mats))
        rhs = apply_P(u, mats) @ (mats.M @ v)
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_p_of_desired_state_solves_helmholtz():
    mesh, mats = mesh_and_mats(8)
    y_d = interpolate(lambda x1, x2: -x1 - x2, mesh).values
    y = apply_P(y_d, mats)
    assert np.linalg.norm(mats.A @ y - mats.M @ y_d) < 1e-10


def test_g_all_constrained_vanishes(rng):
    mesh, mats = mesh_and_mats(4)
    sel = DerivativeSelector.from_node_set(np.arange(mats.interior.size), mats)
    w = apply_G(sel, rng.standard_normal(mesh.num_nodes), mats)
    assert np.max(np.abs(w)) == 0.0


def test_g_unconstrained_is_dirichlet_solve(rng):
    mesh, mats = mesh_and_mats(4)
    sel = DerivativeSelector.from_node_set(np.array([], dtype=int), mats)
    a = rng.standard_normal(mesh.num_nodes)
    w = apply_G(sel, a, mats)
    load = (mats.M @ a)[mats.interior]
    assert np.linalg.norm(mats.K_int @ w - load) < 1e-10


def test_g_self_adjoint_in_l2(rng):
    mesh, mats = mesh_and_mats(8)
    m = mats.interior.size
    sel = DerivativeSelector.from_node_set(np.flatnonzero(rng.random(m) < 0.3), mats)
    for _ in range(5):
        a = rng.standard_normal(mesh.num_nodes)
        b = rng.standard_normal(mesh.num_nodes)
        ga = extend_interior(apply_G(sel, a, mats), mats)
        gb = extend_interior(apply_G(sel, b, mats), mats)
        lhs = ga @ (mats.M @ b)
        rhs = a @ (mats.M @ gb)
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_g_pairing_nonnegative(rng):
    mesh, mats = mesh_and_mats(8)
    m = mats.interior.size
    for _ in range(100):
        a = rng.uniform(-10, 10, mesh.num_nodes)
        sel = DerivativeSelector.from_node_set(
            np.flatnonzero(rng.random(m) < rng.uniform(0, 1)), mats
        )
        w = apply_G(sel, a, mats)
        pairing = (mats.M @ a) @ extend_interior(w, mats)
        assert pairing >= -1e-12 * (1.0 + abs(pairing))


def test_nesting_monotonicity_of_quadratic_forms(rng):
    # enlarging the constrained set can only shrink the induced energy
    mesh, mats = mesh_and_mats(4)
    m = mats.interior.size
    small = np.array([0, 3], dtype=int)
    large = np.array([0, 3, 5, 7], dtype=int)
    sel_small = DerivativeSelector.from_node_set(small, mats)
    sel_large = DerivativeSelector.from_node_set(large, mats)

    def form(sel):
        nw = mesh.num_nodes
        q = np.empty((nw, nw))
        for k in range(nw):
            e = np.zeros(nw)
            e[k] = 1.0
            q[:, k] = mats.M @ extend_interior(apply_G(sel, e, mats), mats)
        return 0.5 * (q + q.T)

    qs, ql = form(sel_small), form(sel_large)
    assert np.linalg.eigvalsh(qs - ql).min() >= -1e-12


def test_selector_from_solution_respects_admissibility(rng):
    mesh, mats = mesh_and_mats(8)
    z = NodalFunction(rng.uniform(-80, -20, mesh.num_nodes), SPACE_W, mesh)
    psi = NodalFunction(np.full(mesh.num_nodes, -0.05), SPACE_W, mesh)
    sol = solve_obstacle(z, psi, mesh, mats)
    sel = DerivativeSelector.from_solution(sol, mats)
    assert np.all(np.isin(sol.strictly_active, sel.constrained))
    assert not np.any(np.isin(sol.inactive, sel.constrained))
    sel_b = DerivativeSelector.from_solution(sol, mats, include_biactive=True)
    assert sel_b.constrained.size >= sel.constrained.size


def test_selector_rejects_out_of_range(mesh4):
    mesh, mats = mesh4
    with pytest.raises(ValueError):
        DerivativeSelector.from_node_set(np.array([mats.interior.size]), mats)
