"""Outer semismooth Newton iteration for the discrete control problem.

Each sweep of the loop computes the adjoint-type quantity
zeta_i = (P I_h(y_D) - P y_i) / alpha, the control u_i as the obstacle
solve at zeta_i and the trial state ytilde_i = P u_i, then checks the
L2 residual ||y_i - ytilde_i|| and, if necessary, solves

    y_{i+1} + (1/alpha) P G_N P y_{i+1} = ytilde_i + (1/alpha) P G_N P y_i

with N the strictly active node set of the obstacle solve.
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import SPACE_W, FEMatrices, NodalFunction, interpolate, vector_norm
from .linalg import cg_self_adjoint, solve_block_newton
from .obstacle import ObstacleSolution, solve_obstacle
from .operators import DerivativeSelector, apply_G, apply_P, extend_interior


class ContractionViolationError(Exception):
    """Newton solve produced ||y|| > ||rhs|| in L2; the operator lost
    its unit inverse bound, which indicates a sign or adjointness bug."""


@dataclass
class NewtonConfig:
    alpha: float
    tol: float = 1e-7
    max_iter: int = 50
    selector_policy: str = "strict_only"  # or "strict_plus_biactive"
    y0_policy: str = "interpolate_yD"  # "zero" or "custom"
    y0_custom: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.selector_policy not in ("strict_only", "strict_plus_biactive"):
            raise ValueError(f"unknown selector policy {self.selector_policy!r}")
        if self.y0_policy not in ("interpolate_yD", "zero", "custom"):
            raise ValueError(f"unknown y0 policy {self.y0_policy!r}")


@dataclass
class IterationRecord:
    index: int
    residual: float
    n_constrained: int
    norm_y: float
    norm_ytilde: float
    norm_u: float
    y: np.ndarray
    ytilde: np.ndarray
    u: np.ndarray  # interior values


@dataclass
class NewtonReport:
    iterations: int
    status: str  # "converged" or "max_iter_reached"
    history: list[IterationRecord]
    y: np.ndarray
    ytilde: np.ndarray
    u: np.ndarray
    lam: np.ndarray
    final_solution: ObstacleSolution

    @property
    def residuals(self) -> list[float]:
        return [rec.residual for rec in self.history]


def newton_step_matrix_apply(
    y: np.ndarray, selector: DerivativeSelector, alpha: float, mats: FEMatrices
) -> np.ndarray:
    """Apply y -> y + (1/alpha) P E G P y on full-node vectors."""
    py = apply_P(y, mats)
    w = apply_G(selector, py, mats)
    return y + apply_P(extend_interior(w, mats), mats) / alpha


def solve_newton_system(
    rhs: np.ndarray,
    selector: DerivativeSelector,
    alpha: float,
    mats: FEMatrices,
) -> np.ndarray:
    """Direct block solve of the Newton update equation.

    Verifies the unit bound on the inverse (the solution cannot be
    longer than the right-hand side in L2) before returning.
    """
    free_local = selector.free
    k_ff = mats.K_int[np.ix_(free_local, free_local)].tocsr()
    y = solve_block_newton(
        mats.A, mats.M, k_ff, mats.interior[free_local], alpha, rhs
    )
    norm_y = vector_norm(y, "L2", mats.K, mats.M)
    norm_rhs = vector_norm(rhs, "L2", mats.K, mats.M)
    if norm_y > (1.0 + 1e-9) * norm_rhs + 1e-300:
        raise ContractionViolationError(
            f"||y|| = {norm_y:.6e} exceeds ||rhs|| = {norm_rhs:.6e}"
        )
    return y


def solve_newton_system_cg(
    rhs: np.ndarray,
    selector: DerivativeSelector,
    alpha: float,
    mats: FEMatrices,
    tol: float = 1e-12,
) -> np.ndarray:
    """Matrix-free cross-check: conjugate directions in the M inner
    product applied to the (M-self-adjoint, positive definite) Newton
    operator.  Test-only path."""
    m = mats.M

    def inner(x, z):
        return float(x @ (m @ z))

    return cg_self_adjoint(
        lambda v: newton_step_matrix_apply(v, selector, alpha, mats), rhs, inner, tol=tol
    )


def run(config: NewtonConfig, y_d_field, psi_field, mesh, mats: FEMatrices) -> NewtonReport:
    """Run the semismooth Newton method; records one entry per residual check."""
    y_d = interpolate(y_d_field, mesh) if callable(y_d_field) else y_d_field
    psi = interpolate(psi_field, mesh) if callable(psi_field) else psi_field

    if config.y0_policy == "interpolate_yD":
        y = y_d.extended().copy()
    elif config.y0_policy == "zero":
        y = np.zeros(mesh.num_nodes)
    else:
        if config.y0_custom is None:
            raise ValueError("y0_policy 'custom' requires y0_custom")
        y = np.asarray(config.y0_custom, dtype=float).copy()

    p_yd = apply_P(y_d.extended(), mats)
    include_biactive = config.selector_policy == "strict_plus_biactive"

    history: list[IterationRecord] = []
    warm_active = None
    sol = None
    status = "max_iter_reached"
    for i in range(config.max_iter + 1):
        py = apply_P(y, mats)
        zeta = (p_yd - py) / config.alpha
        sol = solve_obstacle(
            NodalFunction(zeta, SPACE_W, mesh), psi, mesh, mats,
            warm_start_active=warm_active,
        )
        warm_active = sol.active
        u_int = sol.w.values
        u_full = extend_interior(u_int, mats)
        ytilde = apply_P(u_full, mats)
        residual = vector_norm(y - ytilde, "L2", mats.K, mats.M)

        selector = DerivativeSelector.from_solution(sol, mats, include_biactive)
        history.append(
            IterationRecord(
                index=i,
                residual=residual,
                n_constrained=selector.constrained.size,
                norm_y=vector_norm(y, "L2", mats.K, mats.M),
                norm_ytilde=vector_norm(ytilde, "L2", mats.K, mats.M),
                norm_u=vector_norm(u_full, "H1_semi", mats.K, mats.M),
                y=y.copy(),
                ytilde=ytilde,
                u=u_int.copy(),
            )
        )
        if residual <= config.tol:
            status = "converged"
            break
        if i == config.max_iter:
            break
        # rhs of the update equation, reusing the P y already computed
        w = apply_G(selector, py, mats)
        rhs = ytilde + apply_P(extend_interior(w, mats), mats) / config.alpha
        y = solve_newton_system(rhs, selector, config.alpha, mats)

    last = history[-1]
    return NewtonReport(
        iterations=last.index,
        status=status,
        history=history,
        y=last.y,
        ytilde=last.ytilde,
        u=last.u,
        lam=sol.lam,
        final_solution=sol,
    )
