"""P1 finite element assembly on Friedrichs-Keller meshes.

Assembles the consistent mass matrix M, the stiffness matrix K and the
H^1 matrix K + M for the full space W_h (all nodes).  Functions on the
Dirichlet subspace V_h are stored on the interior index set and
zero-extended on demand.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, interior_nodes, signed_areas

SPACE_W = "W_h"
SPACE_V = "V_h"


@dataclass
class NodalFunction:
    """Coefficient vector of a P1 function, tagged with its space."""

    values: np.ndarray
    space: str
    mesh: Mesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        dim = expected_dim(self.mesh, self.space)
        if self.values.shape != (dim,):
            raise ValueError(
                f"{self.space} on n={self.mesh.n} needs {dim} values, "
                f"got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("nodal values must be finite")

    def extended(self) -> np.ndarray:
        """Coefficients on all mesh nodes (zero on the boundary for V_h)."""
        if self.space == SPACE_W:
            return self.values
        full = np.zeros(self.mesh.num_nodes)
        full[interior_nodes(self.mesh)] = self.values
        return full


def expected_dim(mesh: Mesh, space: str) -> int:
    if space == SPACE_W:
        return mesh.num_nodes
    if space == SPACE_V:
        return interior_nodes(mesh).size
    raise ValueError(f"unknown space tag {space!r}")


def _accumulate(mesh: Mesh, element: np.ndarray) -> sp.csr_matrix:
    """Sum per-triangle 3x3 matrices (area-scaled) into a global CSR matrix."""
    tri = mesh.triangles
    areas = signed_areas(mesh)
    nt = tri.shape[0]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    vals = (areas[:, None, None] * element).reshape(nt, 9).ravel()
    a = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.num_nodes,) * 2).tocsr()
    a.sum_duplicates()
    return a


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """K[i, j] = integral of grad(phi_i) . grad(phi_j) over the square."""
    p = mesh.nodes[mesh.triangles]
    areas = signed_areas(mesh)
    # constant P1 gradients: grad(phi_k) = rot(edge opposite k) / (2 area)
    e = np.stack(
        [p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1
    )
    grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2) / (2.0 * areas)[:, None, None]
    element = np.einsum("tik,tjk->tij", grads, grads)
    return _accumulate(mesh, element)


_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix; exact for products of P1 functions."""
    nt = mesh.num_triangles
    element = np.broadcast_to(_MASS_REF, (nt, 3, 3))
    return _accumulate(mesh, element)


def h1_matrix(mesh: Mesh) -> sp.csr_matrix:
    """The full H^1 inner-product matrix K + M."""
    return (stiffness_matrix(mesh) + mass_matrix(mesh)).tocsr()


def restrict_to_interior(op: sp.spmatrix, mesh: Mesh, free: np.ndarray) -> sp.csr_matrix:
    """Principal submatrix of op on the given subset of interior nodes."""
    free = np.asarray(free, dtype=int)
    if free.size:
        if free.min() < 0 or free.max() >= mesh.num_nodes:
            raise ValueError("free node index out of range")
        if mesh.boundary_mask[free].any():
            raise ValueError("free set must consist of interior nodes")
    return op.tocsr()[np.ix_(free, free)].tocsr()


def interpolate(f, mesh: Mesh) -> NodalFunction:
    """Nodal interpolant of a scalar field: values[k] = f(x_k)."""
    x1, x2 = mesh.nodes[:, 0], mesh.nodes[:, 1]
    vals = np.broadcast_to(np.asarray(f(x1, x2), dtype=float), x1.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("field returned a non-finite value at a mesh node")
    return NodalFunction(vals, SPACE_W, mesh)


@dataclass
class FEMatrices:
    """Assembled operators for one mesh, shared by all solver stages."""

    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    A: sp.csr_matrix  # K + M
    interior: np.ndarray
    K_int: sp.csr_matrix  # stiffness on V_h (all interior nodes)
    _a_fact: object = field(default=None, repr=False)
    _kint_fact: object = field(default=None, repr=False)

    def a_factorization(self):
        """Cached factorization of K + M (Neumann Helmholtz operator)."""
        if self._a_fact is None:
            from .linalg import factorize

            self._a_fact = factorize(self.A)
        return self._a_fact

    def kint_factorization(self):
        """Cached factorization of the interior (Dirichlet) stiffness matrix."""
        if self._kint_fact is None:
            from .linalg import factorize

            self._kint_fact = factorize(self.K_int)
        return self._kint_fact


def build_matrices(mesh: Mesh) -> FEMatrices:
    K = stiffness_matrix(mesh)
    M = mass_matrix(mesh)
    A = (K + M).tocsr()
    inter = interior_nodes(mesh)
    K_int = K[np.ix_(inter, inter)].tocsr()
    return FEMatrices(mesh=mesh, K=K, M=M, A=A, interior=inter, K_int=K_int)


def norm(v: NodalFunction, kind: str, mats: "FEMatrices | None" = None) -> float:
    """Discrete L2, H1 or H1-seminorm of a P1 function.

    V_h vectors are zero-extended to the full node set first.
    """
    if mats is None:
        K, M = stiffness_matrix(v.mesh), mass_matrix(v.mesh)
    else:
        K, M = mats.K, mats.M
    return vector_norm(v.extended(), kind, K, M)


def vector_norm(full: np.ndarray, kind: str, K: sp.spmatrix, M: sp.spmatrix) -> float:
    if kind == "L2":
        q = full @ (M @ full)
    elif kind == "H1":
        q = full @ (M @ full) + full @ (K @ full)
    elif kind == "H1_semi":
        q = full @ (K @ full)
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return float(np.sqrt(max(q, 0.0)))
