"""The two linear solution operators of the Newton iteration.

apply_P is the H^1 Riesz map on W_h: it solves the Neumann Helmholtz
problem (K + M) y = M u.  apply_G is the generalized derivative of the
obstacle solution map: a Dirichlet solve on the subspace of V_h
functions vanishing on a chosen node set N.
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import SPACE_V, FEMatrices, NodalFunction
from .linalg import Factorization, factorize
from .obstacle import ObstacleSolution


@dataclass
class DerivativeSelector:
    """Node set N (interior indices, local numbering) and the cached
    factorization of the stiffness matrix on the complementary free set."""

    constrained: np.ndarray  # indices into mats.interior
    free: np.ndarray
    _fact: Factorization | None = field(default=None, repr=False)

    @classmethod
    def from_node_set(cls, constrained, mats: FEMatrices) -> "DerivativeSelector":
        m = mats.interior.size
        constrained = np.unique(np.asarray(constrained, dtype=int))
        if constrained.size and (constrained.min() < 0 or constrained.max() >= m):
            raise ValueError("constrained node index out of range")
        mask = np.zeros(m, dtype=bool)
        mask[constrained] = True
        return cls(constrained=constrained, free=np.flatnonzero(~mask))

    @classmethod
    def from_solution(
        cls, sol: ObstacleSolution, mats: FEMatrices, include_biactive: bool = False
    ) -> "DerivativeSelector":
        n = sol.strictly_active
        if include_biactive:
            n = np.union1d(n, sol.biactive)
        return cls.from_node_set(n, mats)

    def factorization(self, mats: FEMatrices) -> Factorization:
        if self._fact is None:
            if self.free.size == mats.interior.size:
                self._fact = mats.kint_factorization()
            else:
                self._fact = factorize(
                    mats.K_int[np.ix_(self.free, self.free)].tocsc()
                )
        return self._fact


def apply_P(u: np.ndarray, mats: FEMatrices) -> np.ndarray:
    """Riesz map: y with (K+M) y = M u, for a full-node coefficient vector."""
    return mats.a_factorization().solve(mats.M @ u)


def apply_P_fn(u: NodalFunction, mats: FEMatrices) -> NodalFunction:
    from .assembly import SPACE_W

    return NodalFunction(apply_P(u.extended(), mats), SPACE_W, mats.mesh)


def apply_G(selector: DerivativeSelector, a: np.ndarray, mats: FEMatrices) -> np.ndarray:
    """Constrained Dirichlet solve: w = 0 on N and the boundary,
    K_ff w_f = (M a)|_f on the free nodes.  Returns w on interior nodes."""
    m = mats.interior.size
    w = np.zeros(m)
    free = selector.free
    if free.size:
        load = (mats.M @ a)[mats.interior]
        w[free] = selector.factorization(mats).solve(load[free])
    return w


def apply_G_fn(selector: DerivativeSelector, a: NodalFunction, mats: FEMatrices) -> NodalFunction:
    return NodalFunction(apply_G(selector, a.extended(), mats), SPACE_V, mats.mesh)


def extend_interior(w_int: np.ndarray, mats: FEMatrices) -> np.ndarray:
    full = np.zeros(mats.mesh.num_nodes)
    full[mats.interior] = w_int
    return full
