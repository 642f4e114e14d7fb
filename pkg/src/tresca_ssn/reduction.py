"""Condensation of the clamped elastic system onto the contact face.

The free system is factored once with the contact DOFs ordered last and
pivoting disabled. For an SPD matrix this is a scaled Cholesky (LDL^T)
factorization: every pivot must be positive, so loss of definiteness is
detected. The trailing block of the factors is the dense Schur complement,
and the leading block is kept to recover interior displacements.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import GlobalSystem
from .mesh import HexMesh

log = logging.getLogger(__name__)

_RHS_BLOCK = 256


class FactorizationError(np.linalg.LinAlgError):
    """Raised when the interior stiffness block is not positive definite."""


@dataclass(frozen=True, eq=False)
class CondensedBoundarySystem:
    A_tilde: np.ndarray  # (3p, 3p) dense SPD
    b_tilde: np.ndarray  # (3p,)
    interior_factor: object  # anything with .solve(r) for K_II
    K_IC: sp.csr_matrix
    l_I: np.ndarray
    interior_dofs: np.ndarray  # free-DOF indices
    contact_dofs: np.ndarray  # free-DOF indices, node-major (x, y, z)

    @property
    def p(self) -> int:
        return self.b_tilde.shape[0] // 3


@dataclass(frozen=True, eq=False)
class ReducedContactSystem:
    """Data of the generalized equation 0 in A x - b + Q(x).

    Unknowns are ordered node by node as (u_x, u_y, u_z, lambda).
    """

    A: np.ndarray  # (4p, 4p)
    b: np.ndarray  # (4p,)
    phi: np.ndarray  # (p,) friction bound per node
    gap: np.ndarray  # (p,)

    @property
    def p(self) -> int:
        return self.gap.shape[0]

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b


def contact_free_dofs(mesh: HexMesh, sys: GlobalSystem) -> np.ndarray:
    """Free-DOF indices of the contact nodes, three per node in node order."""
    dofs = sys.dof_map[(3 * mesh.contact_nodes[:, None] + np.arange(3)).ravel()]
    if np.any(dofs < 0):
        raise ValueError("a contact node is clamped")
    return dofs


def factor_spd(K: sp.spmatrix, natural: bool = False) -> spla.SuperLU:
    """Symmetric-ordering factorization of an SPD sparse matrix.

    Pivoting is disabled, so the factor's diagonal carries the pivots of an
    LDL^T decomposition; a non-positive pivot means K is not positive definite.
    With ``natural=True`` the given ordering is kept.
    """
    K = sp.csc_matrix(K)
    try:
        lu = spla.splu(
            K,
            permc_spec="NATURAL" if natural else "MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise FactorizationError(f"factorization failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("factorization left the symmetric ordering (matrix not SPD)")
    pivots = lu.U.diagonal()
    if np.any(pivots <= 0):
        raise FactorizationError(
            f"non-positive pivot {pivots.min():.3g}: matrix is not positive definite"
        )
    return lu


def _nodal_ordering(K_II: sp.csr_matrix) -> np.ndarray:
    """Fill-reducing DOF ordering computed on the node graph (3 DOFs per node)."""
    m = K_II.shape[0]
    n_nodes = m // 3
    agg = sp.csr_matrix((np.ones(m), (np.arange(m) // 3, np.arange(m))), shape=(n_nodes, m))
    graph = (agg @ abs(K_II) @ agg.T).tocsr()
    graph.data[:] = -1.0
    # diagonally dominant stand-in with the same sparsity: factors without pivoting
    lap = graph + sp.diags(1.0 - np.asarray(graph.sum(axis=1)).ravel())
    lu = spla.splu(
        sp.csc_matrix(lap),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    node_order = np.empty_like(lu.perm_c)
    node_order[lu.perm_c] = np.arange(n_nodes)
    return (3 * node_order[:, None] + np.arange(3)).ravel()


class InteriorSolver:
    """Solves K_II y = r with the leading block of a partial factorization."""

    def __init__(self, L: sp.spmatrix, U: sp.spmatrix, order: np.ndarray):
        self.L = sp.csr_matrix(L)
        self.U = sp.csr_matrix(U)
        self.order = order  # position k of the factor holds interior DOF order[k]

    def solve(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        y = spla.spsolve_triangular(self.L, r[self.order], lower=True, unit_diagonal=True)
        y = spla.spsolve_triangular(self.U, y, lower=False)
        out = np.empty_like(y)
        out[self.order] = y
        return out


def schur_reduce(sys: GlobalSystem, contact_dofs: np.ndarray) -> CondensedBoundarySystem:
    """Eliminate all non-contact DOFs from K u = l.

    The free system is permuted to [interior (fill-reducing order), contact]
    and factored once without pivoting; the trailing block of L U is then the
    Schur complement, and the leading block factors K_II.
    """
    contact_dofs = np.asarray(contact_dofs, dtype=np.int64)
    n = sys.n_free
    if contact_dofs.size == 0 or contact_dofs.size >= n:
        raise ValueError("contact DOFs must be a nonempty proper subset of the free DOFs")
    mask = np.ones(n, dtype=bool)
    mask[contact_dofs] = False
    interior = np.flatnonzero(mask)
    ni, m = interior.size, contact_dofs.size

    K = sp.csr_matrix(sys.K)
    K_II = K[interior][:, interior]
    K_IC = K[interior][:, contact_dofs].tocsr()
    l_I = sys.l[interior]
    l_C = sys.l[contact_dofs]

    order = _nodal_ordering(K_II) if ni % 3 == 0 else np.arange(ni)
    q = np.concatenate([interior[order], contact_dofs])
    lu = factor_spd(K[q][:, q], natural=True)
    L, U = lu.L, lu.U
    if np.array_equal(lu.perm_c, np.arange(n)):
        A_tilde = L[ni:, ni:].toarray() @ U[ni:, ni:].toarray()
        interior_solver = InteriorSolver(L[:ni, :ni], U[:ni, :ni], order)
    else:
        log.debug("factor reordered the contact block; using batched interior solves")
        interior_solver = factor_spd(K_II)
        A_tilde = K[contact_dofs][:, contact_dofs].toarray()
        K_CI = K_IC.T.tocsr()
        for start in range(0, m, _RHS_BLOCK):
            cols = slice(start, min(start + _RHS_BLOCK, m))
            A_tilde[:, cols] -= K_CI @ interior_solver.solve(K_IC[:, cols].toarray())
    A_tilde = 0.5 * (A_tilde + A_tilde.T)
    b_tilde = l_C - K_IC.T @ interior_solver.solve(l_I)

    return CondensedBoundarySystem(
        A_tilde=A_tilde,
        b_tilde=b_tilde,
        interior_factor=interior_solver,
        K_IC=K_IC,
        l_I=l_I,
        interior_dofs=interior,
        contact_dofs=contact_dofs,
    )


def expand_blocks(cbs: CondensedBoundarySystem, gap: np.ndarray, phi) -> ReducedContactSystem:
    """Insert the contact multiplier as a fourth unknown per node.

    Row 3 of node i gains ``-lambda_i`` (pressure pushes the body up), and row 4
    reads ``u_z + g_i`` so that the normal-cone condition is the gap-adjusted
    non-penetration constraint.
    """
    p = cbs.p
    gap = np.asarray(gap, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (p,)).copy()
    if gap.shape != (p,):
        raise ValueError(f"gap must have shape ({p},), got {gap.shape}")
    if np.any(gap < 0) or np.any(phi < 0):
        raise ValueError("gap and friction bound must be nonnegative")

    disp = (4 * np.arange(p)[:, None] + np.arange(3)).ravel()
    A = np.zeros((4 * p, 4 * p))
    A[np.ix_(disp, disp)] = cbs.A_tilde
    k = 4 * np.arange(p)
    A[k + 2, k + 3] = -1.0
    A[k + 3, k + 2] = 1.0
    b = np.zeros(4 * p)
    b[disp] = cbs.b_tilde
    b[k + 3] = -gap
    return ReducedContactSystem(A=A, b=b, phi=phi, gap=gap)


def recover_interior(cbs: CondensedBoundarySystem, u_C: np.ndarray) -> np.ndarray:
    """Interior displacements for given contact-face displacements."""
    return cbs.interior_factor.solve(cbs.l_I - cbs.K_IC @ np.asarray(u_C, dtype=float))


def assemble_free_displacement(cbs: CondensedBoundarySystem, u_C: np.ndarray) -> np.ndarray:
    """Free-DOF displacement vector combining recovered interior and given contact parts."""
    n = cbs.interior_dofs.size + cbs.contact_dofs.size
    u = np.empty(n)
    u[cbs.interior_dofs] = recover_interior(cbs, u_C)
    u[cbs.contact_dofs] = u_C
    return u
