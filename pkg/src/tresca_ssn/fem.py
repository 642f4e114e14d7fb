"""Trilinear hexahedral linear elasticity: stiffness, surface loads, clamping.

DOF ``3*j + c`` is component ``c`` (x, y, z) of node ``j``. Strains use the
Voigt layout (xx, yy, zz, yz, xz, xy) with engineering shear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import HEX_CORNERS, HexMesh

_GP = 1.0 / np.sqrt(3.0)
_CORNER_SIGNS = 2.0 * HEX_CORNERS - 1.0  # (8, 3) in {-1, +1}
_QUAD_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])

# 2x2x2 Gauss rule, unit weights
_GAUSS_3D = _GP * _CORNER_SIGNS
_GAUSS_2D = _GP * _QUAD_SIGNS

_ASSEMBLY_CHUNK = 2048


@dataclass(frozen=True)
class ElasticParams:
    youngs_modulus: float = 2.1e9
    poisson_ratio: float = 0.277

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.youngs_modulus}")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.poisson_ratio}")

    @property
    def lame_lambda(self) -> float:
        E, nu = self.youngs_modulus, self.poisson_ratio
        return E * nu / ((1 + nu) * (1 - 2 * nu))

    @property
    def lame_mu(self) -> float:
        return self.youngs_modulus / (2 * (1 + self.poisson_ratio))

    def voigt_matrix(self) -> np.ndarray:
        lam, mu = self.lame_lambda, self.lame_mu
        D = np.zeros((6, 6))
        D[:3, :3] = lam
        D[np.arange(3), np.arange(3)] += 2 * mu
        D[np.arange(3, 6), np.arange(3, 6)] = mu
        return D


@dataclass(frozen=True)
class TractionSpec:
    right_face_traction: tuple[float, float, float] = (-5e8, 0.0, 0.0)
    top_face_traction: tuple[float, float, float] = (0.0, 0.0, -1e8)

    def __post_init__(self):
        if not np.all(np.isfinite(self.right_face_traction + self.top_face_traction)):
            raise ValueError("traction vectors must be finite")


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    """Stiffness and load restricted to the free (non-clamped) DOFs."""

    K: sp.csr_matrix
    l: np.ndarray
    dof_map: np.ndarray  # (3n,) free index, or -1 for clamped DOFs

    @property
    def n_free(self) -> int:
        return self.l.shape[0]

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Scatter a free-DOF vector to all 3n DOFs, zeros on clamped ones."""
        u = np.zeros(self.dof_map.shape[0])
        mask = self.dof_map >= 0
        u[mask] = u_free[self.dof_map[mask]]
        return u


def shape_gradients_ref(points: np.ndarray) -> np.ndarray:
    """Derivatives of the 8 trilinear shape functions at reference points.

    Returns an array of shape (n_points, 8, 3).
    """
    s = _CORNER_SIGNS
    one = 1.0 + points[:, None, :] * s[None, :, :]  # (q, 8, 3)
    dN = np.empty_like(one)
    dN[..., 0] = s[:, 0] * one[..., 1] * one[..., 2]
    dN[..., 1] = s[:, 1] * one[..., 0] * one[..., 2]
    dN[..., 2] = s[:, 2] * one[..., 0] * one[..., 1]
    return dN / 8.0


def _strain_matrices(dNdx: np.ndarray) -> np.ndarray:
    """Voigt B-matrices (..., 6, 24) from physical gradients (..., 8, 3)."""
    B = np.zeros(dNdx.shape[:-2] + (6, 24))
    dx, dy, dz = dNdx[..., 0], dNdx[..., 1], dNdx[..., 2]
    B[..., 0, 0::3] = dx
    B[..., 1, 1::3] = dy
    B[..., 2, 2::3] = dz
    B[..., 3, 1::3] = dz
    B[..., 3, 2::3] = dy
    B[..., 4, 0::3] = dz
    B[..., 4, 2::3] = dx
    B[..., 5, 0::3] = dy
    B[..., 5, 1::3] = dx
    return B


_DN_GAUSS = shape_gradients_ref(_GAUSS_3D)  # (8 gp, 8 nodes, 3)


def element_stiffness_batch(corner_coords: np.ndarray, params: ElasticParams) -> np.ndarray:
    """Stiffness matrices for a stack of hexahedra, shape (m, 24, 24)."""
    X = np.asarray(corner_coords, dtype=float)
    J = np.einsum("gka,mkb->mgab", _DN_GAUSS, X)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise ValueError("degenerate or inverted hexahedron: non-positive Jacobian determinant")
    dNdx = np.einsum("mgab,gkb->mgka", np.linalg.inv(J), _DN_GAUSS)
    B = _strain_matrices(dNdx)
    D = params.voigt_matrix()
    Ke = np.einsum("mgsi,st,mgtj,mg->mij", B, D, B, det, optimize=True)
    return 0.5 * (Ke + Ke.transpose(0, 2, 1))


def element_stiffness(corner_coords: np.ndarray, params: ElasticParams) -> np.ndarray:
    """24x24 stiffness of one hexahedron given its 8 corners in VTK order."""
    return element_stiffness_batch(np.asarray(corner_coords, dtype=float)[None], params)[0]


def _element_dofs(elements: np.ndarray) -> np.ndarray:
    return (3 * elements[:, :, None] + np.arange(3)).reshape(elements.shape[0], 24)


def assemble_stiffness(mesh: HexMesh, params: ElasticParams) -> sp.csr_matrix:
    """Global 3n x 3n stiffness, summed in element order."""
    ndof = 3 * mesh.n_nodes
    rows, cols, vals = [], [], []
    for start in range(0, mesh.n_elements, _ASSEMBLY_CHUNK):
        elems = mesh.elements[start : start + _ASSEMBLY_CHUNK]
        Ke = element_stiffness_batch(mesh.node_coords[elems], params)
        dofs = _element_dofs(elems)
        rows.append(np.repeat(dofs, 24, axis=1).ravel())
        cols.append(np.tile(dofs, (1, 24)).ravel())
        vals.append(Ke.ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof)
    ).tocsr()
    K.sum_duplicates()
    return K


def face_shape_integrals(coords: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Integral of each bilinear face shape function, shape (m, 4)."""
    X = coords[faces]  # (m, 4, 3)
    s = _QUAD_SIGNS
    q = _GAUSS_2D
    N = 0.25 * (1 + q[:, None, 0] * s[None, :, 0]) * (1 + q[:, None, 1] * s[None, :, 1])
    dxi = 0.25 * s[None, :, 0] * (1 + q[:, None, 1] * s[None, :, 1])
    deta = 0.25 * s[None, :, 1] * (1 + q[:, None, 0] * s[None, :, 0])
    t_xi = np.einsum("gk,mkc->mgc", dxi, X)
    t_eta = np.einsum("gk,mkc->mgc", deta, X)
    dA = np.linalg.norm(np.cross(t_xi, t_eta), axis=-1)  # (m, g)
    return np.einsum("gk,mg->mk", N, dA)


def face_load(coords: np.ndarray, faces: np.ndarray, traction, ndof: int) -> np.ndarray:
    """Consistent nodal load of a constant traction over bilinear quads."""
    f = np.zeros(ndof)
    if len(faces) == 0:
        return f
    w = face_shape_integrals(coords, faces)
    nodal = w[:, :, None] * np.asarray(traction, dtype=float)[None, None, :]
    np.add.at(f, (3 * faces[:, :, None] + np.arange(3)).ravel(), nodal.ravel())
    return f


def contact_area_weights(mesh: HexMesh) -> np.ndarray:
    """Boundary mass of each contact node: the integral of its shape function
    over the contact face. Multiplying a friction bound per unit area by these
    weights gives the nodal bounds of the discretized friction functional."""
    w = np.zeros(mesh.n_nodes)
    integrals = face_shape_integrals(mesh.node_coords, mesh.contact_faces)
    np.add.at(w, mesh.contact_faces.ravel(), integrals.ravel())
    return w[mesh.contact_nodes]


def assemble_surface_load(mesh: HexMesh, tractions: TractionSpec) -> np.ndarray:
    ndof = 3 * mesh.n_nodes
    return face_load(
        mesh.node_coords, mesh.traction_faces_right, tractions.right_face_traction, ndof
    ) + face_load(mesh.node_coords, mesh.traction_faces_top, tractions.top_face_traction, ndof)


def apply_dirichlet(K: sp.spmatrix, l: np.ndarray, mesh: HexMesh) -> GlobalSystem:
    """Delete the rows and columns of every DOF of a clamped node."""
    ndof = 3 * mesh.n_nodes
    fixed = np.zeros(ndof, dtype=bool)
    fixed[(3 * mesh.dirichlet_nodes[:, None] + np.arange(3)).ravel()] = True
    free = np.flatnonzero(~fixed)
    if free.size == 0:
        raise ValueError("every node is clamped; nothing left to solve for")
    dof_map = np.full(ndof, -1, dtype=np.int64)
    dof_map[free] = np.arange(free.size)
    K = sp.csr_matrix(K)
    return GlobalSystem(K=K[free][:, free].tocsr(), l=np.asarray(l, float)[free].copy(), dof_map=dof_map)
