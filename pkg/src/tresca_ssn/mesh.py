"""Structured hexahedral mesh of a rectangular prism resting above a rigid plane.

Nodes are numbered lexicographically in (z, y, x), i.e. x varies fastest::

    node(ix, iy, iz) = ix + (ex + 1) * (iy + (ey + 1) * iz)

Element corners follow the VTK_HEXAHEDRON convention: the bottom quad
(lowest z) counter-clockwise seen from +z, then the top quad in the same
order::

    0:(0,0,0) 1:(1,0,0) 2:(1,1,0) 3:(0,1,0) 4:(0,0,1) 5:(1,0,1) 6:(1,1,1) 7:(0,1,1)

Boundary classification: the face x = x_min is clamped, the face z = z_min is
the potential contact face, tractions act on x = x_max and z = z_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# local (ix, iy, iz) offsets of the eight corners, VTK order
HEX_CORNERS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box occupied by the body plus the height of the rigid plane."""

    x_range: tuple[float, float] = (0.0, 2.0)
    y_range: tuple[float, float] = (0.0, 1.0)
    z_range: tuple[float, float] = (0.1, 1.0)
    foundation_z: float = 0.0

    def __post_init__(self):
        for name in ("x_range", "y_range", "z_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name} must be a nonempty interval, got ({lo}, {hi})")
        if self.foundation_z > self.z_range[0]:
            raise ValueError(
                f"foundation_z={self.foundation_z} lies above the body bottom z={self.z_range[0]}"
            )


def divisions(level: int) -> tuple[int, int, int]:
    """Element counts (e_x, e_y, e_z) for refinement level ``level``."""
    if int(level) != level or level < 1:
        raise ValueError(f"level must be a positive integer, got {level!r}")
    s = 2.0 ** (level / 2.0)
    return math.ceil(4 * s), math.ceil(2 * s), math.ceil(2 * s)


@dataclass(frozen=True)
class MeshLevelSpec:
    level: int | None
    divisions: tuple[int, int, int]

    def __post_init__(self):
        if len(self.divisions) != 3 or any(int(e) != e or e < 1 for e in self.divisions):
            raise ValueError(f"divisions must be three positive integers, got {self.divisions}")

    @classmethod
    def from_level(cls, level: int) -> "MeshLevelSpec":
        return cls(level=level, divisions=divisions(level))


@dataclass(frozen=True, eq=False)
class HexMesh:
    node_coords: np.ndarray  # (n, 3)
    elements: np.ndarray  # (n_el, 8), VTK corner order
    dirichlet_nodes: np.ndarray
    contact_nodes: np.ndarray  # ordered by (y, x)
    traction_faces_right: np.ndarray  # (m, 4) quads on x = x_max
    traction_faces_top: np.ndarray  # (m, 4) quads on z = z_max
    contact_faces: np.ndarray  # (m, 4) quads on z = z_min
    shape: tuple[int, int, int]  # (e_x, e_y, e_z)

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def p(self) -> int:
        return self.contact_nodes.shape[0]


def node_counts(level: int) -> tuple[int, int]:
    """Return (n, p) implied by the division formula, without building the mesh."""
    ex, ey, ez = divisions(level)
    return (ex + 1) * (ey + 1) * (ez + 1), ex * (ey + 1)


def build_mesh(domain: DomainSpec, spec: MeshLevelSpec) -> HexMesh:
    ex, ey, ez = spec.divisions
    nx, ny, nz = ex + 1, ey + 1, ez + 1
    xs = np.linspace(*domain.x_range, nx)
    ys = np.linspace(*domain.y_range, ny)
    zs = np.linspace(*domain.z_range, nz)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    coords = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(ix, iy, iz):
        return ix + nx * (iy + ny * iz)

    iz, iy, ix = np.meshgrid(np.arange(ez), np.arange(ey), np.arange(ex), indexing="ij")
    ix, iy, iz = ix.ravel(), iy.ravel(), iz.ravel()
    elements = np.column_stack(
        [nid(ix + dx, iy + dy, iz + dz) for dx, dy, dz in HEX_CORNERS]
    ).astype(np.int64)

    all_ix = np.tile(np.arange(nx), ny * nz)
    all_iz = np.repeat(np.arange(nz), nx * ny)
    node_ids = np.arange(nx * ny * nz, dtype=np.int64)
    dirichlet = node_ids[all_ix == 0]
    # iz == 0 block is already ordered by (y, x)
    contact = node_ids[(all_iz == 0) & (all_ix != 0)]

    # outward normals +x and +z; corners listed counter-clockwise about them
    jy, jz = np.meshgrid(np.arange(ey), np.arange(ez), indexing="xy")
    jy, jz = jy.ravel(), jz.ravel()
    right = np.column_stack(
        [nid(ex, jy, jz), nid(ex, jy + 1, jz), nid(ex, jy + 1, jz + 1), nid(ex, jy, jz + 1)]
    )
    jx, jy = np.meshgrid(np.arange(ex), np.arange(ey), indexing="xy")
    jx, jy = jx.ravel(), jy.ravel()
    top = np.column_stack(
        [nid(jx, jy, ez), nid(jx + 1, jy, ez), nid(jx + 1, jy + 1, ez), nid(jx, jy + 1, ez)]
    )
    # outward normal -z
    bottom = np.column_stack(
        [nid(jx, jy, 0), nid(jx, jy + 1, 0), nid(jx + 1, jy + 1, 0), nid(jx + 1, jy, 0)]
    )

    return HexMesh(
        node_coords=coords,
        elements=elements,
        dirichlet_nodes=dirichlet,
        contact_nodes=contact,
        traction_faces_right=right.astype(np.int64),
        traction_faces_top=top.astype(np.int64),
        contact_faces=bottom.astype(np.int64),
        shape=(ex, ey, ez),
    )


def gap_vector(mesh: HexMesh, domain: DomainSpec) -> np.ndarray:
    """Vertical distance of every contact node to the rigid plane."""
    if mesh.p == 0:
        raise ValueError("mesh has no contact nodes")
    g = mesh.node_coords[mesh.contact_nodes, 2] - domain.foundation_z
    if np.any(g < 0):
        raise ValueError(f"negative initial gap (min {g.min():.3g}): body penetrates the foundation")
    return g
