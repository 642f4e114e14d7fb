"""Result files: legacy ASCII VTK unstructured grid and per-iteration CSV log."""

from __future__ import annotations

import csv
import os

import numpy as np

from .mesh import HexMesh
from .ssn import SolveReport

VTK_HEXAHEDRON = 12
CSV_HEADER = ("iter", "norm_v", "stick_count", "contact_count", "time_ms")


def _check_parent(path) -> str:
    path = os.fspath(path)
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise FileNotFoundError(f"output directory does not exist: {parent} (for {path})")
    return path


def deformed_coordinates(mesh: HexMesh, displacement: np.ndarray, scale: float = 1.0) -> np.ndarray:
    return mesh.node_coords + scale * np.asarray(displacement, dtype=float).reshape(-1, 3)


def export_vtk(
    mesh: HexMesh,
    displacement: np.ndarray,
    path,
    deform: bool = False,
    title: str = "tresca_ssn displacement",
) -> None:
    """Write the mesh and a nodal ``displacement`` vector field.

    Points are the reference coordinates unless ``deform`` is set. Numbers
    are printed with 17 significant digits, so equal inputs give identical
    bytes.
    """
    path = _check_parent(path)
    u = np.asarray(displacement, dtype=float).reshape(-1, 3)
    if u.shape[0] != mesh.n_nodes:
        raise ValueError(f"displacement has {u.shape[0]} nodes, mesh has {mesh.n_nodes}")
    pts = deformed_coordinates(mesh, u) if deform else mesh.node_coords
    n, m = mesh.n_nodes, mesh.n_elements

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    lines += ["%.17g %.17g %.17g" % tuple(p) for p in pts]
    lines.append(f"CELLS {m} {9 * m}")
    lines += ["8 " + " ".join(map(str, cell)) for cell in mesh.elements.tolist()]
    lines.append(f"CELL_TYPES {m}")
    lines += [str(VTK_HEXAHEDRON)] * m
    lines.append(f"POINT_DATA {n}")
    lines.append("VECTORS displacement double")
    lines += ["%.17g %.17g %.17g" % tuple(v) for v in u]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_counts(path) -> dict[str, int]:
    """Point/cell counts and cell types from a legacy ASCII file (a small reader for checks)."""
    with open(path) as fh:
        tokens = fh.read().split()
    out = {}
    i = tokens.index("POINTS")
    out["points"] = int(tokens[i + 1])
    i = tokens.index("CELLS")
    out["cells"] = int(tokens[i + 1])
    i = tokens.index("CELL_TYPES")
    out["cell_types"] = sorted({int(t) for t in tokens[i + 2 : i + 2 + out["cells"]]})
    return out


def export_iteration_log(report: SolveReport, path) -> None:
    path = _check_parent(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in report.records:
            writer.writerow(
                [rec.iteration, repr(rec.norm_v), rec.stick_count, rec.contact_count, f"{rec.time_ms:.3f}"]
            )
