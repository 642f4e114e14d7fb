"""Semismooth* Newton solver for 3D elastic contact with Tresca friction."""

from .fem import ElasticParams, TractionSpec, contact_area_weights
from .mesh import DomainSpec, MeshLevelSpec, build_mesh, divisions, gap_vector
from .oracle import oracle_solve, residual_check
from .reduction import expand_blocks, recover_interior, schur_reduce
from .ssn import solve

__version__ = "0.1.0"

__all__ = [
    "DomainSpec",
    "ElasticParams",
    "MeshLevelSpec",
    "TractionSpec",
    "build_mesh",
    "contact_area_weights",
    "divisions",
    "expand_blocks",
    "gap_vector",
    "oracle_solve",
    "recover_interior",
    "residual_check",
    "schur_reduce",
    "solve",
]
