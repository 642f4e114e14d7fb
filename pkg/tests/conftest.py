from __future__ import annotations

import functools
import sys
from dataclasses import dataclass

import numpy as np
import pytest

from tresca_ssn.fem import (
    ElasticParams,
    GlobalSystem,
    TractionSpec,
    apply_dirichlet,
    assemble_stiffness,
    assemble_surface_load,
    contact_area_weights,
)
from tresca_ssn.mesh import DomainSpec, HexMesh, MeshLevelSpec, build_mesh, gap_vector
from tresca_ssn.reduction import (
    CondensedBoundarySystem,
    ReducedContactSystem,
    contact_free_dofs,
    expand_blocks,
    schur_reduce,
)


@dataclass
class Pipeline:
    mesh: HexMesh
    K: object
    l: np.ndarray
    gsys: GlobalSystem
    cbs: CondensedBoundarySystem
    rsys: ReducedContactSystem


@functools.lru_cache(maxsize=None)
def benchmark(level: int, phi: float = 1.0, tractions: TractionSpec = TractionSpec()) -> Pipeline:
    domain = DomainSpec()
    mesh = build_mesh(domain, MeshLevelSpec.from_level(level))
    K = assemble_stiffness(mesh, ElasticParams())
    l = assemble_surface_load(mesh, tractions)
    gsys = apply_dirichlet(K, l, mesh)
    cbs = schur_reduce(gsys, contact_free_dofs(mesh, gsys))
    rsys = expand_blocks(cbs, gap_vector(mesh, domain), phi * contact_area_weights(mesh))
    return Pipeline(mesh, K, l, gsys, cbs, rsys)


@pytest.fixture(scope="session")
def level2() -> Pipeline:
    return benchmark(2)


@pytest.fixture(scope="session")
def level3() -> Pipeline:
    return benchmark(3)


def random_contact_system(rng: np.random.Generator, p: int, phi=None) -> ReducedContactSystem:
    """Synthetic 4p system: SPD displacement block, unit multiplier coupling."""
    M = rng.standard_normal((3 * p, 3 * p))
    A_tilde = M @ M.T + 3 * p * np.eye(3 * p)
    cbs = CondensedBoundarySystem(
        A_tilde=A_tilde,
        b_tilde=rng.standard_normal(3 * p) * 5,
        interior_factor=None,
        K_IC=None,
        l_I=None,
        interior_dofs=np.array([], dtype=np.int64),
        contact_dofs=np.arange(3 * p),
    )
    gap = rng.uniform(0.0, 1.0, p)
    if phi is None:
        phi = rng.uniform(0.0, 2.0, p)
    return expand_blocks(cbs, gap, phi)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[n])
