"""Command line driver: configuration, benchmark runs, level sweeps, exports.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Command-line flags override file values. Recognized keys::

    level                  mesh refinement level (ignored when divisions is set)
    divisions              e_x, e_y, e_z
    youngs_modulus         E
    poisson_ratio          nu
    phi                    friction bound (per unit area when weighting is "area")
    friction_weighting     area | uniform
    eps                    stopping tolerance on |v_hat|
    max_iter               Newton iteration cap
    foundation_z           height of the rigid plane
    right_traction         traction on x = x_max, three numbers
    top_traction           traction on z = z_max, three numbers
    export_vtk             output path of the displacement VTK file
    log_csv                output path of the iteration log
    oracle_check           true | false
    full_newton_debug      true | false
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import export
from .fem import (
    ElasticParams,
    TractionSpec,
    apply_dirichlet,
    assemble_stiffness,
    assemble_surface_load,
    contact_area_weights,
)
from .mesh import DomainSpec, HexMesh, MeshLevelSpec, build_mesh, gap_vector
from .oracle import OracleError, oracle_solve, residual_check
from .reduction import assemble_free_displacement, contact_free_dofs, expand_blocks, schur_reduce
from .ssn import CONVERGED, MAX_ITER, SINGULAR_NEWTON, SolveReport, solve

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_MAX_ITER = 4
EXIT_ORACLE = 5

_STATUS_EXIT = {CONVERGED: EXIT_OK, SINGULAR_NEWTON: EXIT_SINGULAR, MAX_ITER: EXIT_MAX_ITER}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    level: int = 2
    divisions: tuple[int, int, int] | None = None
    youngs_modulus: float = 2.1e9
    poisson_ratio: float = 0.277
    phi: float = 1.0
    friction_weighting: str = "area"
    eps: float = 1e-6
    max_iter: int = 100
    foundation_z: float = 0.0
    right_traction: tuple[float, float, float] = (-5e8, 0.0, 0.0)
    top_traction: tuple[float, float, float] = (0.0, 0.0, -1e8)
    export_vtk: str | None = None
    log_csv: str | None = None
    oracle_check: bool = False
    full_newton_debug: bool = False

    def validate(self) -> "RunConfig":
        try:
            if self.divisions is None:
                MeshLevelSpec.from_level(self.level)
            else:
                MeshLevelSpec(level=None, divisions=tuple(self.divisions))
            ElasticParams(self.youngs_modulus, self.poisson_ratio)
            TractionSpec(tuple(self.right_traction), tuple(self.top_traction))
            DomainSpec(foundation_z=self.foundation_z)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.phi >= 0:
            raise ConfigError(f"phi must be nonnegative, got {self.phi}")
        if self.friction_weighting not in ("area", "uniform"):
            raise ConfigError(f"friction_weighting must be 'area' or 'uniform', got {self.friction_weighting!r}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        return self

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ", ".join(repr(v) for v in value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = parse_config_text(text)
        return cls(**values).validate()


_FIELD_TYPES = {
    "level": int,
    "divisions": "int3",
    "youngs_modulus": float,
    "poisson_ratio": float,
    "phi": float,
    "friction_weighting": str,
    "eps": float,
    "max_iter": int,
    "foundation_z": float,
    "right_traction": "float3",
    "top_traction": "float3",
    "export_vtk": str,
    "log_csv": str,
    "oracle_check": bool,
    "full_newton_debug": bool,
}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind in ("int3", "float3"):
            parts = [p for p in raw.replace(",", " ").split() if p]
            if len(parts) != 3:
                raise ValueError(raw)
            conv = int if kind == "int3" else float
            return tuple(conv(p) for p in parts)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw.strip())
    return values


# --------------------------------------------------------------------------


@dataclass
class BenchmarkRow:
    level: int | None
    n: int
    p: int
    assembly_time: float
    reduction_time: float
    solver_time: float
    iterations: int
    status: str


@dataclass
class RunResult:
    row: BenchmarkRow
    mesh: HexMesh
    x: np.ndarray  # 4p solution of the contact problem
    displacement: np.ndarray  # 3n, clamped nodes included
    report: SolveReport
    oracle: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        code = _STATUS_EXIT.get(self.report.status, EXIT_ERROR)
        if code == EXIT_OK and self.oracle and not self.oracle.get("passed", True):
            return EXIT_ORACLE
        return code


def run(config: RunConfig) -> RunResult:
    """Mesh, assemble, condense, solve, then post-process and export."""
    config.validate()
    domain = DomainSpec(foundation_z=config.foundation_z)
    if config.divisions is None:
        spec = MeshLevelSpec.from_level(config.level)
    else:
        spec = MeshLevelSpec(level=None, divisions=tuple(config.divisions))

    t0 = time.perf_counter()
    mesh = build_mesh(domain, spec)
    params = ElasticParams(config.youngs_modulus, config.poisson_ratio)
    tractions = TractionSpec(tuple(config.right_traction), tuple(config.top_traction))
    K = assemble_stiffness(mesh, params)
    l = assemble_surface_load(mesh, tractions)
    gsys = apply_dirichlet(K, l, mesh)
    t1 = time.perf_counter()

    cbs = schur_reduce(gsys, contact_free_dofs(mesh, gsys))
    phi = config.phi * (contact_area_weights(mesh) if config.friction_weighting == "area" else 1.0)
    rsys = expand_blocks(cbs, gap_vector(mesh, domain), phi)
    t2 = time.perf_counter()

    x, report = solve(rsys, eps=config.eps, max_iter=config.max_iter, full_newton=config.full_newton_debug)
    t3 = time.perf_counter()

    X = x.reshape(-1, 4)
    u_C = X[:, :3].ravel()
    displacement = gsys.expand(assemble_free_displacement(cbs, u_C))

    oracle = {}
    if config.oracle_check:
        oracle = _oracle_compare(cbs, rsys, x)

    row = BenchmarkRow(
        level=spec.level,
        n=mesh.n_nodes,
        p=mesh.p,
        assembly_time=t1 - t0,
        reduction_time=t2 - t1,
        solver_time=t3 - t2,
        iterations=report.iterations,
        status=report.status,
    )
    if config.export_vtk:
        export.export_vtk(mesh, displacement, config.export_vtk)
    if config.log_csv:
        export.export_iteration_log(report, config.log_csv)
    return RunResult(row=row, mesh=mesh, x=x, displacement=displacement, report=report, oracle=oracle)


def _oracle_compare(cbs, rsys, x, u_rtol: float = 1e-5, lam_rtol: float = 1e-4) -> dict:
    try:
        sol = oracle_solve(cbs, rsys.gap, rsys.phi, tol=1e-10)
    except OracleError as exc:
        log.warning("oracle check skipped: %s", exc)
        return {"passed": False, "error": str(exc)}
    X = x.reshape(-1, 4)
    u = X[:, :3].ravel()
    u_err = float(np.max(np.abs(u - sol.u)) / max(np.max(np.abs(sol.u)), np.finfo(float).tiny))
    lam_scale = max(float(np.max(np.abs(sol.lam))), np.finfo(float).tiny)
    lam_err = float(np.max(np.abs(X[:, 3] - sol.lam)) / lam_scale)
    cert = residual_check(rsys, x, 1e-8 * float(np.max(np.abs(rsys.b))))
    return {
        "passed": u_err <= u_rtol and lam_err <= lam_rtol and cert.passed,
        "u_rel_err": u_err,
        "lambda_rel_err": lam_err,
        "certificate": cert.as_dict(),
    }


def run_sweep(levels, base: RunConfig | None = None) -> list[BenchmarkRow]:
    levels = list(levels)
    if not levels:
        raise ValueError("level list is empty")
    base = base or RunConfig()
    rows = []
    for level in levels:
        cfg = dataclasses.replace(base, level=level, divisions=None, export_vtk=None, log_csv=None)
        try:
            rows.append(run(cfg).row)
        except Exception as exc:  # keep sweeping, report the failure in the table
            log.error("level %s failed: %s", level, exc)
            n_p = (0, 0)
            rows.append(BenchmarkRow(level, *n_p, float("nan"), float("nan"), float("nan"), -1, f"error: {exc}"))
    return rows


def format_table(rows: list[BenchmarkRow]) -> str:
    header = (
        f"{'level':>5} {'nodes (n)':>10} {'assembly (s)':>13} {'Schur (s)':>10} "
        f"{'nodes (p)':>10} {'solver (s)':>11} {'iters':>6}  status"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.level if r.level is not None else '-':>5} {r.n:>10d} {r.assembly_time:>13.3f} "
            f"{r.reduction_time:>10.3f} {r.p:>10d} {r.solver_time:>11.3f} {r.iterations:>6d}  {r.status}"
        )
    return "\n".join(lines)


def parse_levels(text: str) -> list[int]:
    """``"2..5"`` or ``"2,3,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            levels = list(range(int(a), int(b) + 1))
        else:
            levels = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad level list {text!r}") from None
    if not levels:
        raise ConfigError(f"empty level list {text!r}")
    return levels


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tresca-ssn",
        description="3D elastic contact with Tresca friction solved by a semismooth* Newton method.",
    )
    ap.add_argument("--config", metavar="PATH", help="key = value configuration file")
    ap.add_argument("--level", type=int, help="mesh refinement level")
    ap.add_argument("--eps", type=float, help="stopping tolerance on |v_hat|")
    ap.add_argument("--max-iter", type=int, dest="max_iter")
    ap.add_argument("--phi", type=float, help="friction bound")
    ap.add_argument("--export-vtk", metavar="PATH", dest="export_vtk")
    ap.add_argument("--log-csv", metavar="PATH", dest="log_csv")
    ap.add_argument("--oracle-check", action="store_true", dest="oracle_check", default=None)
    ap.add_argument("--sweep", metavar="A..B", help="run a range of levels and print a table")
    ap.add_argument("--full-newton-debug", action="store_true", dest="full_newton_debug", default=None)
    ap.add_argument("--dump-config", metavar="PATH", help="write the effective configuration")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in ("level", "eps", "max_iter", "phi", "export_vtk", "log_csv", "oracle_check", "full_newton_debug"):
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    if args.level is not None:
        values.pop("divisions", None)
    return RunConfig(**values).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
        levels = parse_levels(args.sweep) if args.sweep else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dump_config:
        with open(args.dump_config, "w") as fh:
            fh.write(config.to_text())

    if levels is not None:
        rows = run_sweep(levels, config)
        print(format_table(rows))
        bad = [r for r in rows if r.status != CONVERGED]
        if not bad:
            return EXIT_OK
        return _STATUS_EXIT.get(bad[0].status, EXIT_ERROR)

    try:
        result = run(config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(format_table([result.row]))
    if result.report.diagnostics:
        print(f"diagnostics: {result.report.diagnostics}", file=sys.stderr)
    if result.oracle:
        print(
            "oracle check: {} (u rel err {:.2e}, lambda rel err {:.2e})".format(
                "passed" if result.oracle.get("passed") else "FAILED",
                result.oracle.get("u_rel_err", float("nan")),
                result.oracle.get("lambda_rel_err", float("nan")),
            )
        )
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
