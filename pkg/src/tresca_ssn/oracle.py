"""Reference solver and solution checker for the condensed friction problem.

The oracle minimizes the primal energy

    J(u) = 1/2 u^T A u - b^T u + sum_i phi_i |u_tau^i|   s.t.  u_z^i + g_i >= 0

with an accelerated proximal-gradient method (FISTA with gradient restart).
It shares no code with the Newton solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reduction import CondensedBoundarySystem, ReducedContactSystem


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OracleSolution:
    u: np.ndarray  # (3p,)
    lam: np.ndarray  # (p,)
    objective: float
    residual: float  # relative gradient-mapping norm at u
    iterations: int

    def lifted(self) -> np.ndarray:
        """The 4p vector (u_x, u_y, u_z, lambda) per node."""
        p = self.lam.shape[0]
        x = np.empty((p, 4))
        x[:, :3] = self.u.reshape(p, 3)
        x[:, 3] = self.lam
        return x.ravel()


def energy(A: np.ndarray, b: np.ndarray, phi: np.ndarray, u: np.ndarray) -> float:
    U = u.reshape(-1, 3)
    return float(0.5 * u @ (A @ u) - b @ u + np.sum(phi * np.hypot(U[:, 0], U[:, 1])))


def smooth_gradient(A: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    return A @ u - b


def largest_eigenvalue(A: np.ndarray, iters: int = 1000, rtol: float = 1e-12, seed: int = 0) -> float:
    """Power iteration for the top eigenvalue of a symmetric PSD matrix."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def prox(z: np.ndarray, t: float, phi: np.ndarray, gap: np.ndarray) -> np.ndarray:
    """Prox of t*(friction term + half-line indicator), node by node."""
    Z = z.reshape(-1, 3)
    out = np.empty_like(Z)
    nz = np.hypot(Z[:, 0], Z[:, 1])
    shrink = np.maximum(0.0, 1.0 - t * phi / np.where(nz > 0, nz, 1.0))
    out[:, :2] = shrink[:, None] * Z[:, :2]
    out[:, 2] = np.maximum(Z[:, 2], -gap)
    return out.ravel()


def oracle_solve(
    cbs: CondensedBoundarySystem,
    gap,
    phi,
    tol: float = 1e-10,
    max_iter: int = 2_000_000,
    max_p: int = 1000,
) -> OracleSolution:
    """Solve the condensed problem to a relative gradient-mapping residual below ``tol``.

    The residual is ``L * |u - T(u)|_inf / |b|_inf`` with ``T`` one
    proximal-gradient step of length ``1/L``; it vanishes exactly at the
    minimizer. Multipliers are read off as the normal force ``(A u - b)_z``.
    """
    A, b = cbs.A_tilde, cbs.b_tilde
    p = b.shape[0] // 3
    if p > max_p:
        raise OracleError(f"oracle is meant for small problems (p={p} > {max_p})")
    gap = np.broadcast_to(np.asarray(gap, dtype=float), (p,))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (p,))

    L = 1.01 * largest_eigenvalue(A)
    t = 1.0 / L
    scale = max(np.max(np.abs(b)), np.finfo(float).tiny)

    def step(y):
        return prox(y - t * smooth_gradient(A, b, y), t, phi, gap)

    u = prox(np.zeros_like(b), t, phi, gap)
    y = u.copy()
    theta = 1.0
    residual = np.inf
    for k in range(1, max_iter + 1):
        u_new = step(y)
        # gradient restart: drop momentum when it points uphill
        if (y - u_new) @ (u_new - u) > 0:
            theta = 1.0
            y = u
            u_new = step(y)
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        y = u_new + ((theta - 1.0) / theta_new) * (u_new - u)
        u, theta = u_new, theta_new
        if k % 25 == 0:
            residual = L * np.max(np.abs(u - step(u))) / scale
            if residual <= tol:
                break
    else:
        raise OracleError(f"no convergence in {max_iter} iterations (residual {residual:.3g})")

    lam = (A @ u - b).reshape(p, 3)[:, 2]
    return OracleSolution(
        u=u,
        lam=lam,
        objective=energy(A, b, phi, u),
        residual=float(residual),
        iterations=k,
    )


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    friction_bound: float  # max(|f_12| - phi, 0)
    slip_alignment: float  # max |f_12 + phi * x_12/|x_12|| over slipping nodes
    normal_equilibrium: float  # max |f_3|
    feasibility: float  # max violation of lambda >= 0 and u_z + g >= 0
    complementarity: float  # max |lambda (u_z + g)| / max(1, |b|_inf)
    tol: float

    def violations(self) -> dict[str, float]:
        return {
            name: value
            for name, value in self.as_dict().items()
            if not value <= self.tol
        }

    def as_dict(self) -> dict[str, float]:
        return {
            "friction_bound": self.friction_bound,
            "slip_alignment": self.slip_alignment,
            "normal_equilibrium": self.normal_equilibrium,
            "feasibility": self.feasibility,
            "complementarity": self.complementarity,
        }

    @property
    def passed(self) -> bool:
        return not self.violations()


def residual_check(
    sys: ReducedContactSystem, x: np.ndarray, tol: float, slip_threshold: float = 1e-8
) -> ResidualReport:
    """Measure how far ``x`` is from solving the contact problem.

    ``f = A x - b`` carries the force balance (with the contact pressure
    already subtracted in the normal row) and ``f_4 = u_z + g``.
    """
    x = np.asarray(x, dtype=float)
    X = x.reshape(-1, 4)
    F = sys.residual(x).reshape(-1, 4)
    phi = sys.phi
    lam = X[:, 3]
    gap_now = F[:, 3]

    nf = np.hypot(F[:, 0], F[:, 1])
    friction_bound = float(np.max(np.maximum(nf - phi, 0.0), initial=0.0))

    nx = np.hypot(X[:, 0], X[:, 1])
    slip = nx > slip_threshold
    if np.any(slip):
        dirn = X[slip, :2] / nx[slip, None]
        mis = F[slip, :2] + phi[slip, None] * dirn
        slip_alignment = float(np.max(np.hypot(mis[:, 0], mis[:, 1])))
    else:
        slip_alignment = 0.0

    scale = max(1.0, float(np.max(np.abs(sys.b))))
    return ResidualReport(
        friction_bound=friction_bound,
        slip_alignment=slip_alignment,
        normal_equilibrium=float(np.max(np.abs(F[:, 2]))),
        feasibility=float(max(0.0, np.max(-lam), np.max(-gap_now))),
        complementarity=float(np.max(np.abs(lam * gap_now)) / scale),
        tol=tol,
    )
