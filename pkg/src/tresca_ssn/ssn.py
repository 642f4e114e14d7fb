"""Semismooth* Newton solver for 0 in A x - b + Q(x) with Tresca friction.

Per contact node the unknown block is x^i = (u_x, u_y, u_z, lambda) and

    Q^i(x^i) = phi_i * d||x_12^i||  x  {0}  x  N_{R+}(x_4^i).

Each iteration runs an approximation step (three closed-form convex
subproblems per node, giving a point of the graph of the enhanced map
(x, d) -> (f(x) + Q(d), x - d)) followed by a Newton step on the linear
system built from the branch matrices G, H.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .reduction import ReducedContactSystem

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
SINGULAR_NEWTON = "singular_newton"


class SingularNewtonError(np.linalg.LinAlgError):
    pass


# --------------------------------------------------------------------------
# per-node subproblems


def prox_tangential(w, g_vec, phi: float) -> np.ndarray:
    """Minimizer of 0.5|v|^2 + <g_vec, v> + phi*|w + v| over v in R^2.

    Substituting d = w + v turns this into the prox of phi*|.| at
    s = w - g_vec (block soft thresholding). In the sticking case the
    returned v is exactly -w, so w + v == 0 in floating point.
    """
    w = np.asarray(w, dtype=float)
    s = w - np.asarray(g_vec, dtype=float)
    ns = np.hypot(s[0], s[1])
    if ns <= phi:
        return -w
    return (1.0 - phi / ns) * s - w


def approx_normal(f3: float) -> float:
    return -float(f3)


def approx_multiplier(f4: float, x4: float) -> float:
    """Minimizer of 0.5 v^2 + f4*v subject to x4 + v >= 0.

    ``f4`` is the fourth residual component u_z + g (just u_z for zero gap).
    """
    return max(-float(f4), -float(x4))


# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ApproxStepResult:
    x_hat: np.ndarray
    d_hat: np.ndarray
    v_hat: np.ndarray
    f_hat: np.ndarray  # f(x_hat) = A x_hat - b, kept for diagnostics

    @property
    def y_hat(self) -> tuple[np.ndarray, np.ndarray]:
        return -self.v_hat, -self.v_hat


def approximation_step(x: np.ndarray, sys: ReducedContactSystem) -> ApproxStepResult:
    x = np.asarray(x, dtype=float)
    f = sys.residual(x)
    X = x.reshape(-1, 4)
    F = f.reshape(-1, 4)
    phi = sys.phi

    w = X[:, :2]
    s = w - F[:, :2]
    ns = np.hypot(s[:, 0], s[:, 1])
    stick = ns <= phi
    scale = np.where(stick, 0.0, 1.0 - phi / np.where(stick, 1.0, ns))
    V = np.empty_like(X)
    V[:, :2] = np.where(stick[:, None], -w, scale[:, None] * s - w)
    V[:, 2] = -F[:, 2]
    V[:, 3] = np.maximum(-F[:, 3], -X[:, 3])

    v = V.ravel()
    return ApproxStepResult(x_hat=x, d_hat=x + v, v_hat=v, f_hat=f)


@dataclass(frozen=True, eq=False)
class NewtonMatrices:
    """Block-diagonal branch matrices; G is diagonal, H has 2x2 + scalar blocks."""

    G_diag: np.ndarray  # (4p,)
    H_blocks: np.ndarray  # (p, 4, 4)
    stick: np.ndarray  # (p,) bool
    contact: np.ndarray  # (p,) bool, d_4 > 0

    @property
    def p(self) -> int:
        return self.stick.shape[0]

    def G_blocks(self) -> np.ndarray:
        blocks = np.zeros((self.p, 4, 4))
        idx = np.arange(4)
        blocks[:, idx, idx] = self.G_diag.reshape(-1, 4)
        return blocks

    @staticmethod
    def _block_diag(blocks: np.ndarray) -> np.ndarray:
        p = blocks.shape[0]
        M = np.zeros((4 * p, 4 * p))
        for i in range(p):
            M[4 * i : 4 * i + 4, 4 * i : 4 * i + 4] = blocks[i]
        return M

    def G(self) -> np.ndarray:
        return np.diag(self.G_diag)

    def H(self) -> np.ndarray:
        return self._block_diag(self.H_blocks)


def build_GH(d_hat: np.ndarray, phi) -> NewtonMatrices:
    D = np.asarray(d_hat, dtype=float).reshape(-1, 4)
    p = D.shape[0]
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (p,))
    if np.any(D[:, 3] < 0):
        raise ValueError("d_hat has a negative multiplier component")

    d1, d2 = D[:, 0], D[:, 1]
    stick = (d1 == 0.0) & (d2 == 0.0)
    contact = D[:, 3] > 0.0

    Gd = np.ones((p, 4))
    Gd[stick, :2] = 0.0
    Gd[~contact, 3] = 0.0

    H = np.zeros((p, 4, 4))
    H[stick, 0, 0] = 1.0
    H[stick, 1, 1] = 1.0
    sl = ~stick
    nd = np.hypot(d1[sl], d2[sl])
    c = phi[sl] / nd**3
    H[sl, 0, 0] = c * d2[sl] ** 2
    H[sl, 0, 1] = -c * d1[sl] * d2[sl]
    H[sl, 1, 0] = H[sl, 0, 1]
    H[sl, 1, 1] = c * d1[sl] ** 2
    H[~contact, 3, 3] = 1.0
    return NewtonMatrices(G_diag=Gd.ravel(), H_blocks=H, stick=stick, contact=contact)


def _add_block_diag(M: np.ndarray, blocks: np.ndarray) -> None:
    p = blocks.shape[0]
    rows = 4 * np.arange(p)[:, None, None] + np.arange(4)[None, :, None]
    cols = 4 * np.arange(p)[:, None, None] + np.arange(4)[None, None, :]
    M[rows, cols] += blocks


def _lu_solve_checked(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        # singularity is reported through SingularNewtonError below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise SingularNewtonError("Newton matrix is exactly singular")
    z = sla.lu_solve((lu, piv), rhs)
    if not np.all(np.isfinite(z)):
        raise SingularNewtonError("Newton solve produced non-finite values")
    return z


def newton_matrix(sys: ReducedContactSystem, nm: NewtonMatrices) -> np.ndarray:
    """The reduced 4p x 4p Newton matrix A G + H."""
    M = sys.A * nm.G_diag[None, :]
    _add_block_diag(M, nm.H_blocks)
    return M


def newton_step(
    sys: ReducedContactSystem,
    ar: ApproxStepResult,
    nm: NewtonMatrices,
    full: bool = False,
) -> np.ndarray:
    """Next iterate x_hat - z_1 where [[A, -H], [I, G]] z = (-v, -v).

    The default path eliminates z_1 and solves (A G + H) z_2 = (I - A) v,
    giving x_next = d_hat + G z_2. ``full=True`` solves the 8p system as is.
    """
    v = ar.v_hat
    if full:
        m = v.size
        D = np.zeros((2 * m, 2 * m))
        D[:m, :m] = sys.A
        D[:m, m:] = -nm.H()
        D[m:, :m] = np.eye(m)
        D[m:, m:] = nm.G()
        z = _lu_solve_checked(D, np.concatenate([-v, -v]))
        return ar.x_hat - z[:m]
    rhs = v - sys.A @ v
    z2 = _lu_solve_checked(newton_matrix(sys, nm), rhs)
    return ar.d_hat + nm.G_diag * z2


# --------------------------------------------------------------------------


@dataclass
class IterationRecord:
    iteration: int
    norm_v: float
    stick_count: int
    contact_count: int
    time_ms: float


@dataclass
class SolveReport:
    status: str
    iterations: int  # Newton steps taken
    records: list[IterationRecord] = field(default_factory=list)
    x: np.ndarray | None = None
    history: list[np.ndarray] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def final_norm(self) -> float:
        return self.records[-1].norm_v if self.records else float("nan")


def _condition_estimate(M: np.ndarray) -> float:
    try:
        return float(np.linalg.cond(M))
    except np.linalg.LinAlgError:
        return float("inf")


def solve(
    sys: ReducedContactSystem,
    x0: np.ndarray | None = None,
    eps: float = 1e-6,
    max_iter: int = 100,
    full_newton: bool = False,
    keep_history: bool = False,
) -> tuple[np.ndarray, SolveReport]:
    """Run the semismooth* Newton iteration until ||v_hat|| <= eps.

    One record is written per approximation step. ``report.iterations`` is
    the number of Newton steps, i.e. the index k of the accepted iterate.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    x = np.zeros(4 * sys.p) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (4 * sys.p,):
        raise ValueError(f"x0 must have shape ({4 * sys.p},), got {x.shape}")

    report = SolveReport(status=MAX_ITER, iterations=0)
    for k in range(max_iter):
        t0 = time.perf_counter()
        if keep_history:
            report.history.append(x.copy())
        ar = approximation_step(x, sys)
        norm_v = float(np.linalg.norm(ar.v_hat))
        D = ar.d_hat.reshape(-1, 4)
        stick = int(np.count_nonzero((D[:, 0] == 0.0) & (D[:, 1] == 0.0)))
        contact = int(np.count_nonzero(D[:, 3] > 0.0))
        rec = IterationRecord(k, norm_v, stick, contact, 0.0)
        report.records.append(rec)
        report.iterations = k
        log.debug("iter %d  |v|=%.3e  stick=%d  contact=%d", k, norm_v, stick, contact)
        if norm_v <= eps:
            rec.time_ms = 1e3 * (time.perf_counter() - t0)
            report.status = CONVERGED
            break
        nm = build_GH(ar.d_hat, sys.phi)
        try:
            x = newton_step(sys, ar, nm, full=full_newton)
        except SingularNewtonError as exc:
            rec.time_ms = 1e3 * (time.perf_counter() - t0)
            report.status = SINGULAR_NEWTON
            report.diagnostics = {
                "iteration": k,
                "message": str(exc),
                "stick_count": int(nm.stick.sum()),
                "slide_count": int((~nm.stick).sum()),
                "contact_count": int(nm.contact.sum()),
                "no_contact_count": int((~nm.contact).sum()),
                "condition_estimate": _condition_estimate(newton_matrix(sys, nm)),
            }
            log.warning("singular Newton matrix at iteration %d", k)
            break
        rec.time_ms = 1e3 * (time.perf_counter() - t0)
    else:
        report.iterations = max_iter

    report.x = x
    return x, report
