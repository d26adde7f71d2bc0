"""Discrete Hardy constant of a cross-section.

The best constant c in  int (u/delta)^2 <= c^2 int |grad u|^2  is approximated
from below on the lattice: with K the 5-point Dirichlet stiffness matrix and
W = diag(1/delta^2) on the trial nodes, c_est^2 is the largest eigenvalue of the
pencil W u = rho K u, found by power iteration on K^{-1} W with conjugate
gradient inner solves.

The supremum defining c is not attained, so lattice values creep towards the
continuum constant only logarithmically in 1/h. c_est is never an upper bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .geometry2d import DistanceField, Polygon, distance_field

log = logging.getLogger(__name__)

C_FLOOR = 2.0
C_WORST = 4.0


class HardyConvergenceError(RuntimeError):
    def __init__(self, msg, last_residual):
        super().__init__(f"{msg} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


@dataclass
class HardyEstimate:
    c_est: float
    mesh: float
    rayleigh_residual: float
    iterations: int = 0
    refinement_history: list[tuple[float, float]] = field(default_factory=list)
    vector: np.ndarray | None = field(default=None, repr=False)

    CSV_HEADER = "h,c_est,residual"


def trial_mask(field_: DistanceField) -> np.ndarray:
    """Nodes carrying trial values: interior and at least h/2 from the boundary.

    A lattice point that happens to sit much closer than h to an edge would
    otherwise dominate the quotient through its 1/delta^2 weight; such nodes are
    boundary nodes at lattice resolution. Fewer trial functions keep c_est a
    lower estimate.
    """
    return field_.values >= 0.5 * field_.grid.h


def stiffness_matrix(field_: DistanceField) -> sp.csr_matrix:
    """5-point Dirichlet Laplacian on the trial nodes (entries carry 1/h^2)."""
    mask = trial_mask(field_)
    ny, nx = mask.shape
    idx = -np.ones(mask.shape, dtype=np.int64)
    idx[mask] = np.arange(np.count_nonzero(mask))
    n = int(idx.max()) + 1
    h2 = field_.grid.h ** 2
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0 / h2)]
    for dj, di in ((0, 1), (1, 0)):
        a = idx[: ny - dj, : nx - di]
        b = idx[dj:, di:]
        both = (a >= 0) & (b >= 0)
        i, j = a[both], b[both]
        rows += [i, j]
        cols += [j, i]
        vals += [np.full(len(i), -1.0 / h2)] * 2
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return K.tocsr()


def weight_diagonal(field_: DistanceField) -> np.ndarray:
    return 1.0 / field_.values[trial_mask(field_)] ** 2


def estimate_hardy_constant(
    field_: DistanceField, tol: float = 1e-8, max_iter: int = 10_000, cg_rtol: float = 1e-12
) -> HardyEstimate:
    """Largest generalized Rayleigh quotient int (u/delta)^2 / int |grad u|^2 on the lattice."""
    w = weight_diagonal(field_)
    n = len(w)
    if n < 10:
        raise ValueError(f"need at least 10 interior nodes for a Hardy estimate, got {n}")
    K = stiffness_matrix(field_)
    # start from delta itself: positive, vanishing at the boundary like the optimisers
    u = field_.values[trial_mask(field_)].copy()
    u /= np.linalg.norm(u)
    rho_old = np.inf
    change = np.inf
    for it in range(1, max_iter + 1):
        y, info = cg(K, w * u, rtol=cg_rtol, atol=0.0, x0=u * rho_old if np.isfinite(rho_old) else None)
        if info != 0:
            raise HardyConvergenceError("inner CG solve failed", change)
        Ky = K @ y
        rho = float(y @ (w * y)) / float(y @ Ky)
        u = y / np.linalg.norm(y)
        change = abs(rho - rho_old) / rho
        rho_old = rho
        if change < tol:
            break
    else:
        raise HardyConvergenceError(f"power iteration did not converge in {max_iter} steps", change)
    Ku = K @ u
    rho = float(u @ (w * u)) / float(u @ Ku)
    resid = float(np.linalg.norm(w * u - rho * Ku) / np.linalg.norm(Ku))
    log.debug("hardy h=%g rho=%.12g iters=%d resid=%.3e", field_.grid.h, rho, it, resid)
    return HardyEstimate(float(np.sqrt(rho)), field_.grid.h, max(resid, change * rho), it, vector=u)


def hardy_refinement(poly: Polygon, spacings, **kw) -> HardyEstimate:
    """Run estimate_hardy_constant over successive spacings; keep the history."""
    history = []
    est = None
    for h in spacings:
        est = estimate_hardy_constant(distance_field(poly, h), **kw)
        history.append((float(h), est.c_est))
    if est is None:
        raise ValueError("need at least one spacing")
    est.refinement_history = history
    return est


def hardy_bound_used(c_est: HardyEstimate | float | None, mode: str) -> float:
    """Value of c fed into the remainder term.

    ``measured`` is a heuristic: lattice estimates sit below the true c, and
    the remainder is only proven with the true constant.
    """
    if mode == "convex":
        return C_FLOOR
    if mode == "worst_case":
        return C_WORST
    if mode == "measured":
        if c_est is None:
            raise ValueError("measured mode needs a Hardy estimate")
        value = c_est.c_est if isinstance(c_est, HardyEstimate) else float(c_est)
        return max(value, C_FLOOR)
    raise ValueError(f"unknown c mode {mode!r}; expected convex, worst_case or measured")
