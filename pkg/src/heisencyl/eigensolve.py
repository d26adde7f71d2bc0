"""Smallest eigenpairs of sparse SPD matrices plus a dense one-sided Jacobi oracle."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_CAP = 2000


class SolverError(RuntimeError):
    pass


@dataclass
class Spectrum:
    """Ascending eigenvalues with per-pair residual norms |A v - lambda v| / |v|."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    vectors: np.ndarray | None = None
    converged: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def all_converged(self) -> bool:
        return self.converged is None or bool(np.all(self.converged))

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1]) if len(self) else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for i, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals), start=1):
            w.writerow([i, repr(float(lam)), repr(float(r))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Spectrum":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and set(rows[0]) != {"index", "eigenvalue", "residual"}:
            raise ValueError(f"spectrum CSV needs columns index,eigenvalue,residual; got {list(rows[0])}")
        lam = np.array([float(r["eigenvalue"]) for r in rows])
        res = np.array([float(r["residual"]) for r in rows])
        order = np.argsort(lam, kind="stable")
        return cls(lam[order], res[order])


def _orthonormalize(Q: np.ndarray, X: np.ndarray | None = None, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of span(Q) orthogonal to the orthonormal X (SVQB, two passes)."""
    for _ in range(2):
        if X is not None:
            Q = Q - X @ (X.T @ Q)
        if Q.shape[1] == 0:
            return Q
        G = Q.T @ Q
        G = 0.5 * (G + G.T)
        s, V = np.linalg.eigh(G)
        keep = s > rtol * max(s.max(), 1e-300)
        Q = Q @ (V[:, keep] / np.sqrt(s[keep]))
    return Q


def _rayleigh_ritz(X: np.ndarray, AX: np.ndarray):
    H = X.T @ AX
    theta, C = np.linalg.eigh(0.5 * (H + H.T))
    return theta, X @ C, AX @ C


def lobpcg_smallest(
    A,
    m: int,
    tol: float = 1e-8,
    max_iter: int = 5000,
    seed: int = 0,
    block: int | None = None,
    preconditioner=None,
) -> Spectrum:
    """m smallest eigenpairs of a symmetric positive (semi)definite matrix.

    Block preconditioned conjugate gradient (LOBPCG) in the orthonormal-basis
    form with soft locking: converged pairs stay in the Rayleigh-Ritz basis
    but stop receiving residual directions. ``preconditioner`` maps an (n, j)
    residual block to search directions; the default is the inverse diagonal.
    A pair counts as converged when |A v - theta v| <= tol * |theta| for unit v.
    Non-convergence is reported through ``Spectrum.converged``, not raised.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if 4 * m > n:
        raise ValueError(f"m={m} exceeds dimension/4 = {n / 4:g}; use the dense solver")
    if not tol > 0:
        raise ValueError("tol must be positive")
    k = block or min(2 * m, m + 10)
    k = max(m, min(k, n // 3))
    if preconditioner is None:
        dinv = 1.0 / A.diagonal()
        if not np.all(np.isfinite(dinv)) or np.any(dinv <= 0):
            dinv = np.ones(n)
        preconditioner = lambda R: R * dinv[:, None]  # noqa: E731

    rng = np.random.default_rng(seed)
    X = _orthonormalize(rng.standard_normal((n, k)))
    theta, X, AX = _rayleigh_ritz(X, A @ X)
    P = None
    it = 0
    res = np.full(k, np.inf)
    for it in range(1, max_iter + 1):
        R = AX - X * theta
        res = np.linalg.norm(R, axis=0)
        conv = res <= tol * np.abs(theta)
        if np.all(conv[:m]):
            break
        if it % 50 == 0:
            log.debug("lobpcg it=%d unconverged=%d max rel res=%.3e", it, np.count_nonzero(~conv[:m]),
                      np.max(res[:m] / np.abs(theta[:m])))
        W = preconditioner(R[:, ~conv])
        Q = _orthonormalize(W if P is None else np.hstack([W, P]), X)
        AQ = A @ Q
        XAQ = X.T @ AQ
        QAQ = Q.T @ AQ
        H = np.block([[np.diag(theta), XAQ], [XAQ.T, 0.5 * (QAQ + QAQ.T)]])
        evals, C = np.linalg.eigh(H)
        theta = evals[:k]
        Cx, Cq = C[:k, :k], C[k:, :k]
        P = Q @ Cq
        AP = AQ @ Cq
        X = X @ Cx + P
        AX = AX @ Cx + AP
        if it % 25 == 0:
            # cancel drift in orthonormality and in the cached product
            X = _orthonormalize(X)
            theta, X, AX = _rayleigh_ritz(X, A @ X)
            P = _orthonormalize(P, X) if P is not None else None

    theta, X, AX = _rayleigh_ritz(X[:, :m], A @ X[:, :m])
    res = np.linalg.norm(AX - X * theta, axis=0)
    conv = res <= tol * np.abs(theta) * (1 + 1e-6)
    if not np.all(conv):
        log.warning("lobpcg: %d of %d pairs unconverged after %d iterations", np.count_nonzero(~conv), m, it)
    return Spectrum(
        theta.copy(),
        res,
        X,
        conv,
        {"solver": "lobpcg", "iterations": it, "tol": tol, "seed": seed, "block": k},
    )


def factorized_preconditioner(A):
    """Apply A^-1 through a sparse LU factorisation; A must be nonsingular."""
    lu = spla.splu(sp.csc_matrix(A))
    return lu.solve


@numba.njit(cache=True)
def _hestenes_sweeps(u, v, want_vectors, tol, max_sweeps):
    """One-sided Jacobi: rotate row pairs of u until all rows are orthogonal.

    u starts as the symmetric A, so after convergence u = V^T A with V the
    accumulated rotation and the row norms are the singular values of A.
    Rows are touched contiguously, which is what makes this fast.
    """
    n, m = u.shape
    norms = np.empty(n)
    for sweep in range(max_sweeps):
        for i in range(n):
            acc = 0.0
            for r in range(m):
                acc += u[i, r] * u[i, r]
            norms[i] = acc
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = norms[p]
                beta = norms[q]
                g = 0.0
                for r in range(m):
                    g += u[p, r] * u[q, r]
                if abs(g) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated += 1
                zeta = (beta - alpha) / (2.0 * g)
                if zeta >= 0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for r in range(m):
                    up = u[p, r]
                    uq = u[q, r]
                    u[p, r] = c * up - s * uq
                    u[q, r] = s * up + c * uq
                if want_vectors:
                    for r in range(m):
                        vp = v[p, r]
                        vq = v[q, r]
                        v[p, r] = c * vp - s * vq
                        v[q, r] = s * vp + c * vq
                norms[p] = alpha - t * g
                norms[q] = beta + t * g
        if rotated == 0:
            return sweep + 1
    return -1


def _is_positive_definite(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


def dense_jacobi_all(A, vectors: bool = False, tol: float = 1e-13, max_sweeps: int = 60) -> Spectrum:
    """Full spectrum of a dense symmetric matrix by one-sided (Hestenes) Jacobi.

    For positive definite A the converged row norms are the eigenvalues. Otherwise
    the rotations are accumulated and lambda_i = u_i . v_i carries the sign.
    """
    a = A.toarray() if sp.issparse(A) else np.array(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"dimension {n} exceeds the dense cap {DENSE_CAP}")
    if not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(np.abs(a).max(), 1e-300)):
        raise ValueError("matrix is not symmetric")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    want = vectors or not _is_positive_definite(a)
    u = a.copy()
    v = np.eye(n) if want else np.zeros((1, 1))
    sweeps = _hestenes_sweeps(u, v, want, tol, max_sweeps)
    if sweeps < 0:
        raise SolverError(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")
    sigma = np.sqrt(np.einsum("ij,ij->i", u, u))
    lam = np.einsum("ij,ij->i", u, v) if want else sigma
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    vecs = None
    if want:
        vecs = v[order].T.copy()
        res = np.linalg.norm(a @ vecs - vecs * lam, axis=0)
    else:
        res = np.zeros(n)
    return Spectrum(lam, res, vecs if vectors else None, np.ones(n, dtype=bool),
                    {"solver": "jacobi", "sweeps": sweeps})


def dense_reference(A, m: int | None = None) -> np.ndarray:
    """LAPACK eigenvalues, used only as a cross-check in tests and diagnostics."""
    a = A.toarray() if sp.issparse(A) else np.asarray(A)
    lam = sla.eigvalsh(a)
    return lam if m is None else lam[:m]
