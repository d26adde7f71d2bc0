"""Lattice discretisations of the Heisenberg Laplacian and the Landau Hamiltonian.

The Heisenberg form  int |X1 u|^2 + |X2 u|^2  with

    X1 = d1 + (x2/2) d3,    X2 = d2 - (x1/2) d3

is discretised by forward differences on the zero-extended lattice function,
giving a sparse factor G and A = G^T G. Dirichlet data is built in: every
lattice base point whose stencil touches an interior node contributes a row,
including base points outside the cylinder.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry2d import DistanceField, Polygon, distance_field


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid3D:
    """Interior nodes of omega x (a, b).

    ``index[k, j, i]`` is the linear index of the node (x1_i, x2_j, x3_k) or -1;
    the array carries one padding layer on the high side of every axis. Node
    numbering is lexicographic with x3 outer and x1 inner.
    """

    polygon: Polygon
    a: float
    b: float
    h_plane: float
    h_axial: float
    field: DistanceField
    index: np.ndarray
    x1: np.ndarray  # lattice coordinates, padded
    x2: np.ndarray
    x3: np.ndarray

    @property
    def n(self) -> int:
        return int(self.index.max()) + 1

    @property
    def cell_volume(self) -> float:
        return self.h_plane**2 * self.h_axial

    def nodes(self) -> np.ndarray:
        k, j, i = np.nonzero(self.index >= 0)
        return np.column_stack([self.x1[i], self.x2[j], self.x3[k]])

    def node_delta(self) -> np.ndarray:
        """Boundary distance of the cross-section point of every node."""
        k, j, i = np.nonzero(self.index >= 0)
        return self.field.values[j, i]

    def volume_estimate(self) -> float:
        return self.n * self.cell_volume


def build_grid(poly: Polygon, a: float, b: float, h_plane: float, h_axial: float) -> Grid3D:
    if not a < b:
        raise GridError(f"axial interval must satisfy a < b, got a={a}, b={b}")
    if not (h_plane > 0 and h_axial > 0):
        raise GridError(f"spacings must be positive, got h_plane={h_plane}, h_axial={h_axial}")
    f = distance_field(poly, h_plane)
    nx, ny = f.grid.shape
    # interior axial nodes a + k*h, 1 <= k <= kmax, strictly below b
    kmax = int(np.ceil((b - a) / h_axial - 1e-9)) - 1
    if kmax < 1 or not np.any(f.mask):
        raise GridError(
            f"no interior nodes for h_plane={h_plane}, h_axial={h_axial}; try a finer spacing "
            f"(e.g. h/2 = {h_plane / 2:g}, {h_axial / 2:g})"
        )
    mask3 = np.zeros((kmax + 2, ny + 1, nx + 1), dtype=bool)
    mask3[1 : kmax + 1, :ny, :nx] = f.mask[None, :, :]
    index = -np.ones(mask3.shape, dtype=np.int64)
    index[mask3] = np.arange(np.count_nonzero(mask3))
    x1 = f.grid.origin[0] + np.arange(nx + 1) * h_plane
    x2 = f.grid.origin[1] + np.arange(ny + 1) * h_plane
    x3 = a + np.arange(kmax + 2) * h_axial
    return Grid3D(poly, float(a), float(b), float(h_plane), float(h_axial), f, index, x1, x2, x3)


@dataclass(frozen=True)
class HeisenbergGradientFactor:
    """Stacked discrete (X1, X2); a_h[u] = |G u|^2 * cell volume."""

    G: sp.csr_matrix
    n_x1_rows: int


def _direction_rows(grid: Grid3D, axis: int):
    """COO pieces of the forward-difference rows for X1 (axis=0) or X2 (axis=1)."""
    idx = grid.index
    K, J, I = idx.shape
    base = idx[: K - 1, : J - 1, : I - 1]
    plane = idx[: K - 1, : J - 1, 1:] if axis == 0 else idx[: K - 1, 1:, : I - 1]
    up = idx[1:, : J - 1, : I - 1]
    keep = (base >= 0) | (plane >= 0) | (up >= 0)
    kk, jj, ii = np.nonzero(keep)
    if axis == 0:
        coef = grid.x2[jj] / 2.0
    else:
        coef = -grid.x1[ii] / 2.0
    hp, ha = grid.h_plane, grid.h_axial
    b_, p_, u_ = base[keep], plane[keep], up[keep]
    rows, cols, vals = [], [], []
    r = np.arange(len(kk))
    for col, val in ((b_, -1.0 / hp - coef / ha), (p_, np.full(len(r), 1.0 / hp)), (u_, coef / ha)):
        ok = col >= 0
        rows.append(r[ok])
        cols.append(col[ok])
        vals.append(val[ok])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), len(r)


def heisenberg_factor(grid: Grid3D) -> HeisenbergGradientFactor:
    r1, c1, v1, m1 = _direction_rows(grid, 0)
    r2, c2, v2, m2 = _direction_rows(grid, 1)
    G = sp.coo_matrix(
        (np.concatenate([v1, v2]), (np.concatenate([r1, r2 + m1]), np.concatenate([c1, c2]))),
        shape=(m1 + m2, grid.n),
    ).tocsr()
    return HeisenbergGradientFactor(G, m1)


def symmetrize_exact(A: sp.spmatrix) -> sp.csr_matrix:
    """(A + A^T)/2; IEEE addition commutes, so the result is bitwise symmetric."""
    A = sp.csr_matrix(A)
    S = ((A + A.T) * 0.5).tocsr()
    S.sort_indices()
    return S


def assemble_heisenberg(grid: Grid3D) -> tuple[sp.csr_matrix, HeisenbergGradientFactor]:
    """A_h = G^T G (entries carry 1/h^2 factors) and the factor G."""
    fac = heisenberg_factor(grid)
    A = symmetrize_exact(fac.G.T @ fac.G)
    return A, fac


def heisenberg_matrix(poly: Polygon, a: float, b: float, h_plane: float, h_axial: float | None = None):
    grid = build_grid(poly, a, b, h_plane, h_plane if h_axial is None else h_axial)
    A, _ = assemble_heisenberg(grid)
    return A, grid


# --- Landau Hamiltonian on a square ---------------------------------------------


@dataclass(frozen=True)
class MagneticGrid:
    half_width: float
    h: float
    n_side: int

    def points(self) -> np.ndarray:
        x = -self.half_width + self.h * np.arange(1, self.n_side + 1)
        X2, X1 = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])


def magnetic_hermitian(
    B: float, half_width: float, h: float, gauge: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
) -> tuple[sp.csr_matrix, MagneticGrid]:
    """Complex Hermitian link-phase discretisation of (i grad + B A)^2 on (-L, L)^2.

    A(x) = (-x2, x1)/2. Each link x -> y carries the phase B * int_x^y A.dl;
    ``gauge`` adds the gradient of chi(x1, x2), i.e. B*(chi(y) - chi(x)).
    """
    if B < 0:
        raise ValueError(f"B must be nonnegative, got {B}")
    if not (half_width > 0 and h > 0):
        raise ValueError("half_width and h must be positive")
    if B * h * h > 0.5:
        raise ValueError(f"flux per plaquette B*h^2 = {B * h * h:g} exceeds 0.5; refine h")
    n = int(round(2 * half_width / h)) - 1
    if n < 1:
        raise ValueError("no interior nodes; refine h")
    mg = MagneticGrid(float(half_width), float(h), n)
    x = -half_width + h * np.arange(1, n + 1)
    idx = np.arange(n * n).reshape(n, n)  # [j, i]
    X2, X1 = np.meshgrid(x, x, indexing="ij")
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [np.full(n * n, 4.0 / h**2, dtype=complex)]
    # horizontal links (i -> i+1): A1 = -x2/2 is constant along the link
    for (src, dst, theta) in (
        (idx[:, :-1], idx[:, 1:], -B * X2[:, :-1] * h / 2.0),
        (idx[:-1, :], idx[1:, :], B * X1[:-1, :] * h / 2.0),
    ):
        theta = theta.copy()
        if gauge is not None:
            xs1, xs2 = X1.ravel()[src.ravel()], X2.ravel()[src.ravel()]
            xd1, xd2 = X1.ravel()[dst.ravel()], X2.ravel()[dst.ravel()]
            theta = theta.ravel() + B * (gauge(xd1, xd2) - gauge(xs1, xs2))
        theta = theta.ravel()
        hop = -np.exp(1j * theta) / h**2
        rows += [src.ravel(), dst.ravel()]
        cols += [dst.ravel(), src.ravel()]
        vals += [hop, np.conj(hop)]
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    ).tocsr()
    return H, mg


def realify(H: sp.spmatrix) -> sp.csr_matrix:
    """[[Re H, -Im H], [Im H, Re H]]: real symmetric, each eigenvalue doubled."""
    H = sp.csr_matrix(H)
    R, I = H.real, H.imag
    M = sp.bmat([[R, -I], [I, R]], format="csr")
    return symmetrize_exact(M)


def assemble_magnetic2d(B: float, half_width: float, h: float, gauge=None) -> sp.csr_matrix:
    H, _ = magnetic_hermitian(B, half_width, h, gauge)
    return realify(H)


# --- Matrix Market dump -----------------------------------------------------------


def dump_matrix_market(A: sp.spmatrix, path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), symmetry="symmetric", precision=17)


def load_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(Path(path))))
