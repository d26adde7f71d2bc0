"""Cross-section geometry: polygons, boundary distance, in-radius and l(omega).

All lengths are dimensionless. A cross-section is a simple counterclockwise
polygon; the lattice used everywhere in the package is anchored at the lower
left corner of the polygon's bounding box, so dilating the polygon by ``t``
together with the spacing maps nodes onto nodes exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid polygons or impossible geometric requests."""


def _segments_cross(p1, p2, q1, q2) -> np.ndarray:
    """Vectorised closed-segment intersection test (arrays of shape (k, 2))."""

    def orient(a, b, c):
        return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

    def on_segment(a, b, c):
        return (
            (np.minimum(a[:, 0], b[:, 0]) <= c[:, 0])
            & (c[:, 0] <= np.maximum(a[:, 0], b[:, 0]))
            & (np.minimum(a[:, 1], b[:, 1]) <= c[:, 1])
            & (c[:, 1] <= np.maximum(a[:, 1], b[:, 1]))
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    touch = (
        ((d1 == 0) & on_segment(q1, q2, p1))
        | ((d2 == 0) & on_segment(q1, q2, p2))
        | ((d3 == 0) & on_segment(p1, p2, q1))
        | ((d4 == 0) & on_segment(p1, p2, q2))
    )
    return proper | touch


@dataclass(frozen=True)
class Polygon:
    """Simple counterclockwise polygon. Construction validates the invariants."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError(f"vertices must be an (n, 2) array, got shape {v.shape}")
        if len(v) < 3:
            raise GeometryError(f"polygon needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        n = len(v)
        a = v
        b = np.roll(v, -1, axis=0)
        if np.any(np.all(a == b, axis=1)):
            raise GeometryError("polygon has repeated consecutive vertices")
        # every pair of non-adjacent edges must be disjoint
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
        if len(i):
            hit = _segments_cross(a[i], b[i], a[j], b[j])
            if np.any(hit):
                k = int(np.argmax(hit))
                raise GeometryError(f"polygon is not simple: edges {i[k]} and {j[k]} intersect")
        signed = 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))
        if signed <= 0:
            raise GeometryError(f"polygon must be counterclockwise with positive area (signed area {signed:g})")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def scaled(self, t: float) -> "Polygon":
        return Polygon(self.vertices * t)

    @classmethod
    def from_json(cls, text: str) -> "Polygon":
        return cls(np.asarray(json.loads(text), dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.vertices.tolist())


def unit_square() -> Polygon:
    return Polygon([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def rectangle(width: float, height: float) -> Polygon:
    return Polygon([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0)) -> Polygon:
    """Regular n-gon with vertices on the circle of the given radius."""
    t = 2 * np.pi * np.arange(n) / n
    return Polygon(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def l_shape() -> Polygon:
    return Polygon([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]])


def load_polygon(path) -> Polygon:
    return Polygon.from_json(Path(path).read_text())


def polygon_area(poly: Polygon) -> float:
    """Shoelace area of a validated polygon."""
    a, b = poly.edges
    return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))


def is_convex(poly: Polygon, tol: float = 1e-12) -> bool:
    a = poly.vertices
    b = np.roll(a, -1, axis=0)
    c = np.roll(a, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - b[:, 0])
    scale = float(np.max(np.abs(a))) ** 2 or 1.0
    return bool(np.all(cross >= -tol * scale))


def _edge_distances(poly: Polygon, pts: np.ndarray) -> np.ndarray:
    """Distance from each point to the boundary, min over edges (segments)."""
    a, b = poly.edges
    best = np.full(len(pts), np.inf)
    for p, q in zip(a, b):
        d = q - p
        t = ((pts - p) @ d) / float(d @ d)
        np.clip(t, 0.0, 1.0, out=t)
        proj = p + t[:, None] * d
        np.minimum(best, np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1]), out=best)
    return best


def _inside_even_odd(poly: Polygon, pts: np.ndarray) -> np.ndarray:
    a, b = poly.edges
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for p, q in zip(a, b):
        straddles = (p[1] > y) != (q[1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = p[0] + (y - p[1]) * (q[0] - p[0]) / (q[1] - p[1])
        inside ^= straddles & (x < xcross)
    return inside


def distances(poly: Polygon, pts) -> np.ndarray:
    """Boundary distance for many points; 0 outside or on the boundary."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = _edge_distances(poly, pts)
    lo, hi = poly.bbox
    # points within rounding distance of an edge count as boundary points
    eps = 1e-10 * float(np.max(hi - lo))
    inside = _inside_even_odd(poly, pts) & (d > eps)
    return np.where(inside, d, 0.0)


def distance_to_boundary(poly: Polygon, p) -> float:
    return float(distances(poly, [p])[0])


@dataclass(frozen=True)
class Grid2D:
    """Uniform lattice x = origin + (i, j) * h over the polygon's bounding box."""

    origin: tuple[float, float]
    h: float
    shape: tuple[int, int]  # number of lattice points along x1, x2

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x1 = self.origin[0] + np.arange(self.shape[0]) * self.h
        x2 = self.origin[1] + np.arange(self.shape[1]) * self.h
        return x1, x2

    def points(self) -> np.ndarray:
        """All lattice points, x2 outer and x1 inner (row-major over (j, i))."""
        x1, x2 = self.coords()
        X2, X1 = np.meshgrid(x2, x1, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])


def grid_for(poly: Polygon, h: float) -> Grid2D:
    if not h > 0:
        raise GeometryError(f"spacing must be positive, got {h}")
    lo, hi = poly.bbox
    n = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    return Grid2D((float(lo[0]), float(lo[1])), float(h), (int(n[0]), int(n[1])))


@dataclass(frozen=True)
class DistanceField:
    """Exact boundary distances at the lattice points of ``grid``.

    ``values`` has shape ``(shape[1], shape[0])`` (x2 rows, x1 columns) and is
    zero outside the open polygon.
    """

    polygon: Polygon
    grid: Grid2D
    values: np.ndarray
    area: float = field(default=0.0)

    @property
    def mask(self) -> np.ndarray:
        return self.values > 0

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.mask]

    @property
    def interior_points(self) -> np.ndarray:
        return self.grid.points()[self.mask.ravel()]

    @property
    def cell_area(self) -> float:
        return self.grid.h**2


def distance_field(poly: Polygon, h: float) -> DistanceField:
    grid = grid_for(poly, h)
    vals = distances(poly, grid.points()).reshape(grid.shape[1], grid.shape[0])
    vals.setflags(write=False)
    return DistanceField(poly, grid, vals, polygon_area(poly))


def inradius(field: DistanceField) -> float:
    """Largest lattice value of the boundary distance.

    Underestimates the true in-radius by at most h*sqrt(2)/2 for convex
    polygons (distance from the incenter to the nearest lattice point).
    """
    if not np.any(field.mask):
        raise GeometryError("no lattice point lies inside the polygon; refine the spacing")
    return float(field.values.max())


def sublevel_area(field: DistanceField, beta: float) -> float:
    """Area of the boundary layer {delta < beta}.

    Estimated as the exact polygon area minus h^2 times the number of nodes
    with delta > beta, so the estimate is exact once beta exceeds every
    nodal distance and the lattice bias stays away from the boundary.
    """
    if not beta > 0:
        raise GeometryError(f"beta must be positive, got {beta}")
    deep = np.count_nonzero(field.values > beta)
    return field.area - deep * field.cell_area


def l_omega(field: DistanceField, height: float, n_beta: int = 64) -> tuple[float, float]:
    """(b - a) * min over a geometric beta grid in (h, R] of |omega^beta| / beta.

    Returns ``(l, beta_star)`` with ``beta_star`` the minimising beta.
    """
    if not height > 0:
        raise GeometryError(f"height must be positive, got {height}")
    if n_beta < 2:
        raise GeometryError(f"n_beta must be at least 2, got {n_beta}")
    R = inradius(field)
    h = field.grid.h
    betas = np.geomspace(h, R, n_beta + 1)[1:] if R > h else np.array([R])
    quot = np.array([sublevel_area(field, b) / b for b in betas])
    k = int(np.argmin(quot))
    return height * float(quot[k]), float(betas[k])


@dataclass(frozen=True)
class GeometrySummary:
    area_omega: float
    inradius: float
    l_omega: float
    height: float
    volume_Omega: float
    beta_star: float = float("nan")

    CSV_HEADER = "area,inradius,l_omega,height,volume"

    def csv_row(self) -> str:
        return ",".join(repr(float(x)) for x in (self.area_omega, self.inradius, self.l_omega, self.height, self.volume_Omega))


def summarize(poly: Polygon, a: float, b: float, h: float, n_beta: int = 64) -> GeometrySummary:
    if not a < b:
        raise GeometryError(f"need a < b, got a={a}, b={b}")
    field_ = distance_field(poly, h)
    area = polygon_area(poly)
    R = inradius(field_)
    l, beta_star = l_omega(field_, b - a, n_beta)
    return GeometrySummary(area, R, l, b - a, area * (b - a), beta_star)


def convex_l_omega(area: float, inradius_: float, height: float) -> float:
    """l(omega) for convex cross-sections, where |omega^beta|/beta decreases in beta."""
    return height * area / inradius_


__all__ = [
    "GeometryError",
    "Polygon",
    "Grid2D",
    "DistanceField",
    "GeometrySummary",
    "unit_square",
    "rectangle",
    "regular_polygon",
    "l_shape",
    "load_polygon",
    "polygon_area",
    "is_convex",
    "distances",
    "distance_to_boundary",
    "grid_for",
    "distance_field",
    "inradius",
    "sublevel_area",
    "l_omega",
    "summarize",
    "convex_l_omega",
]
