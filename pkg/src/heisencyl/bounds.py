"""Riesz means, Berezin-type bounds with remainder, and checks on eigenfunctions."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import Spectrum, factorized_preconditioner, lobpcg_smallest
from .geometry2d import DistanceField, GeometrySummary
from .operator import Grid3D, assemble_magnetic2d

# 2^7 * 3^2 * sqrt(3) = 48 * 12^(3/2)
COROLLARY_DENOMINATOR = 2**7 * 3**2 * math.sqrt(3.0)
TOL_BOUND = 0.05


def _eigs(spec) -> np.ndarray:
    return np.asarray(spec.eigenvalues if isinstance(spec, Spectrum) else spec, dtype=float)


def riesz_mean(spec, lam: float) -> float:
    """sum_k (lam - lambda_k)_+ over the computed eigenvalues."""
    ev = _eigs(spec)
    return float(np.sum(np.clip(lam - ev, 0.0, None)))


def berezin_rhs(volume: float, lam: float) -> float:
    return volume * lam**3 / 96.0


def theorem_exponents(c: float) -> tuple[float, float, float]:
    """(p, q, r) = ((2c+5)/(c+2), (2c+2)/(c+2), c/(c+2))."""
    return (2 * c + 5) / (c + 2), (2 * c + 2) / (c + 2), c / (c + 2)


def theorem_remainder(volume: float, l: float, c: float, lam: float) -> float:
    p, q, r = theorem_exponents(c)
    return lam**p * (1 + 2 / c) / 96.0 * l**q * volume ** (-r) * (4 * c + 4) ** (-q)


def theorem_rhs(volume: float, l: float, c: float, lam: float) -> float:
    """max{0, V lam^3/96 - remainder} with the Hardy constant c >= 2."""
    if c < 2:
        raise ValueError(f"Hardy constant c={c} is below the admissible floor 2")
    if not (volume > 0 and l > 0):
        raise ValueError("volume and l must be positive")
    return max(0.0, berezin_rhs(volume, lam) - theorem_remainder(volume, l, c, lam))


def corollary_rhs(volume: float, inradius: float, lam: float) -> float:
    """Convex cross-sections: max{0, V lam^3/96 - lam^(9/4) V / (2^7 3^2 sqrt3 R^(3/2))}."""
    if not (volume > 0 and inradius > 0):
        raise ValueError("volume and inradius must be positive")
    return max(0.0, volume * lam**3 / 96.0 - lam**2.25 * volume / (COROLLARY_DENOMINATOR * inradius**1.5))


def odd_reciprocal_squares(k_max: int) -> float:
    k = np.arange(1, k_max + 1, dtype=float)
    # summed smallest-first for accuracy
    return float(np.sum((1.0 / (2 * k - 1) ** 2)[::-1]))


def leading_term_oracle(volume: float, lam: float, k_max: int) -> float:
    """(V / 2 pi^2) * sum_{k<=k_max} (2k-1)^-2 * lam^3/6; tends to V lam^3/96."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    return volume / (2 * math.pi**2) * odd_reciprocal_squares(k_max) * lam**3 / 6.0


def weyl_ratio(spec, volume: float, lam: float) -> float:
    """96 * riesz_mean / (V lam^3); at most 1 in the continuum, tends to 1."""
    if lam <= 0:
        return 0.0
    return 96.0 * riesz_mean(spec, lam) / (volume * lam**3)


def lambda_grid(lo: float, hi: float, count: int = 100, spacing: str = "geometric") -> np.ndarray:
    if count < 2:
        raise ValueError("lambda grid needs at least 2 points")
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got {lo}, {hi}")
    if spacing == "geometric":
        return np.geomspace(lo, hi, count)
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    raise ValueError(f"unknown spacing {spacing!r}")


def default_lambda_grid(spec, count: int = 100) -> np.ndarray:
    ev = _eigs(spec)
    return lambda_grid(ev[0], 0.9 * ev[-1], count)


# --- checks on computed eigenfunctions ------------------------------------------


def _mass(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    return (v.real**2 + v.imag**2) if np.iscomplexobj(v) else v**2


def check_cylinder_hardy(v, lambda_v: float, field_: DistanceField, grid: Grid3D, c: float) -> tuple[float, float]:
    """(sum |v|^2/delta^2, c^2 lambda_v) for v normalised in the lattice L^2 norm.

    The cell volume cancels from the normalised left side, so any scaling of v
    is accepted.
    """
    w = _mass(v)
    delta = (grid.field if field_ is None else field_).values[np.nonzero(grid.index >= 0)[1:]]
    lhs = float(np.sum(w / delta**2) / np.sum(w))
    return lhs, c**2 * lambda_v


def check_boundary_estimate(
    v, lambda_v: float, field_: DistanceField, grid: Grid3D, c: float, beta: float
) -> tuple[float, float]:
    """(mass of v on {delta < beta}, c^(2+2/c) beta^(2+2/c) lambda_v^(1+1/c)).

    For an eigenfunction |A v| = lambda_v and |A^(1/c) v| = lambda_v^(1/c).
    """
    R = float(field_.values.max())
    if not 0 < beta <= R * (1 + 1e-12):
        raise ValueError(f"beta={beta} outside (0, R={R}]")
    w = _mass(v)
    delta = field_.values[np.nonzero(grid.index >= 0)[1:]]
    lhs = float(np.sum(w[delta < beta]) / np.sum(w))
    e = 2 + 2 / c
    return lhs, c**e * beta**e * lambda_v ** (1 + 1 / c)


def beta_feasibility(lambda1: float, inradius: float, c: float) -> tuple[float, float]:
    """Both sides of beta^(1+2/c) <= 1/(c^(2+2/c) lambda1^(1+1/c) (4+4/c) R) <= R^(1+2/c)/4.

    Returns (middle, right); the right inequality holds whenever the boundary
    estimate holds for the ground state at beta = R.
    """
    middle = 1.0 / (c ** (2 + 2 / c) * lambda1 ** (1 + 1 / c) * (4 + 4 / c) * inradius)
    return middle, inradius ** (1 + 2 / c) / 4.0


# --- Landau levels ------------------------------------------------------------------

LANDAU_TOL = 1e-4


def landau_level(B: float, k: int) -> float:
    """Energy B(2k-1) of the k-th Landau level, k >= 1."""
    if k < 1:
        raise ValueError("Landau levels are numbered from 1")
    return B * (2 * k - 1)


def landau_spectrum(
    B: float, half_width: float, h: float, m: int = 4, tol: float = LANDAU_TOL, max_iter: int = 2000, seed: int = 0
) -> Spectrum:
    """Lowest m eigenvalues of the realified lattice magnetic Laplacian on a square.

    The lowest level is a cluster of nearly degenerate states, so pairs are
    resolved only to a residual ``tol * theta``; each Ritz value is then within
    that distance of a true eigenvalue. The exact inverse is the preconditioner.
    """
    M = assemble_magnetic2d(B, half_width, h)
    if 4 * m > M.shape[0]:
        raise ValueError(f"m={m} exceeds dimension/4 = {M.shape[0] / 4:g}")
    spec = lobpcg_smallest(M, m, tol, max_iter, seed, preconditioner=factorized_preconditioner(M))
    spec.meta.update(B=B, half_width=half_width, h=h, dimension=M.shape[0])
    return spec


# --- report -----------------------------------------------------------------------

REPORT_COLUMNS = [
    "lambda",
    "lhs",
    "rhs_berezin",
    "rhs_theorem",
    "rhs_corollary",
    "margin_berezin",
    "margin_theorem",
    "c_used",
    "beta_star",
    "truncated",
]


@dataclass
class BoundRow:
    lam: float
    lhs: float
    rhs_berezin: float
    rhs_theorem: float
    rhs_corollary: float | None
    c_used: float
    beta_star: float
    truncated: bool

    @property
    def margin_berezin(self) -> float:
        return self.rhs_berezin - self.lhs

    @property
    def margin_theorem(self) -> float:
        return self.rhs_theorem - self.lhs

    def fails(self, tol: float = TOL_BOUND) -> dict[str, bool]:
        out = {
            "berezin": self.lhs > self.rhs_berezin * (1 + tol),
            "theorem": self.lhs > self.rhs_theorem * (1 + tol),
        }
        if self.rhs_corollary is not None:
            out["corollary"] = self.lhs > self.rhs_corollary * (1 + tol)
        return out


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


@dataclass
class BoundReport:
    rows: list[BoundRow]
    geometry: GeometrySummary | None = None
    lambda_max: float = float("nan")
    tol_bound: float = TOL_BOUND
    meta: dict = field(default_factory=dict)

    def failures(self, which: str | None = None) -> list[BoundRow]:
        """Rows whose Riesz mean exceeds a bound beyond the slack.

        Truncated rows count too: missing eigenvalues can only raise the Riesz
        mean, so a violation there is real; only a pass there is inconclusive.
        """
        out = []
        for r in self.rows:
            f = r.fails(self.tol_bound)
            if (which is None and any(f.values())) or (which is not None and f.get(which, False)):
                out.append(r)
        return out

    @property
    def ok(self) -> bool:
        return not self.failures()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    _fmt(r.lam),
                    _fmt(r.lhs),
                    _fmt(r.rhs_berezin),
                    _fmt(r.rhs_theorem),
                    _fmt(r.rhs_corollary),
                    _fmt(r.margin_berezin),
                    _fmt(r.margin_theorem),
                    _fmt(r.c_used),
                    _fmt(r.beta_star),
                    int(r.truncated),
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BoundReport":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != REPORT_COLUMNS:
            raise ValueError(f"report columns must be {','.join(REPORT_COLUMNS)}")
        rows = []
        for d in reader:
            rows.append(
                BoundRow(
                    float(d["lambda"]),
                    float(d["lhs"]),
                    float(d["rhs_berezin"]),
                    float(d["rhs_theorem"]),
                    float(d["rhs_corollary"]) if d["rhs_corollary"] else None,
                    float(d["c_used"]),
                    float(d["beta_star"]),
                    bool(int(d["truncated"])),
                )
            )
        return cls(rows)

    def to_dict(self) -> dict:
        return {
            "columns": REPORT_COLUMNS,
            "rows": [
                {
                    "lambda": r.lam,
                    "lhs": r.lhs,
                    "rhs_berezin": r.rhs_berezin,
                    "rhs_theorem": r.rhs_theorem,
                    "rhs_corollary": r.rhs_corollary,
                    "margin_berezin": r.margin_berezin,
                    "margin_theorem": r.margin_theorem,
                    "c_used": r.c_used,
                    "beta_star": r.beta_star,
                    "truncated": r.truncated,
                }
                for r in self.rows
            ],
            "lambda_max": self.lambda_max,
            "tol_bound": self.tol_bound,
            "failures": len(self.failures()),
            **self.meta,
        }


def check_bounds(
    spec,
    geom: GeometrySummary,
    c_used: float,
    lambdas,
    convex: bool,
    tol_bound: float = TOL_BOUND,
) -> BoundReport:
    """Evaluate every right-hand side on the lambda grid against the Riesz mean.

    Rows beyond the largest computed eigenvalue are kept but flagged as
    truncated: there the computed Riesz mean may miss eigenvalues and is only
    a lower bound.
    """
    ev = _eigs(spec)
    lam_max = float(ev[-1]) if len(ev) else 0.0
    V = geom.volume_Omega
    rows = []
    for lam in np.asarray(lambdas, dtype=float):
        rows.append(
            BoundRow(
                float(lam),
                riesz_mean(ev, lam),
                berezin_rhs(V, lam),
                theorem_rhs(V, geom.l_omega, c_used, lam),
                corollary_rhs(V, geom.inradius, lam) if convex else None,
                float(c_used),
                float(geom.beta_star),
                bool(lam > lam_max),
            )
        )
    return BoundReport(rows, geom, lam_max, tol_bound)


def remainder_exponent_fit(spec, volume: float, lambdas) -> tuple[float, float]:
    """Least-squares slope of log(V lam^3/96 - riesz_mean) against log lam.

    Diagnostic only: the order of the second asymptotic term is not known.
    Returns (exponent, intercept); NaN if fewer than two positive gaps.
    """
    lams = np.asarray(lambdas, dtype=float)
    gaps = np.array([berezin_rhs(volume, x) - riesz_mean(spec, x) for x in lams])
    ok = (gaps > 0) & (lams > 0)
    if np.count_nonzero(ok) < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(lams[ok]), np.log(gaps[ok]), 1)
    return float(slope), float(intercept)
