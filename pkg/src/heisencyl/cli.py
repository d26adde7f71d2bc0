"""Command line pipeline: geometry -> Hardy -> assembly -> eigenpairs -> bound checks.

Exit codes: 0 success, 1 invalid configuration, 2 eigensolver non-convergence,
3 bound violation beyond the relative slack.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .eigensolve import Spectrum, lobpcg_smallest
from .geometry2d import GeometryError, Polygon, is_convex, summarize
from .hardy import hardy_bound_used, hardy_refinement
from .operator import GridError, assemble_heisenberg, build_grid

log = logging.getLogger("heisencyl")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VIOLATION = 3

C_MODES = ("convex", "worst_case", "measured")
LANDAU_DEFAULTS = {"B": 1.0, "half_width": 8.0, "h": 0.1, "m": 4, "tol": bounds.LANDAU_TOL}


class ConfigError(ValueError):
    pass


def _num(d: dict, key: str, default=None, kind=float, positive=True, prefix=""):
    name = prefix + key
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required field '{name}'")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"field '{name}' must be a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"field '{name}' must be an integer, got {val!r}")
    val = kind(val)
    if positive and not val > 0:
        raise ConfigError(f"field '{name}' must be positive, got {val!r}")
    return val


@dataclass
class RunConfig:
    polygon: Polygon
    a: float
    b: float
    h_plane: float
    h_axial: float
    num_eigenpairs: int = 20
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 0
    grid_min: float | None = None
    grid_max: float | None = None
    grid_count: int = 100
    grid_spacing: str = "geometric"
    c_mode: str | None = None
    corollary: bool = True
    n_beta: int = 64
    tol_bound: float = bounds.TOL_BOUND
    hardy_levels: int = 3
    landau: dict = field(default_factory=lambda: dict(LANDAU_DEFAULTS))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "polygon" not in d:
            raise ConfigError("missing required field 'polygon'")
        try:
            poly = Polygon(np.asarray(d["polygon"], dtype=float))
        except (GeometryError, ValueError, TypeError) as exc:
            raise ConfigError(f"field 'polygon': {exc}") from None
        a = _num(d, "a", positive=False)
        b = _num(d, "b", positive=False)
        if not a < b:
            raise ConfigError(f"fields 'a','b' must satisfy a < b, got a={a}, b={b}")
        h_plane = _num(d, "h_plane")
        h_axial = _num(d, "h_axial", default=h_plane)
        solver = d.get("solver", {})
        if not isinstance(solver, dict):
            raise ConfigError("field 'solver' must be an object")
        grid = d.get("lambda_grid", {})
        if not isinstance(grid, dict):
            raise ConfigError("field 'lambda_grid' must be an object")
        spacing = grid.get("spacing", "geometric")
        if spacing not in ("linear", "geometric"):
            raise ConfigError(f"field 'lambda_grid.spacing' must be linear or geometric, got {spacing!r}")
        count = _num(grid, "count", default=100, kind=int, prefix="lambda_grid.")
        if count < 2:
            raise ConfigError("field 'lambda_grid.count' must be at least 2")
        c_mode = d.get("c_mode")
        if c_mode is not None and c_mode not in C_MODES:
            raise ConfigError(f"field 'c_mode' must be one of {', '.join(C_MODES)}, got {c_mode!r}")
        landau = dict(LANDAU_DEFAULTS)
        ld = d.get("landau", {})
        if not isinstance(ld, dict):
            raise ConfigError("field 'landau' must be an object")
        for k in ("half_width", "h", "tol"):
            landau[k] = _num(ld, k, default=landau[k], prefix="landau.")
        landau["B"] = _num(ld, "B", default=landau["B"], positive=False, prefix="landau.")
        if landau["B"] < 0:
            raise ConfigError("field 'landau.B' must be nonnegative")
        landau["m"] = _num(ld, "m", default=landau["m"], kind=int, prefix="landau.")
        return cls(
            polygon=poly,
            a=a,
            b=b,
            h_plane=h_plane,
            h_axial=h_axial,
            num_eigenpairs=_num(d, "num_eigenpairs", default=20, kind=int),
            tol=_num(solver, "tol", default=1e-8, prefix="solver."),
            max_iter=_num(solver, "max_iter", default=5000, kind=int, prefix="solver."),
            seed=_num(solver, "seed", default=0, kind=int, positive=False, prefix="solver."),
            grid_min=_num(grid, "min", default=-1.0, positive=False, prefix="lambda_grid.") if "min" in grid else None,
            grid_max=_num(grid, "max", default=-1.0, positive=False, prefix="lambda_grid.") if "max" in grid else None,
            grid_count=count,
            grid_spacing=spacing,
            c_mode=c_mode,
            corollary=bool(d.get("corollary", True)),
            n_beta=_num(d, "n_beta", default=64, kind=int),
            tol_bound=_num(d, "tol_bound", default=bounds.TOL_BOUND),
            hardy_levels=_num(d, "hardy_levels", default=3, kind=int),
            landau=landau,
        )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_dict(d)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, path: str | None) -> None:
    if path:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def geometry_of(cfg: RunConfig):
    return summarize(cfg.polygon, cfg.a, cfg.b, cfg.h_plane, cfg.n_beta)


def c_used_for(cfg: RunConfig) -> tuple[float, str]:
    mode = cfg.c_mode or ("convex" if is_convex(cfg.polygon) else "worst_case")
    est = None
    if mode == "measured":
        est = hardy_refinement(cfg.polygon, [cfg.h_plane])
        log.warning("c_mode=measured: lattice Hardy estimates sit below the true constant; heuristic only")
    return hardy_bound_used(est, mode), mode


def compute_spectrum(cfg: RunConfig, keep_vectors: bool = False):
    grid = build_grid(cfg.polygon, cfg.a, cfg.b, cfg.h_plane, cfg.h_axial)
    if 4 * cfg.num_eigenpairs > grid.n:
        raise ConfigError(
            f"field 'num_eigenpairs'={cfg.num_eigenpairs} exceeds dimension/4 = {grid.n / 4:g}; refine the grid"
        )
    A, _ = assemble_heisenberg(grid)
    spec = lobpcg_smallest(A, cfg.num_eigenpairs, cfg.tol, cfg.max_iter, cfg.seed)
    if not keep_vectors:
        spec.vectors = None
    return spec, grid


def _lambda_grid(cfg: RunConfig, spec: Spectrum) -> np.ndarray:
    lo = cfg.grid_min if cfg.grid_min is not None else float(spec.eigenvalues[0])
    hi = cfg.grid_max if cfg.grid_max is not None else 0.9 * float(spec.eigenvalues[-1])
    if hi <= lo:
        hi = float(spec.eigenvalues[-1])
    if not 0 < lo < hi:
        raise ConfigError(f"lambda grid [{lo:g}, {hi:g}] is empty; set 'lambda_grid.min' and 'lambda_grid.max'")
    return bounds.lambda_grid(lo, hi, cfg.grid_count, cfg.grid_spacing)


# --- subcommands ----------------------------------------------------------------


def run_geom(cfg: RunConfig, args) -> int:
    g = geometry_of(cfg)
    _emit(g.CSV_HEADER + "\n" + g.csv_row() + "\n", args.out)
    _emit_json({**g.__dict__, "convex": is_convex(cfg.polygon)}, args.json)
    return EXIT_OK


def run_hardy(cfg: RunConfig, args) -> int:
    spacings = [cfg.h_plane / 2.0**k for k in range(cfg.hardy_levels)]
    rows = []
    for h in spacings:
        try:
            est = hardy_refinement(cfg.polygon, [h])
        except ValueError as exc:
            raise ConfigError(f"hardy at h={h:g}: {exc}") from None
        rows.append((h, est.c_est, est.rayleigh_residual))
    log.info("lattice Hardy estimates are lower estimates of c, never upper bounds")
    _emit(_csv(["h", "c_est", "residual"], rows), args.out)
    _emit_json({"rows": [dict(zip(("h", "c_est", "residual"), r)) for r in rows], "caveat": "lower estimate"}, args.json)
    return EXIT_OK


def run_spectrum(cfg: RunConfig, args) -> int:
    spec, grid = compute_spectrum(cfg)
    _emit(spec.to_csv(), args.out)
    _emit_json(
        {"eigenvalues": spec.eigenvalues.tolist(), "residuals": spec.residuals.tolist(),
         "converged": spec.converged.tolist(), "dimension": grid.n, **spec.meta},
        args.json,
    )
    if not spec.all_converged:
        log.error("%d requested pairs did not converge", int(np.count_nonzero(~spec.converged)))
        return EXIT_SOLVER
    return EXIT_OK


def _read_spectrum(args, cfg: RunConfig) -> Spectrum:
    if args.spectrum:
        try:
            return Spectrum.from_csv(Path(args.spectrum).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot parse spectrum file {args.spectrum}: {exc}") from None
    spec, _ = compute_spectrum(cfg)
    return spec


def run_check(cfg: RunConfig, args) -> int:
    spec = _read_spectrum(args, cfg)
    if len(spec) == 0:
        raise ConfigError("spectrum file holds no eigenvalues")
    geom = geometry_of(cfg)
    c, mode = c_used_for(cfg)
    convex = is_convex(cfg.polygon) and cfg.corollary
    rep = bounds.check_bounds(spec, geom, c, _lambda_grid(cfg, spec), convex, cfg.tol_bound)
    rep.meta = {"c_mode": mode, "convex": convex, "geometry": geom.__dict__}
    _emit(rep.to_csv(), args.out)
    _emit_json(rep.to_dict(), args.json)
    bad = rep.failures()
    if bad:
        log.error("%d lambda rows violate a bound beyond %.0f%% slack", len(bad), 100 * cfg.tol_bound)
        return EXIT_VIOLATION
    return EXIT_OK


def run_landau(cfg: RunConfig | None, args) -> int:
    p = dict(cfg.landau) if cfg else dict(LANDAU_DEFAULTS)
    for k in ("B", "half_width", "h", "m", "tol"):
        v = getattr(args, k, None)
        if v is not None:
            p[k] = v
    if p["B"] < 0 or p["half_width"] <= 0 or p["h"] <= 0 or p["m"] < 1 or p["tol"] <= 0:
        raise ConfigError(f"landau parameters out of range: {p}")
    seed = cfg.seed if cfg else 0
    try:
        spec = bounds.landau_spectrum(float(p["B"]), float(p["half_width"]), float(p["h"]), int(p["m"]),
                                      float(p["tol"]), seed=seed)
    except ValueError as exc:
        raise ConfigError(f"landau: {exc}") from None
    spec.vectors = None
    _emit(spec.to_csv(), args.out)
    _emit_json({"params": p, "eigenvalues": spec.eigenvalues.tolist(), "residuals": spec.residuals.tolist(),
                "lowest_landau_level": bounds.landau_level(p["B"], 1), **spec.meta}, args.json)
    return EXIT_OK if spec.all_converged else EXIT_SOLVER


def run_asymp(cfg: RunConfig, args) -> int:
    spec = _read_spectrum(args, cfg)
    V = geometry_of(cfg).volume_Omega
    lams = _lambda_grid(cfg, spec)
    rows = [(x, bounds.weyl_ratio(spec, V, x), bounds.berezin_rhs(V, x) - bounds.riesz_mean(spec, x)) for x in lams]
    upper = lams[len(lams) // 2:]
    expo, icpt = bounds.remainder_exponent_fit(spec, V, upper)
    log.info("diagnostic remainder exponent fit (upper half of grid): %.6g", expo)
    _emit(_csv(["lambda", "weyl_ratio", "berezin_gap"], rows), args.out)
    _emit_json({"rows": [dict(zip(("lambda", "weyl_ratio", "berezin_gap"), r)) for r in rows],
                "remainder_exponent_fit": expo, "remainder_fit_intercept": icpt}, args.json)
    return EXIT_OK


COMMANDS = {
    "geom": run_geom,
    "hardy": run_hardy,
    "spectrum": run_spectrum,
    "check": run_check,
    "landau": run_landau,
    "asymp": run_asymp,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heisencyl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?" if name == "landau" else None, help="JSON run configuration")
        s.add_argument("-o", "--out", help="CSV output path (default: stdout)")
        s.add_argument("--json", help="optional JSON mirror of the report")
        if name in ("check", "asymp"):
            s.add_argument("--spectrum", help="spectrum CSV (default: compute from the config)")
        if name == "landau":
            s.add_argument("--B", type=float, dest="B")
            s.add_argument("--half-width", type=float, dest="half_width")
            s.add_argument("--h", type=float, dest="h")
            s.add_argument("--m", type=int, dest="m")
            s.add_argument("--tol", type=float, dest="tol")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        cfg = load_config(args.config) if args.config else None
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, GeometryError, GridError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
