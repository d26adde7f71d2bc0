"""Worked examples for each public operation, one test per example."""
import math

import numpy as np
import pytest

from heisencyl import bounds
from heisencyl.eigensolve import DENSE_CAP, Spectrum, dense_jacobi_all, lobpcg_smallest
from heisencyl.geometry2d import (
    Polygon,
    distance_field,
    distance_to_boundary,
    inradius,
    l_shape,
    polygon_area,
    rectangle,
    regular_polygon,
    sublevel_area,
    summarize,
    unit_square,
)
from heisencyl.hardy import HardyEstimate, estimate_hardy_constant, hardy_bound_used
from heisencyl.operator import build_grid, heisenberg_matrix


def fd_chain(n):
    h = 1 / (n + 1)
    A = (np.diag(2 * np.ones(n)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h**2
    k = np.arange(1, n + 1)
    return A, 2 * (1 - np.cos(k * np.pi / (n + 1))) / h**2


# --- geometry ----------------------------------------------------------------------


def test_triangle_area():
    assert polygon_area(Polygon(np.array([[0, 0], [1, 0], [0, 1]], float))) == 0.5


def test_hexagon_area():
    assert polygon_area(regular_polygon(6)) == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-14)


@pytest.mark.parametrize("p, d", [((0.5, 0.5), 0.5), ((0.25, 0.5), 0.25), ((2, 2), 0.0)])
def test_square_distances(p, d):
    assert distance_to_boundary(unit_square(), p) == d


def test_rectangle_inradius():
    h = 1 / 64
    assert inradius(distance_field(rectangle(1, 2), h)) == pytest.approx(0.5, abs=h)


def test_disk_inradius():
    n = 64
    exact = math.cos(math.pi / n)
    R = inradius(distance_field(regular_polygon(n), 1 / 128))
    assert R == pytest.approx(1.0, abs=0.01)
    assert R == pytest.approx(exact, abs=1 / 128)


def test_disk_sublevel():
    assert sublevel_area(distance_field(regular_polygon(256), 1 / 128), 0.5) == pytest.approx(2.356, abs=0.02)


def test_empty_field_rejected():
    f = distance_field(unit_square(), 1 / 1)
    with pytest.raises(ValueError):
        inradius(f)


# --- hardy -------------------------------------------------------------------------


def test_l_shape_hardy_band():
    est = estimate_hardy_constant(distance_field(l_shape(), 1 / 64))
    assert est.c_est <= 4.04
    assert est.c_est >= 1.7, f"c_est={est.c_est:.4f}: lattice values creep up only logarithmically"


def test_measured_clamped_to_floor():
    assert hardy_bound_used(HardyEstimate(1.93, 1 / 64, 0.0), "measured") == 2.0


# --- operator ----------------------------------------------------------------------


def test_degenerate_interval_rejected():
    with pytest.raises(ValueError):
        build_grid(unit_square(), 0.5, 0.5, 0.1, 0.1)


# --- eigensolve --------------------------------------------------------------------


def test_chain_of_100():
    import scipy.sparse as sp

    A, want = fd_chain(100)
    spec = lobpcg_smallest(sp.csr_matrix(A), 1, tol=1e-10)
    assert spec.eigenvalues[0] == pytest.approx(want[0], rel=1e-9)


def test_cube_matches_jacobi():
    A, _ = heisenberg_matrix(unit_square(), 0, 1, 1 / 6)
    assert A.shape[0] == 125
    it = lobpcg_smallest(A, 10)
    np.testing.assert_allclose(it.eigenvalues, dense_jacobi_all(A).eigenvalues[:10], rtol=1e-8)


def test_jacobi_chain_of_10():
    A, want = fd_chain(10)
    np.testing.assert_allclose(dense_jacobi_all(A).eigenvalues, want, rtol=1e-12)


def test_dense_cap():
    assert DENSE_CAP >= 1500


# --- bounds --------------------------------------------------------------------------


def test_riesz_mean_examples():
    assert bounds.riesz_mean([1, 2, 3], 2.5) == 2.0
    assert bounds.riesz_mean([], 5.0) == 0.0
    assert bounds.riesz_mean([1, 2, 3], 1.0) == 0.0


def test_berezin_examples():
    assert bounds.berezin_rhs(96, 1) == 1.0
    assert bounds.berezin_rhs(1, 0) == 0.0
    assert bounds.berezin_rhs(1, 2) == pytest.approx(1 / 12)


def test_theorem_examples():
    assert bounds.theorem_rhs(1.0, 2.0, 2.0, 0.0) == 0.0
    # small lambda: the remainder (power 9/4 < 3) dominates, the bracket clamps
    assert bounds.theorem_rhs(1.0, 2.0, 2.0, 1e-6) == 0.0


def test_corollary_examples():
    D = bounds.COROLLARY_DENOMINATOR
    assert bounds.corollary_rhs(1.0, 0.5, 0.0) == 0.0
    assert bounds.corollary_rhs(D, 1.0, 1.0) == pytest.approx(max(0.0, D / 96 - 1), rel=1e-14)


def test_leading_term_examples():
    assert bounds.leading_term_oracle(2 * math.pi**2, 1.0, 1) == pytest.approx(1 / 6, rel=1e-14)
    assert bounds.leading_term_oracle(1.0, 3.0, 10**6) == pytest.approx(bounds.berezin_rhs(1.0, 3.0), rel=1e-6)


def test_weyl_ratio_below_first_eigenvalue():
    assert bounds.weyl_ratio([20.0, 30.0], 1.0, 20.0) == 0.0


@pytest.fixture(scope="module")
def cube24():
    A, grid = heisenberg_matrix(unit_square(), 0, 1, 1 / 24)
    return lobpcg_smallest(A, 100), grid


def test_weyl_ratio_final_value(cube24):
    spec, _ = cube24
    top = 0.9 * spec.eigenvalues[-1]
    grid = bounds.lambda_grid(spec.eigenvalues[0], top, 100)
    coarse = [bounds.weyl_ratio(spec, 1.0, x) for x in grid]
    fine = [bounds.weyl_ratio(spec, 1.0, x) for x in bounds.lambda_grid(spec.eigenvalues[0], top, 199)]
    assert coarse == fine[::2]
    assert 0.2 < coarse[-1] < 1.05, f"final weyl ratio {coarse[-1]:.4f}"


def test_check_bounds_berezin_up_to_lambda50(cube24):
    spec, _ = cube24
    geom = summarize(unit_square(), 0, 1, 1 / 24)
    rep = bounds.check_bounds(spec, geom, 2.0, bounds.lambda_grid(spec.eigenvalues[0], spec.eigenvalues[49], 50),
                              convex=True)
    assert not rep.failures("berezin")
    assert all(r.margin_theorem <= r.margin_berezin for r in rep.rows)


def test_ground_state_hardy_ratio(cube24):
    spec, grid = cube24
    lhs, rhs = bounds.check_cylinder_hardy(spec.vectors[:, 0], spec.eigenvalues[0], grid.field, grid, 2.0)
    assert lhs / rhs < 1.1
    assert bounds.check_cylinder_hardy(spec.vectors[:, 0], spec.eigenvalues[0], grid.field, grid, 1e6)[0] < 1e12


def test_deepest_node_hardy_sanity():
    A, grid = heisenberg_matrix(unit_square(), 0, 1, 1 / 8)
    delta = grid.node_delta()
    v = np.zeros(grid.n)
    v[np.argmax(delta)] = 1.0
    lhs, rhs = bounds.check_cylinder_hardy(v, float(v @ (A @ v)), grid.field, grid, 2.0)
    assert lhs == pytest.approx(1 / delta.max() ** 2)
    assert rhs == pytest.approx(4 * A[np.argmax(delta), np.argmax(delta)])


def test_boundary_estimate_monotone_in_beta(cube24):
    spec, grid = cube24
    v, lam = spec.vectors[:, 0], spec.eigenvalues[0]
    R = float(grid.field.values.max())
    vals = [bounds.check_boundary_estimate(v, lam, grid.field, grid, 2.0, b) for b in np.linspace(R / 8, R, 8)]
    assert all(b[0] >= a[0] for a, b in zip(vals, vals[1:]))
    assert all(b[1] > a[1] for a, b in zip(vals, vals[1:]))
    lhs, rhs = bounds.check_boundary_estimate(v, lam, grid.field, grid, 2.0, R / 2)
    assert lhs <= 1.1 * rhs


def test_report_scaling_coherence():
    """A dilated cylinder gives the same report with lambda -> lambda/t^2, every column scaled by t^-2."""
    t, h = 2.0, 1 / 8
    A, _ = heisenberg_matrix(unit_square(), 0, 1, h)
    B, _ = heisenberg_matrix(unit_square().scaled(t), 0, t**2, t * h, t**2 * h)
    sa, sb = lobpcg_smallest(A, 20), lobpcg_smallest(B, 20)
    ga = summarize(unit_square(), 0, 1, h)
    gb = summarize(unit_square().scaled(t), 0, t**2, t * h)
    assert gb.volume_Omega == pytest.approx(t**4 * ga.volume_Omega)
    lams = bounds.lambda_grid(sa.eigenvalues[0], 0.9 * sa.eigenvalues[-1], 20)
    ra = bounds.check_bounds(sa, ga, 2.0, lams, convex=True)
    rb = bounds.check_bounds(sb, gb, 2.0, lams / t**2, convex=True)
    for x, y in zip(ra.rows, rb.rows):
        for name in ("lhs", "rhs_berezin", "rhs_theorem", "rhs_corollary"):
            assert getattr(y, name) * t**2 == pytest.approx(getattr(x, name), rel=1e-8, abs=1e-12), name


def test_spectrum_from_csv_sorts():
    s = Spectrum.from_csv("index,eigenvalue,residual\n1,2.0,0\n2,1.0,0\n")
    assert s.eigenvalues.tolist() == [1.0, 2.0]
