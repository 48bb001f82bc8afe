import numpy as np
import pytest

from src.continuation import (
    growth_diagnostic,
    holomorphy_probe,
    kms_boundary_check,
    kms_grid,
    quasi_free_npoint,
    spectral_support_check,
    spectral_support_check_fock,
    thermal_wightman_function,
    tube_scan,
)
from src.errors import StencilOutsideDomain
from src.fock import build_fock
from src.oracles import DispersionParams, RegionSpec, TubePoint, free_thermal_wightman

P = DispersionParams(beta=1.0, mass=1.0)


def test_probe_flags_an_antiholomorphic_function():
    report = holomorphy_probe(lambda z: np.conj(z[:, 0]), [1.0 + 1.0j, -0.5 + 0.2j], step=1e-3)
    assert report.cr_residual == pytest.approx(2.0, rel=1e-9)
    assert report.contour_residual == pytest.approx(2.0, rel=1e-9)
    assert not report.converged


def test_probe_accepts_a_polynomial():
    report = holomorphy_probe(lambda z: z[:, 0] ** 2 * z[:, 1], [(1.0 + 1.0j, 0.5 - 0.5j)], step=1e-3)
    assert report.cr_residual < 1e-8
    assert report.contour_residual < 1e-8
    assert report.converged


def test_probe_step_range():
    with pytest.raises(ValueError):
        holomorphy_probe(lambda z: z[:, 0], [0.0j], step=0.1)
    with pytest.raises(ValueError):
        holomorphy_probe(lambda z: z[:, 0], [0.0j], step=1e-7)


def test_thermal_wightman_is_holomorphic_inside_the_strip():
    report = holomorphy_probe(thermal_wightman_function(P), [(0.3 - 0.4j, 0.1 + 0.05j), (-1.0 - 0.5j, 0.2)], step=1e-4)
    assert report.converged


def test_probe_reports_stencils_leaving_the_strip():
    with pytest.raises(StencilOutsideDomain):
        holomorphy_probe(thermal_wightman_function(P), [(-1e-5j, 0.0)], step=1e-3)


def test_kms_boundary_condition():
    s_grid, y_grid = kms_grid(extent=1.0, n=4)
    report = kms_boundary_check(P, s_grid, y_grid)
    assert report.deviation < 1e-8
    assert len(report.raw_deviations) == 3
    assert report.deltas == (1e-2, 5e-3, 2.5e-3)


def test_tube_scan_classifies_every_configuration():
    region = RegionSpec(beta=P.beta, lambdas=[0.5, 0.5])
    report = tube_scan(P, region, n_inside=10, n_outside=10, seed=7)
    assert len(report.rows) == 20
    assert report.passed
    assert all(row.expected_inside for row in report.rows[:10])
    assert not any(row.expected_inside for row in report.rows[10:])


def test_tube_scan_needs_enough_points():
    with pytest.raises(ValueError):
        tube_scan(P, RegionSpec(beta=P.beta, lambdas=[1.0]), n_inside=5, n_outside=10, seed=0)


def test_quasi_free_npoint_sums_pairings():
    points = [TubePoint(s=0.1 * k - 1j * (0.7 - 0.2 * k), y=0.05 * k) for k in range(4)]

    def w(a, b):
        return free_thermal_wightman(TubePoint(s=points[a].s - points[b].s, y=points[a].y - points[b].y), P).value

    expected = w(0, 1) * w(2, 3) + w(0, 2) * w(1, 3) + w(0, 3) * w(1, 2)
    value = quasi_free_npoint(points, P)
    assert abs(value.value - expected) < 1e-10
    assert value.error_bound >= 0.0
    assert quasi_free_npoint(points[:2], P).value == pytest.approx(w(0, 1))
    assert quasi_free_npoint(points[:3], P).value == 0.0


def test_circle_modes_sit_in_the_forward_cone():
    report = spectral_support_check(P, n_cut=50)
    assert report.n_checked == 101
    assert report.passed
    assert report.min_margin > 0.0


def test_free_fock_spectrum_respects_the_cone():
    report = spectral_support_check_fock(build_fock(1.0, 1.0, 1, 4))
    assert report.passed
    assert report.violations == 0
    assert not report.truncation_too_severe


def test_growth_diagnostic_near_the_origin():
    report = growth_diagnostic(P, (0.5, 0.0), np.geomspace(0.5, 0.01, 8))
    assert len(report.magnitudes) == 8
    assert report.magnitudes[-1] > report.magnitudes[0]
    assert report.slope < 0.0
