import numpy as np
import pytest
from scipy.integrate import quad

from src.errors import (
    ArgumentOutsidePeriod,
    InvalidRegion,
    LambdaMismatch,
    NonPositiveParameter,
    PointOutsideAnalyticityDomain,
    TailTooLarge,
    TubeViolation,
)
from src.oracles import (
    CertifiedValue,
    DispersionParams,
    RegionSpec,
    TubePoint,
    cov_circle_cbeta,
    cov_mixed_sharp_time,
    cov_spatial_circle,
    cov_thermal_c0,
    cov_thermal_c0_coth,
    free_circle_wightman,
    free_thermal_wightman,
    free_thermal_wightman_batch,
    in_jn,
    in_relativistic_tube,
    in_tube_union,
    in_v_beta,
    matsubara_energy,
)
from src.rng import make_rng

P = DispersionParams(beta=1.3, mass=0.8)


def matsubara_sum(d_alpha: float, k: float, p: DispersionParams, n_cut: int = 1_000_000) -> float:
    omega = 2.0 * np.pi * np.arange(-n_cut, n_cut + 1) / p.beta
    return float(np.sum(np.cos(omega * d_alpha) / (omega**2 + k**2 + p.mass**2)) / p.beta)


def test_dispersion_params_must_be_positive():
    with pytest.raises(NonPositiveParameter):
        DispersionParams(beta=1.0, mass=0.0)


def test_coth_form_agrees_over_random_parameters():
    rng = make_rng(2024)
    for _ in range(100):
        p = DispersionParams(beta=rng.uniform(0.1, 10.0), mass=rng.uniform(0.05, 5.0))
        k = rng.uniform(-50.0, 50.0, 8)
        np.testing.assert_allclose(cov_thermal_c0(k, p), cov_thermal_c0_coth(k, p), rtol=1e-14)


def test_thermal_covariance_is_the_matsubara_sum():
    assert cov_thermal_c0(0.7, P) == pytest.approx(matsubara_sum(0.0, 0.7, P), rel=1e-6)
    assert cov_mixed_sharp_time(0.4, 0.7, P) == pytest.approx(matsubara_sum(0.4, 0.7, P), rel=1e-6)


def test_mixed_covariance_reduces_and_reflects():
    k = np.linspace(-5.0, 5.0, 11)
    np.testing.assert_allclose(cov_mixed_sharp_time(0.0, k, P), cov_thermal_c0(k, P), rtol=1e-14)
    for d in (0.1, 0.5, 1.0):
        np.testing.assert_allclose(cov_mixed_sharp_time(d, k, P), cov_mixed_sharp_time(P.beta - d, k, P), rtol=1e-14)


def test_spatial_circle_reduces_to_cbeta():
    n = np.arange(-6, 7)
    np.testing.assert_allclose(cov_spatial_circle(0.0, n, P), cov_circle_cbeta(n, P), rtol=1e-15)
    np.testing.assert_allclose(cov_circle_cbeta(n, P), 1.0 / (2.0 * matsubara_energy(n, P)))


def test_arguments_outside_the_period_are_rejected():
    with pytest.raises(ArgumentOutsidePeriod):
        cov_mixed_sharp_time(P.beta + 0.1, 1.0, P)
    with pytest.raises(ArgumentOutsidePeriod):
        cov_mixed_sharp_time(-0.1, 1.0, P)
    with pytest.raises(ArgumentOutsidePeriod):
        cov_spatial_circle(-1.0, 0, P)


def test_wightman_at_imaginary_time_is_the_euclidean_two_point():
    """W(-i tau, 0) = int dk/(2 pi) cov_mixed_sharp_time(tau, k)."""
    tau = 0.3
    expected, _ = quad(lambda k: cov_mixed_sharp_time(tau, k, P) / (2.0 * np.pi), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    value = free_thermal_wightman(TubePoint(s=-1j * tau, y=0.0), P)
    assert value.value.real == pytest.approx(expected, rel=1e-9)
    assert abs(value.value.imag) < 1e-10
    assert value.error_bound < 1e-10


def test_wightman_batch_matches_single_evaluations():
    t = [0.2 - 0.3j, -1.0 - 0.5j, 0.7 - 0.9j]
    x = [0.1 + 0.05j, -0.4 + 0.0j, 1.2 - 0.1j]
    batch = free_thermal_wightman_batch(t, x, P)
    for (ti, xi), value in zip(zip(t, x), batch):
        single = free_thermal_wightman(TubePoint(s=ti, y=xi), P)
        assert abs(single.value - value.value) < 1e-10


def test_wightman_refuses_points_outside_the_strip():
    with pytest.raises(PointOutsideAnalyticityDomain):
        free_thermal_wightman(TubePoint(s=-1j * (P.beta + 0.1), y=0.0), P)
    with pytest.raises(PointOutsideAnalyticityDomain):
        free_thermal_wightman(TubePoint(s=-0.2j, y=0.5j), P)


def test_circle_wightman_domain_and_tail_checks():
    value = free_circle_wightman(0.3, 0.5 - 0.5j, P, n_cut=200)
    assert isinstance(value, CertifiedValue)
    assert np.isfinite(value.value)
    with pytest.raises(TubeViolation):
        free_circle_wightman(0.3, 0.5 + 0.1j, P, n_cut=10)
    with pytest.raises(TailTooLarge):
        free_circle_wightman(0.0, -1e-3j, P, n_cut=2)


def test_circle_wightman_at_imaginary_time_is_the_mode_sum():
    eta = 0.4
    value = free_circle_wightman(0.0, -1j * eta, P, n_cut=200)
    n = np.arange(-200, 201)
    nu = matsubara_energy(n, P)
    expected = np.sum(np.exp(-eta * nu) / (2.0 * P.beta * nu))
    assert value.value.real == pytest.approx(expected, rel=1e-13)


def test_double_cone_membership():
    assert in_v_beta((0.5, 0.0), 1.0)
    assert in_v_beta((0.5, 0.4), 1.0)
    assert not in_v_beta((0.5, 0.6), 1.0)
    assert not in_v_beta((0.0, 0.0), 1.0)
    assert not in_v_beta((1.0, 0.0), 1.0)


def test_region_spec_validates_weights():
    with pytest.raises(InvalidRegion):
        RegionSpec(beta=1.0, lambdas=[0.5, 0.6])
    with pytest.raises(InvalidRegion):
        RegionSpec(beta=1.0, lambdas=[1.5, -0.5])
    assert RegionSpec(beta=1.0, lambdas=[0.25, 0.75]).lambdas == (0.25, 0.75)


def test_ordered_points_and_tubes():
    spec = RegionSpec(beta=1.0, lambdas=[0.5, 0.5])
    assert in_jn([(0.0, 0.0), (0.25, 0.0), (0.5, 0.1)], spec)
    assert not in_jn([(0.0, 0.0), (0.6, 0.0), (0.7, 0.0)], spec)
    inside = [TubePoint(s=1.0 - 0.2j, y=0.0), TubePoint(s=-2.0 - 0.25j, y=0.05j)]
    assert in_relativistic_tube(inside, spec)
    outside = [TubePoint(s=0.0 - 0.6j, y=0.0), TubePoint(s=0.0 - 0.2j, y=0.0)]
    assert not in_relativistic_tube(outside, spec)
    assert in_tube_union(outside, 1.0, [[0.5, 0.5], [0.75, 0.25]])
    with pytest.raises(LambdaMismatch):
        in_relativistic_tube(inside[:1], spec)
