from math import factorial

import numpy as np
import pytest

from src.errors import BoundedBelowViolation, DegreeTooHigh, NegativeCovariance, NegativeOrder
from src.lattice import DispersionMode, build_lattice, dense_green_oracle, sample_gaussian, spectral_multipliers
from src.wick import (
    OrderingLabel,
    WickPolynomial,
    lattice_wick_constant,
    rewick,
    sharp_time_constants,
    wick_coefficients,
    wick_polynomial_eval,
    wick_power,
    wick_power_hermite,
    wick_power_recursive,
)


def test_low_order_wick_powers():
    phi = np.array([-1.5, 0.0, 0.3, 2.0])
    c = 0.7
    np.testing.assert_allclose(wick_power(phi, c, 0), 1.0)
    np.testing.assert_allclose(wick_power(phi, c, 1), phi)
    np.testing.assert_allclose(wick_power(phi, c, 2), phi**2 - c)
    np.testing.assert_allclose(wick_power(phi, c, 4), phi**4 - 6 * c * phi**2 + 3 * c**2)


@pytest.mark.parametrize("n", range(11))
@pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.5, 5.0, 7.0, 10.0])
def test_three_implementations_agree(n, c):
    phi = np.linspace(-10.0, 10.0, 201)
    scale = np.maximum(1.0, np.polynomial.polynomial.polyval(np.abs(phi), np.abs(wick_coefficients(n, c))))
    reference = wick_power(phi, c, n)
    assert np.max(np.abs(wick_power_hermite(phi, c, n) - reference) / scale) < 1e-12
    assert np.max(np.abs(wick_power_recursive(phi, c, n) - reference) / scale) < 1e-12


def test_lattice_wick_powers_are_centred_and_orthogonal():
    """E[:phi^n:(a)] = 0 and E[:phi^n:(a) :phi^m:(b)] = delta_nm n! G(a, b)^n for neighbouring sites."""
    lat = build_lattice(1.0, 1.0, 8, 8, 1.0)
    cov = spectral_multipliers(lat)
    c = lattice_wick_constant(cov)
    green = dense_green_oracle(lat)
    samples = sample_gaussian(cov, seed=42, count=50000).reshape(-1, lat.n_sites)
    at_a, at_b = samples[:, 0], samples[:, 1]
    assert green[0, 1] > 0.0
    for n in range(1, 7):
        values = wick_power(at_a, c, n)
        assert abs(values.mean()) < 5 * values.std() / np.sqrt(values.size)
    for n in range(1, 5):
        for m in range(1, 5):
            target = factorial(n) * green[0, 1] ** n if n == m else 0.0
            product = wick_power(at_a, c, n) * wick_power(at_b, c, m)
            assert product.mean() == pytest.approx(target, abs=5 * product.std() / np.sqrt(product.size))


def test_invalid_orders_and_constants():
    with pytest.raises(NegativeOrder):
        wick_power(1.0, 1.0, -1)
    with pytest.raises(DegreeTooHigh):
        wick_power_hermite(1.0, 1.0, 21)
    with pytest.raises(NegativeCovariance):
        wick_power_recursive(1.0, -0.1, 2)


def test_polynomial_strips_trailing_zeros_and_checks_boundedness():
    assert WickPolynomial(coefficients=(0.0, 0.0, 1.0, 0.0, 0.0)).degree == 2
    assert WickPolynomial(coefficients=(0.0,)).is_zero()
    with pytest.raises(BoundedBelowViolation):
        WickPolynomial(coefficients=(0.0, 0.0, 0.0, 1.0))
    with pytest.raises(BoundedBelowViolation):
        WickPolynomial(coefficients=(0.0, 0.0, -1.0))


def test_polynomial_evaluation_sums_wick_powers():
    P = WickPolynomial(coefficients=(0.5, 0.0, -0.3, 0.0, 0.1), wick_constant=0.6)
    phi = np.linspace(-2.0, 2.0, 9)
    expected = 0.5 - 0.3 * wick_power(phi, 0.6, 2) + 0.1 * wick_power(phi, 0.6, 4)
    np.testing.assert_allclose(wick_polynomial_eval(P, phi), expected, atol=1e-13)


def test_rewick_preserves_the_function_and_round_trips():
    P = WickPolynomial(coefficients=(0.3, 0.0, -0.2, 0.0, 0.05), wick_constant=0.4)
    moved = rewick(P, 1.1, OrderingLabel.C_ZERO)
    phi = np.linspace(-3.0, 3.0, 13)
    assert moved.wick_constant == 1.1
    assert moved.label is OrderingLabel.C_ZERO
    np.testing.assert_allclose(wick_polynomial_eval(moved, phi), wick_polynomial_eval(P, phi), atol=1e-12)
    back = rewick(moved, 0.4)
    np.testing.assert_allclose(back.coefficients, P.coefficients, atol=1e-12)


def test_rewick_quartic_shifts_lower_terms():
    """:l^4:_c1 = :l^4:_c2 + 6 (c2 - c1) :l^2:_c2 + 3 (c2 - c1)^2."""
    P = WickPolynomial(coefficients=(0.0, 0.0, 0.0, 0.0, 1.0), wick_constant=1.0)
    moved = rewick(P, 1.5)
    np.testing.assert_allclose(moved.coefficients, (0.75, 0.0, 3.0, 0.0, 1.0), atol=1e-14)


def test_lattice_wick_constant_is_site_variance():
    lat = build_lattice(1.0, 2.0, 8, 8, 1.0)
    cov = spectral_multipliers(lat)
    assert lattice_wick_constant(cov) == cov.site_variance


@pytest.mark.parametrize("dispersion", list(DispersionMode))
def test_sharp_time_constants_exceed_the_fully_discretised_constant(dispersion):
    lat = build_lattice(1.0, 4.0, 16, 64, 1.0, dispersion)
    c_zero, c_beta = sharp_time_constants(lat)
    full = spectral_multipliers(lat).site_variance
    assert 0.0 < c_beta
    assert 0.0 < c_zero
    assert full < c_zero
    assert full < c_beta
