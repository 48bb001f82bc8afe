"""Wick (normal) ordering of powers and polynomials against a covariance constant."""

from enum import Enum
from math import factorial
from typing import Tuple

import numpy as np
from numpy.polynomial import hermite_e
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import BoundedBelowViolation, DegreeTooHigh, NegativeCovariance, NegativeOrder
from .lattice import CylinderLattice, DispersionMode, SpectralCovariance, axis_eigenvalues, axis_momenta
from .oracles import DispersionParams, cov_thermal_c0

MAX_DEGREE = 20
FACTORIALS = np.array([float(factorial(n)) for n in range(MAX_DEGREE + 1)])


class OrderingLabel(str, Enum):
    C_FULL = "C_full"
    C_ZERO = "C_zero"
    C_BETA = "C_beta"
    CUSTOM = "Custom"


def _check_order(n: int) -> None:
    if n < 0:
        raise NegativeOrder(f"Wick order must be non-negative, got {n}")
    if n > MAX_DEGREE:
        raise DegreeTooHigh(f"Wick order {n} exceeds the supported maximum {MAX_DEGREE}")


def _check_covariance(c: float) -> None:
    if c < 0:
        raise NegativeCovariance(f"covariance constant must be non-negative, got {c}")


def wick_coefficients(n: int, c: float) -> np.ndarray:
    """Monomial coefficients of :lambda^n:_c, lowest degree first.

    ``c`` may be negative here; ``rewick`` needs the signed expansion.
    """
    _check_order(n)
    coefficients = np.zeros(n + 1)
    for m in range(n // 2 + 1):
        coefficients[n - 2 * m] = FACTORIALS[n] / (FACTORIALS[m] * FACTORIALS[n - 2 * m]) * (-0.5 * c) ** m
    return coefficients


def wick_power(phi, c: float, n: int):
    """:phi^n:_c by the explicit sum over contractions."""
    _check_covariance(c)
    return np.polynomial.polynomial.polyval(phi, wick_coefficients(n, c))


def wick_power_hermite(phi, c: float, n: int):
    """:phi^n:_c = c^{n/2} He_n(phi / sqrt(c))."""
    _check_order(n)
    _check_covariance(c)
    if c == 0:
        return np.asarray(phi, dtype=float) ** n
    basis = np.zeros(n + 1)
    basis[n] = 1.0
    return c ** (n / 2) * hermite_e.hermeval(np.asarray(phi, dtype=float) / np.sqrt(c), basis)


def wick_power_recursive(phi, c: float, n: int):
    """:phi^{n+1}: = phi :phi^n: - n c :phi^{n-1}:."""
    _check_order(n)
    _check_covariance(c)
    phi = np.asarray(phi, dtype=float)
    previous, current = np.zeros_like(phi), np.ones_like(phi)
    for k in range(n):
        previous, current = current, phi * current - k * c * previous
    return current


class WickPolynomial(BaseModel):
    """P(lambda) = sum c_j lambda^j, Wick ordered against ``wick_constant``."""

    model_config = ConfigDict(frozen=True)

    coefficients: Tuple[float, ...]
    wick_constant: float = 0.0
    label: OrderingLabel = OrderingLabel.CUSTOM

    @field_validator("coefficients", mode="before")
    @classmethod
    def _strip_trailing_zeros(cls, value):
        values = [float(v) for v in value] or [0.0]
        while len(values) > 1 and values[-1] == 0.0:
            values.pop()
        return tuple(values)

    @model_validator(mode="after")
    def _check_invariants(self) -> "WickPolynomial":
        _check_covariance(self.wick_constant)
        if self.degree > MAX_DEGREE:
            raise DegreeTooHigh(f"polynomial degree {self.degree} exceeds {MAX_DEGREE}")
        if self.degree > 0 and (self.degree % 2 or self.coefficients[-1] <= 0):
            raise BoundedBelowViolation(
                f"degree {self.degree} polynomial with leading coefficient {self.coefficients[-1]} is not bounded below"
            )
        return self

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coefficients[0] == 0.0

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficients of the ordinary polynomial in lambda equal to sum c_j :lambda^j:."""
        total = np.zeros(self.degree + 1)
        for j, c_j in enumerate(self.coefficients):
            if c_j:
                total[: j + 1] += c_j * wick_coefficients(j, self.wick_constant)
        return total


def wick_polynomial_eval(P: WickPolynomial, phi):
    """sum_j c_j :phi^j:_c, vectorised over ``phi``."""
    return np.polynomial.polynomial.polyval(phi, P.monomial_coefficients())


def rewick(P: WickPolynomial, c_new: float, label: OrderingLabel = OrderingLabel.CUSTOM) -> WickPolynomial:
    """Re-express P in terms of :lambda^j:_{c_new}.

    Uses :lambda^n:_{c1} = sum_m n!/(m!(n-2m)!) ((c2 - c1)/2)^m :lambda^{n-2m}:_{c2},
    which is the Wick expansion with the signed constant c1 - c2.
    """
    _check_covariance(c_new)
    shift = P.wick_constant - c_new
    converted = np.zeros(P.degree + 1)
    for n, c_n in enumerate(P.coefficients):
        if c_n:
            converted[: n + 1] += c_n * wick_coefficients(n, shift)
    return WickPolynomial(coefficients=tuple(converted), wick_constant=c_new, label=label)


def lattice_wick_constant(cov: SpectralCovariance) -> float:
    """C(delta, delta) at the lattice cutoff: the site variance."""
    return cov.site_variance


def sharp_time_constants(lat: CylinderLattice) -> Tuple[float, float]:
    """Lattice-resolution sharp-time ordering constants (c_0, c_beta).

    c_0 keeps the x-modes of the lattice and sums the alpha direction exactly
    (the temperature covariance at coinciding points); c_beta keeps the
    alpha-modes and integrates x exactly (the circle covariance 1/(2 nu)).
    """
    params = DispersionParams(beta=lat.beta, mass=lat.mass)
    if lat.dispersion_mode is DispersionMode.CONTINUUM_MODES:
        k_values = np.abs(axis_momenta(lat.n_x, lat.a_x))
        nu_sq = axis_momenta(lat.n_alpha, lat.a_alpha) ** 2
    else:
        k_values = np.sqrt(axis_eigenvalues(lat.n_x, lat.a_x, lat.dispersion_mode))
        nu_sq = axis_eigenvalues(lat.n_alpha, lat.a_alpha, lat.dispersion_mode)
    c_zero = float(sum(cov_thermal_c0(k, params) for k in k_values) / (2.0 * lat.L))
    c_beta = float(np.sum(1.0 / (2.0 * np.sqrt(nu_sq + lat.mass**2))) / lat.beta)
    return c_zero, c_beta
