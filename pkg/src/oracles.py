"""Closed-form continuum formulas: sharp-time covariances, free Wightman functions, tube geometry.

Complex-time convention: the free thermal two-point function W(t, x) is
analytic for (-Im t, -Im x) in V_beta = {(alpha, s) : |s| < alpha < beta - |s|};
the circle two-point function is analytic for Im s < 0.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.integrate import quad_vec

from .errors import (
    ArgumentOutsidePeriod,
    InvalidRegion,
    LambdaMismatch,
    NonPositiveParameter,
    PointOutsideAnalyticityDomain,
    QuadratureTailTooLarge,
    TailTooLarge,
    TubeViolation,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-12
MAX_MOMENTUM_CUTOFF = 1e6


class DispersionParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float
    mass: float

    @model_validator(mode="after")
    def _positive(self) -> "DispersionParams":
        if not (self.beta > 0 and self.mass > 0):
            raise NonPositiveParameter(f"beta and mass must be positive, got beta={self.beta}, mass={self.mass}")
        return self


@dataclass(frozen=True)
class TubePoint:
    """Complex time-like (s) and space-like (y) coordinate differences."""

    s: complex
    y: complex

    def __post_init__(self):
        if not (np.isfinite(complex(self.s)) and np.isfinite(complex(self.y))):
            raise ValueError("tube point components must be finite")

    @property
    def imaginary_part(self) -> Tuple[float, float]:
        return (complex(self.s).imag, complex(self.y).imag)


class RegionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float
    lambdas: Tuple[float, ...]

    @field_validator("lambdas", mode="before")
    @classmethod
    def _as_tuple(cls, value):
        return tuple(float(v) for v in value)

    @model_validator(mode="after")
    def _weights(self) -> "RegionSpec":
        if self.beta <= 0:
            raise NonPositiveParameter(f"beta must be positive, got {self.beta}")
        if not self.lambdas or any(lam <= 0 for lam in self.lambdas):
            raise InvalidRegion(f"lambda weights must be positive, got {self.lambdas}")
        if abs(sum(self.lambdas) - 1.0) > 1e-12:
            raise InvalidRegion(f"lambda weights must sum to 1, got {sum(self.lambdas)!r}")
        return self


@dataclass(frozen=True)
class CertifiedValue:
    """A numerically evaluated value with its quadrature error estimate and analytic tail bound."""

    value: complex
    quad_error: float
    tail_bound: float

    @property
    def error_bound(self) -> float:
        return self.quad_error + self.tail_bound


def energy(k, p: DispersionParams):
    """epsilon(k) = sqrt(k^2 + m^2)."""
    return np.sqrt(np.asarray(k, dtype=float) ** 2 + p.mass**2)


def matsubara_energy(n, p: DispersionParams):
    """nu_n = sqrt((2 pi n / beta)^2 + m^2)."""
    return np.sqrt((2.0 * np.pi * np.asarray(n, dtype=float) / p.beta) ** 2 + p.mass**2)


def cov_thermal_c0(k, p: DispersionParams):
    """Temperature 1/beta covariance (1 + e^{-beta eps}) / (2 eps (1 - e^{-beta eps}))."""
    eps = energy(k, p)
    boltzmann = np.exp(-p.beta * eps)
    return (1.0 + boltzmann) / (2.0 * eps * -np.expm1(-p.beta * eps))


def cov_thermal_c0_coth(k, p: DispersionParams):
    """The same covariance written as coth(beta eps / 2) / (2 eps)."""
    eps = energy(k, p)
    return 1.0 / (2.0 * eps * np.tanh(p.beta * eps / 2.0))


def cov_circle_cbeta(n, p: DispersionParams):
    """Circle covariance multiplier 1/(2 nu_n)."""
    return 1.0 / (2.0 * matsubara_energy(n, p))


def cov_mixed_sharp_time(d_alpha, k, p: DispersionParams):
    """Sharp-time covariance at imaginary-time separation d_alpha in [0, beta], momentum k."""
    d_alpha = np.asarray(d_alpha, dtype=float)
    if np.any(d_alpha < 0) or np.any(d_alpha > p.beta):
        raise ArgumentOutsidePeriod(f"separation must lie in [0, {p.beta}], got {d_alpha}")
    eps = energy(k, p)
    numerator = np.exp(-d_alpha * eps) + np.exp(-(p.beta - d_alpha) * eps)
    return numerator / (2.0 * eps * -np.expm1(-p.beta * eps))


def cov_spatial_circle(d_x, n, p: DispersionParams):
    """Circle covariance at spatial separation d_x >= 0 for mode n: e^{-d_x nu_n} / (2 nu_n)."""
    d_x = np.asarray(d_x, dtype=float)
    if np.any(d_x < 0):
        raise ArgumentOutsidePeriod(f"spatial separation must be non-negative, got {d_x}")
    nu = matsubara_energy(n, p)
    return np.exp(-d_x * nu) / (2.0 * nu)


def _damping_gaps(t: np.ndarray, x: np.ndarray, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    tau = -t.imag
    xi = np.abs(x.imag)
    return tau - xi, beta - tau - xi


def thermal_tail_bound(cutoff: float, gap_low, gap_high, p: DispersionParams):
    """Bound on the |k| > cutoff part of the thermal Wightman integral."""
    prefactor = 1.0 / (2.0 * np.pi * cutoff * -np.expm1(-p.beta * p.mass))
    return prefactor * (np.exp(-cutoff * gap_low) / gap_low + np.exp(-cutoff * gap_high) / gap_high)


def _choose_cutoff(gap_low: np.ndarray, gap_high: np.ndarray, p: DispersionParams, tol: float) -> float:
    cutoff = max(10.0, 1.0 / float(np.min(np.minimum(gap_low, gap_high))))
    while np.max(thermal_tail_bound(cutoff, gap_low, gap_high, p)) > 0.1 * tol:
        cutoff *= 2.0
        if cutoff > MAX_MOMENTUM_CUTOFF:
            raise QuadratureTailTooLarge(
                f"momentum cutoff above {MAX_MOMENTUM_CUTOFF:g} needed for tolerance {tol:g}"
            )
    return cutoff


def free_thermal_wightman_batch(
    t: Sequence[complex], x: Sequence[complex], p: DispersionParams, tol: float = DEFAULT_TOLERANCE
) -> List[CertifiedValue]:
    """W_beta(t, x) at many complex points with one adaptive Gauss-Kronrod pass.

    W = int dk/(2 pi) 1/(2 eps) [(1 + n) e^{-i eps t + i k x} + n e^{i eps t - i k x}],
    n = 1/(e^{beta eps} - 1). Both exponents are assembled before exponentiating
    so the integrand stays bounded by e^{-|k| gap}.
    """
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    gap_low, gap_high = _damping_gaps(t, x, p.beta)
    outside = (gap_low <= 0) | (gap_high <= 0)
    if np.any(outside):
        index = int(np.argmax(outside))
        raise PointOutsideAnalyticityDomain(
            f"(t, x) = ({t[index]}, {x[index]}) has imaginary part outside V_beta; the integral does not converge"
        )
    cutoff = _choose_cutoff(gap_low, gap_high, p, tol)

    def integrand(k: float) -> np.ndarray:
        eps = np.sqrt(k * k + p.mass**2)
        denominator = -np.expm1(-p.beta * eps)
        forward = np.exp(-1j * eps * t + 1j * k * x)
        backward = np.exp(1j * eps * (t + 1j * p.beta) - 1j * k * x)
        return (forward + backward) / (denominator * 4.0 * np.pi * eps)

    values, quad_error = quad_vec(
        integrand, -cutoff, cutoff, epsabs=0.1 * tol, epsrel=1e-13, norm="max", limit=20000, points=[0.0]
    )
    tails = thermal_tail_bound(cutoff, gap_low, gap_high, p)
    LOGGER.debug("thermal Wightman: %d points, cutoff %.3g, quadrature error %.3e", t.size, cutoff, quad_error)
    return [CertifiedValue(complex(v), float(quad_error), float(b)) for v, b in zip(values, tails)]


def free_thermal_wightman(z: TubePoint, p: DispersionParams, tol: float = DEFAULT_TOLERANCE) -> CertifiedValue:
    """W_beta at a single complex point z = (t, x)."""
    return free_thermal_wightman_batch([z.s], [z.y], p, tol)[0]


def circle_tail_bound(eta: float, n_cut: int, p: DispersionParams) -> float:
    """Bound on sum_{|n| > n_cut} e^{-eta nu_n} / (2 beta nu_n)."""
    ratio = np.exp(-2.0 * np.pi * eta / p.beta)
    return float(ratio ** (n_cut + 1) / (2.0 * np.pi * (n_cut + 1) * (1.0 - ratio)))


def free_circle_wightman(
    alpha: float,
    z_s: complex,
    p: DispersionParams,
    n_cut: int,
    tol: float = DEFAULT_TOLERANCE,
    regulator: float = 1e-3,
) -> CertifiedValue:
    """Vacuum two-point function on the circle S_beta: sum_n e^{i k_n alpha - i nu_n z_s} / (2 beta nu_n).

    Real ``z_s`` is shifted to ``z_s - i*regulator``.
    """
    z_s = complex(z_s)
    if z_s.imag > 0:
        raise TubeViolation(f"Im s = {z_s.imag} > 0 lies outside the forward tube")
    if z_s.imag == 0:
        if regulator <= 0:
            raise TubeViolation("real time argument needs a positive regulator")
        z_s -= 1j * regulator
    modes = np.arange(-n_cut, n_cut + 1)
    k_n = 2.0 * np.pi * modes / p.beta
    nu_n = matsubara_energy(modes, p)
    value = np.sum(np.exp(1j * k_n * alpha - 1j * nu_n * z_s) / (2.0 * p.beta * nu_n))
    tail = circle_tail_bound(-z_s.imag, n_cut, p)
    if tail > tol:
        raise TailTooLarge(f"tail bound {tail:.3e} beyond n_cut={n_cut} exceeds tolerance {tol:.1e}")
    return CertifiedValue(complex(value), 0.0, tail)


def in_v_beta(point: Tuple[float, float], beta: float) -> bool:
    """Open double cone |s| < alpha < beta - |s|."""
    alpha, s = point
    return bool(abs(s) < alpha < beta - abs(s))


def in_jn(points: Sequence[Tuple[float, float]], spec: RegionSpec) -> bool:
    """Every consecutive difference of the ordered points lies in lambda_i V_beta."""
    if len(spec.lambdas) != len(points) - 1:
        raise LambdaMismatch(f"{len(points)} points need {len(points) - 1} weights, got {len(spec.lambdas)}")
    for (a0, s0), (a1, s1), lam in zip(points[:-1], points[1:], spec.lambdas):
        if not in_v_beta((a1 - a0, s1 - s0), lam * spec.beta):
            return False
    return True


def in_relativistic_tube(z: Sequence[TubePoint], spec: RegionSpec) -> bool:
    """Imaginary part of the j-th point lies in -lambda_j V_beta."""
    if len(spec.lambdas) != len(z):
        raise LambdaMismatch(f"{len(z)} tube points need {len(z)} weights, got {len(spec.lambdas)}")
    for point, lam in zip(z, spec.lambdas):
        im_s, im_y = point.imaginary_part
        if not in_v_beta((-im_s, -im_y), lam * spec.beta):
            return False
    return True


def in_tube_union(z: Sequence[TubePoint], beta: float, lambda_grid: Iterable[Sequence[float]]) -> bool:
    """True when some weight vector on the supplied grid puts ``z`` in the product of scaled tubes."""
    return any(in_relativistic_tube(z, RegionSpec(beta=beta, lambdas=lambdas)) for lambdas in lambda_grid)
