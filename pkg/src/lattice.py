"""Lattice discretisation of the cylinder S_beta x [-L, L) and the free field on it.

Conventions
-----------
* Site (i, j) sits at alpha_i = i * a_alpha and x_j = -L + (j + 1/2) * a_x.
* Arrays of shape (n_alpha, n_x) are indexed [i, j]; mode arrays use FFT order.
* A test function f is a lattice array and phi(f) = sum a_alpha * a_x * f * phi,
  so E[phi(f) phi(g)] = (f, C g) with the site Green's function
  G = (-Delta_lat + m^2)^{-1} / (a_alpha * a_x).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import (
    LatticeMismatch,
    LatticeTooLargeForDenseOracle,
    NonPositiveParameter,
    OddLatticeSize,
)
from .rng import make_rng

LOGGER = logging.getLogger(__name__)

DENSE_ORACLE_MAX_SITES = 4096
SAMPLE_BATCH = 4096


class DispersionMode(str, Enum):
    LATTICE_LAPLACIAN = "LatticeLaplacian"
    CONTINUUM_MODES = "ContinuumModes"


class CylinderLattice(BaseModel):
    """Torus approximation of the cylinder with thermal circumference ``beta``."""

    model_config = ConfigDict(frozen=True)

    beta: float
    L: float
    n_alpha: int
    n_x: int
    mass: float
    dispersion_mode: DispersionMode = DispersionMode.LATTICE_LAPLACIAN

    @model_validator(mode="after")
    def _check_invariants(self) -> "CylinderLattice":
        for name in ("beta", "L", "mass"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise NonPositiveParameter(f"{name} must be positive, got {value}")
        for name in ("n_alpha", "n_x"):
            value = getattr(self, name)
            if value <= 0:
                raise NonPositiveParameter(f"{name} must be positive, got {value}")
            if value % 2:
                raise OddLatticeSize(f"{name} must be even, got {value}")
        return self

    @property
    def a_alpha(self) -> float:
        return self.beta / self.n_alpha

    @property
    def a_x(self) -> float:
        return 2.0 * self.L / self.n_x

    @property
    def cell_area(self) -> float:
        return self.a_alpha * self.a_x

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_alpha, self.n_x)

    @property
    def n_sites(self) -> int:
        return self.n_alpha * self.n_x

    @property
    def alpha_coords(self) -> np.ndarray:
        return np.arange(self.n_alpha) * self.a_alpha

    @property
    def x_coords(self) -> np.ndarray:
        return -self.L + (np.arange(self.n_x) + 0.5) * self.a_x

    def is_symmetric(self) -> bool:
        """True when the alpha and x axes are interchangeable (beta = 2L, n_alpha = n_x)."""
        return self.n_alpha == self.n_x and np.isclose(self.beta, 2.0 * self.L, rtol=1e-14, atol=0.0)

    def swapped(self) -> "CylinderLattice":
        """The lattice with the two Euclidean axes exchanged."""
        return CylinderLattice(
            beta=2.0 * self.L,
            L=self.beta / 2.0,
            n_alpha=self.n_x,
            n_x=self.n_alpha,
            mass=self.mass,
            dispersion_mode=self.dispersion_mode,
        )


@dataclass(frozen=True)
class FieldConfiguration:
    """One real field value per site."""

    lattice: CylinderLattice
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.lattice.shape:
            raise LatticeMismatch(f"configuration shape {self.values.shape} does not match lattice {self.lattice.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field configuration contains non-finite values")


@dataclass(frozen=True)
class SpectralCovariance:
    """Per-mode multipliers of (-Delta + m^2)^{-1}; immutable and shareable across chains."""

    lattice: CylinderLattice
    multipliers: np.ndarray
    site_variance: float
    sqrt_multipliers: np.ndarray = field(repr=False)


def build_lattice(
    beta: float,
    L: float,
    n_alpha: int,
    n_x: int,
    mass: float,
    dispersion: DispersionMode | str = DispersionMode.LATTICE_LAPLACIAN,
) -> CylinderLattice:
    """Validate the parameters and return the lattice.

    Raises:
        NonPositiveParameter: beta, L or mass not strictly positive.
        OddLatticeSize: n_alpha or n_x odd (sizes below 4 are rejected too).
    """
    for name, value in (("beta", beta), ("L", L), ("mass", mass)):
        if not value > 0:
            raise NonPositiveParameter(f"{name} must be positive, got {value}")
    for name, value in (("n_alpha", n_alpha), ("n_x", n_x)):
        if value % 2:
            raise OddLatticeSize(f"{name} must be even, got {value}")
        if value < 4:
            raise NonPositiveParameter(f"{name} must be at least 4, got {value}")
    return CylinderLattice(
        beta=beta, L=L, n_alpha=n_alpha, n_x=n_x, mass=mass, dispersion_mode=DispersionMode(dispersion)
    )


def axis_eigenvalues(n: int, a: float, dispersion: DispersionMode) -> np.ndarray:
    """Eigenvalues of -d^2 on a ring of ``n`` sites with spacing ``a``, in FFT order."""
    if dispersion is DispersionMode.LATTICE_LAPLACIAN:
        return (2.0 / a**2) * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))
    momenta = 2.0 * np.pi * np.fft.fftfreq(n, d=a)
    return momenta**2


def axis_momenta(n: int, a: float) -> np.ndarray:
    """Signed continuum momenta 2*pi*n~/(n*a) in FFT order."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=a)


def spectral_multipliers(lat: CylinderLattice) -> SpectralCovariance:
    nu_sq = axis_eigenvalues(lat.n_alpha, lat.a_alpha, lat.dispersion_mode)
    k_sq = axis_eigenvalues(lat.n_x, lat.a_x, lat.dispersion_mode)
    multipliers = 1.0 / (nu_sq[:, None] + k_sq[None, :] + lat.mass**2)
    multipliers.setflags(write=False)
    site_variance = float(multipliers.sum() / (lat.n_sites * lat.cell_area))
    sqrt_multipliers = np.sqrt(multipliers)
    sqrt_multipliers.setflags(write=False)
    return SpectralCovariance(
        lattice=lat, multipliers=multipliers, site_variance=site_variance, sqrt_multipliers=sqrt_multipliers
    )


def spectral_green(cov: SpectralCovariance) -> np.ndarray:
    """G(delta_i, delta_j): the site Green's function as a function of the separation."""
    transformed = np.fft.ifft2(cov.multipliers)
    return transformed.real / cov.lattice.cell_area


def green_matrix(cov: SpectralCovariance) -> np.ndarray:
    """The spectral Green's function laid out as a (n_sites, n_sites) matrix, site s = i * n_x + j."""
    lat = cov.lattice
    kernel = spectral_green(cov)
    i, j = np.divmod(np.arange(lat.n_sites), lat.n_x)
    return kernel[(i[:, None] - i[None, :]) % lat.n_alpha, (j[:, None] - j[None, :]) % lat.n_x]


def ring_laplacian(n: int, a: float) -> np.ndarray:
    """Dense -d^2 on a ring; for n = 2 both neighbours coincide and the off-diagonal is -2/a^2."""
    operator = np.zeros((n, n))
    for i in range(n):
        operator[i, i] += 2.0 / a**2
        operator[i, (i + 1) % n] -= 1.0 / a**2
        operator[i, (i - 1) % n] -= 1.0 / a**2
    return operator


def continuum_axis_operator(n: int, a: float) -> np.ndarray:
    """Dense ring operator with eigenvalues (2*pi*n~/(n*a))^2 on the discrete Fourier modes."""
    eigenvalues = axis_eigenvalues(n, a, DispersionMode.CONTINUUM_MODES)
    separation = np.subtract.outer(np.arange(n), np.arange(n))
    phases = np.exp(2j * np.pi * np.multiply.outer(separation, np.arange(n)) / n)
    return (phases @ eigenvalues).real / n


def lattice_operator(lat: CylinderLattice) -> np.ndarray:
    """Dense (-Delta + m^2) on the site basis s = i * n_x + j."""
    if lat.dispersion_mode is DispersionMode.LATTICE_LAPLACIAN:
        op_alpha = ring_laplacian(lat.n_alpha, lat.a_alpha)
        op_x = ring_laplacian(lat.n_x, lat.a_x)
    else:
        op_alpha = continuum_axis_operator(lat.n_alpha, lat.a_alpha)
        op_x = continuum_axis_operator(lat.n_x, lat.a_x)
    return (
        np.kron(op_alpha, np.eye(lat.n_x))
        + np.kron(np.eye(lat.n_alpha), op_x)
        + lat.mass**2 * np.eye(lat.n_sites)
    )


def dense_green_oracle(lat: CylinderLattice) -> np.ndarray:
    """Explicit inverse of the lattice operator, scaled to the smearing convention."""
    if lat.n_sites > DENSE_ORACLE_MAX_SITES:
        raise LatticeTooLargeForDenseOracle(
            f"{lat.n_sites} sites exceeds the dense oracle limit of {DENSE_ORACLE_MAX_SITES}"
        )
    green = np.linalg.inv(lattice_operator(lat)) / lat.cell_area
    return 0.5 * (green + green.T)


def colour_noise(cov: SpectralCovariance, noise: np.ndarray) -> Tuple[np.ndarray, float]:
    """Turn white noise of shape (..., n_alpha, n_x) into free-field configurations.

    The FFT of real white noise divided by sqrt(N) has exactly the Hermitian
    pairing of a real field: self-conjugate modes are real standard normals,
    paired modes carry independent real and imaginary parts of variance 1/2.
    Scaling by sqrt(multiplier) and transforming back gives covariance G.

    Returns the real configurations and the largest discarded imaginary part.
    """
    modes = np.fft.fft2(noise, axes=(-2, -1)) * cov.sqrt_multipliers
    fields = np.fft.ifft2(modes, axes=(-2, -1)) / np.sqrt(cov.lattice.cell_area)
    residue = float(np.max(np.abs(fields.imag))) if fields.size else 0.0
    return fields.real, residue


def iter_gaussian_batches(
    cov: SpectralCovariance, rng: np.random.Generator, count: int, batch_size: int = SAMPLE_BATCH
) -> Iterator[np.ndarray]:
    """Yield free-field batches of at most ``batch_size`` configurations until ``count`` are drawn."""
    remaining = count
    while remaining > 0:
        size = min(batch_size, remaining)
        fields, residue = colour_noise(cov, rng.standard_normal((size, *cov.lattice.shape)))
        if residue > 1e-12:
            LOGGER.warning("Inverse transform left an imaginary residue of %.3e", residue)
        remaining -= size
        yield fields


def sample_gaussian(cov: SpectralCovariance, seed: int, count: int, stream: Sequence[int] = (0,)) -> np.ndarray:
    """Draw ``count`` i.i.d. free-field configurations, shape (count, n_alpha, n_x).

    Bit-reproducible for a given (seed, stream).
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = make_rng(seed, *stream)
    return np.concatenate(list(iter_gaussian_batches(cov, rng, count)), axis=0)


def smear(configs: np.ndarray, f: np.ndarray, lat: CylinderLattice) -> np.ndarray:
    """phi(f) for every configuration in a batch."""
    return lat.cell_area * np.tensordot(configs, f, axes=([-2, -1], [0, 1]))


def covariance_pairing(cov: SpectralCovariance, f: np.ndarray, g: np.ndarray) -> float:
    """(f, C g) under the lattice pairing, evaluated spectrally."""
    lat = cov.lattice
    f_hat = np.fft.fft2(f)
    g_hat = np.fft.fft2(g)
    return float(lat.cell_area * np.sum(np.conj(f_hat) * g_hat * cov.multipliers).real / lat.n_sites)


def volume_convergence(
    beta: float,
    half_lengths: Sequence[float],
    a: float,
    mass: float,
    n_alpha: int,
    dispersion: DispersionMode | str = DispersionMode.LATTICE_LAPLACIAN,
) -> List[Tuple[float, float]]:
    """Site variance at fixed spacing ``a`` for growing spatial half-lengths."""
    table = []
    for half_length in half_lengths:
        n_x = int(round(2.0 * half_length / a))
        lat = build_lattice(beta, half_length, n_alpha, n_x, mass, dispersion)
        table.append((half_length, spectral_multipliers(lat).site_variance))
    return table
