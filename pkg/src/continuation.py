"""Complex-time checks for the free theory: holomorphy, the KMS boundary condition, tube scans, spectral support."""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import (
    DomainError,
    PointOutsideAnalyticityDomain,
    QuadratureTailTooLarge,
    StencilOutsideDomain,
    TruncationTooSevere,
)
from .estimate import pairings
from .fock import FockModel, joint_spectrum
from .oracles import (
    CertifiedValue,
    DispersionParams,
    RegionSpec,
    TubePoint,
    free_thermal_wightman_batch,
    in_relativistic_tube,
    matsubara_energy,
)
from .rng import make_rng

LOGGER = logging.getLogger(__name__)

HOLOMORPHY_TOLERANCE = 1e-6
KMS_DELTAS = (1e-2, 5e-3, 2.5e-3)
CONTOUR_NODES = 8

# f maps an (m, d) array of complex points to m complex values
VectorFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HolomorphyReport:
    points: Tuple[TubePoint, ...]
    cr_residual: float
    contour_residual: float
    converged: bool
    cr_residuals: Tuple[float, ...] = ()
    contour_residuals: Tuple[float, ...] = ()


def thermal_wightman_function(p: DispersionParams, tol: float = 1e-12) -> VectorFunction:
    """W_beta as a vectorised function of (t, x) rows."""

    def evaluate(z: np.ndarray) -> np.ndarray:
        values = free_thermal_wightman_batch(z[:, 0], z[:, 1], p, tol)
        return np.array([v.value for v in values])

    return evaluate


def _square_contour(step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on the boundary of a square of side ``step``."""
    nodes, weights = np.polynomial.legendre.leggauss(CONTOUR_NODES)
    half = step / 2.0
    corners = half * np.array([-1 - 1j, 1 - 1j, 1 + 1j, -1 + 1j])
    points, dz = [], []
    for start, end in zip(corners, np.roll(corners, -1)):
        points.append(0.5 * (start + end) + 0.5 * (end - start) * nodes)
        dz.append(0.5 * (end - start) * weights)
    return np.concatenate(points), np.concatenate(dz)


def _cauchy_riemann(values: np.ndarray, h: float) -> np.ndarray:
    """f_x + i f_y from central differences at z +- h and z +- i h; the error is h^2 f'''/3."""
    return (values[..., 0] - values[..., 1] + 1j * (values[..., 2] - values[..., 3])) / (2.0 * h)


def holomorphy_probe(
    f: VectorFunction,
    points: Sequence[Sequence[complex]],
    step: float,
    tol: float = HOLOMORPHY_TOLERANCE,
) -> HolomorphyReport:
    """Cauchy-Riemann residual |f_x + i f_y| and Morera contour residual per complex coordinate.

    Every stencil point of every probe point is evaluated in one call to ``f``.
    The difference quotient is Richardson-extrapolated between ``step`` and
    ``step / 2``.
    The contour integral over a square of side ``step`` is divided by its area,
    so an anti-holomorphic conj(z) gives 2 for both residuals.

    Raises:
        StencilOutsideDomain: ``f`` rejects a stencil point.
    """
    if not 1e-6 <= step <= 1e-2:
        raise ValueError(f"step must lie in [1e-6, 1e-2], got {step}")
    centres = np.asarray(points, dtype=complex)
    if centres.ndim == 1:
        centres = centres[:, None]
    m, d = centres.shape
    offsets, dz = _square_contour(step)
    directions = np.array([1, -1, 1j, -1j, 0.5, -0.5, 0.5j, -0.5j]) * step

    stencil = []
    for centre in centres:
        for axis in range(d):
            for shift in np.concatenate([directions, offsets]):
                shifted = centre.copy()
                shifted[axis] += shift
                stencil.append(shifted)
    try:
        values = np.asarray(f(np.array(stencil)), dtype=complex)
    except DomainError as exc:
        raise StencilOutsideDomain(f"probe stencil leaves the analyticity domain: {exc}") from exc
    values = values.reshape(m, d, len(directions) + len(offsets))

    coarse = _cauchy_riemann(values[..., 0:4], step)
    fine = _cauchy_riemann(values[..., 4:8], step / 2.0)
    cr = np.max(np.abs((4.0 * fine - coarse) / 3.0), axis=1)
    contour = np.max(np.abs(values[..., 8:] @ dz), axis=1) / step**2
    report = HolomorphyReport(
        points=tuple(TubePoint(s=c[0], y=c[1] if d > 1 else 0.0) for c in centres),
        cr_residual=float(cr.max()),
        contour_residual=float(contour.max()),
        converged=bool(cr.max() < tol and contour.max() < tol),
        cr_residuals=tuple(float(v) for v in cr),
        contour_residuals=tuple(float(v) for v in contour),
    )
    return report


@dataclass(frozen=True)
class KmsReport:
    deviation: float
    raw_deviations: Tuple[float, ...]
    richardson_ratio: float
    deltas: Tuple[float, ...]


def kms_boundary_check(
    p: DispersionParams,
    s_grid: Sequence[float],
    y_grid: Sequence[float],
    deltas: Sequence[float] = KMS_DELTAS,
    tol: float = 1e-11,
) -> KmsReport:
    """max |W(s - i beta + i delta, y) - W(-s - i delta, -y)| extrapolated to delta -> 0.

    Both arguments sit inside the strip at distance delta from its edges.
    The pointwise differences are extrapolated with a quadratic fit in delta
    through the three matched evaluations. ``richardson_ratio`` (raw deviation
    at the largest over the smallest delta) is a diagnostic only: once the
    differences reach the quadrature floor the ratio is noise.
    """
    s, y = np.meshgrid(np.asarray(s_grid, dtype=float), np.asarray(y_grid, dtype=float), indexing="ij")
    s, y = s.ravel(), y.ravel()
    differences = []
    for delta in deltas:
        t = np.concatenate([s - 1j * p.beta + 1j * delta, -s - 1j * delta])
        x = np.concatenate([y, -y]).astype(complex)
        values = np.array([v.value for v in free_thermal_wightman_batch(t, x, p, tol)])
        differences.append(values[: s.size] - values[s.size :])
    differences = np.array(differences)
    raw = tuple(float(np.max(np.abs(d))) for d in differences)
    if len(deltas) >= 3:
        design = np.vander(np.asarray(deltas, dtype=float), 3, increasing=True)
        coefficients = np.linalg.lstsq(design.astype(complex), differences, rcond=None)[0]
        extrapolated = float(np.max(np.abs(coefficients[0])))
    else:
        extrapolated = raw[-1]
    ratio = raw[0] / raw[-1] if raw[-1] > 0 else float("inf")
    LOGGER.info("KMS boundary: deviation %.3e (raw %s)", extrapolated, ", ".join(f"{r:.2e}" for r in raw))
    return KmsReport(deviation=extrapolated, raw_deviations=raw, richardson_ratio=ratio, deltas=tuple(deltas))


@dataclass(frozen=True)
class TubeScanRow:
    index: int
    points: Tuple[TubePoint, ...]
    expected_inside: bool
    classified_inside: bool
    cr_residual: float
    contour_residual: float
    tail_bound: float

    @property
    def correct(self) -> bool:
        return self.expected_inside == self.classified_inside


@dataclass(frozen=True)
class TubeScanReport:
    rows: Tuple[TubeScanRow, ...]

    @property
    def n_correct(self) -> int:
        return sum(row.correct for row in self.rows)

    @property
    def passed(self) -> bool:
        return self.n_correct == len(self.rows)


def _sample_cone(rng: np.random.Generator, scale: float, margin: float) -> Tuple[float, float]:
    """Uniform point of the shrunken cone |s| < alpha - margin, alpha < scale - |s| - margin."""
    while True:
        alpha = rng.uniform(0.0, scale)
        s = rng.uniform(-scale / 2.0, scale / 2.0)
        if abs(s) + margin < alpha < scale - abs(s) - margin:
            return alpha, s


def _sample_outside(rng: np.random.Generator, beta: float, margin: float) -> Tuple[float, float]:
    """Point of the box [-beta/2, 3 beta/2] x [-beta, beta] at distance > margin from the closed cone."""
    while True:
        alpha = rng.uniform(-beta / 2.0, 1.5 * beta)
        s = rng.uniform(-beta, beta)
        if alpha < abs(s) - margin or alpha > beta - abs(s) + margin:
            return alpha, s


def tube_scan(
    p: DispersionParams,
    spec: RegionSpec,
    n_inside: int,
    n_outside: int,
    seed: int,
    step: float = 1e-4,
    margin: float = 0.05,
    tol: float = 1e-12,
    stream: Sequence[int] = (0,),
) -> TubeScanReport:
    """Classify random complex configurations as inside or outside the product of tubes.

    Inside: the imaginary part of point j is drawn from -lambda_j V_beta (shrunk by
    ``margin * beta``); each W(z_j) must evaluate with a certified tail and pass the
    holomorphy probe. Outside: one point's imaginary part is pushed outside the closed
    V_beta; some W(z_j) must refuse to converge.
    """
    if n_inside < 10 or n_outside < 10:
        raise ValueError("tube scans need at least 10 inside and 10 outside points")
    rng = make_rng(seed, *stream)
    beta = spec.beta
    configurations: List[Tuple[bool, Tuple[TubePoint, ...]]] = []
    for index in range(n_inside + n_outside):
        inside = index < n_inside
        imaginary = [_sample_cone(rng, lam * beta, margin * lam * beta) for lam in spec.lambdas]
        if not inside:
            imaginary[int(rng.integers(len(imaginary)))] = _sample_outside(rng, beta, margin * beta)
        real = rng.uniform(-3.0, 3.0, size=(len(imaginary), 2))
        points = tuple(TubePoint(s=complex(r[0], -a), y=complex(r[1], -b)) for r, (a, b) in zip(real, imaginary))
        configurations.append((inside, points))

    inside_points = [point for inside, points in configurations if inside for point in points]
    probe = holomorphy_probe(
        thermal_wightman_function(p, tol), [(z.s, z.y) for z in inside_points], step
    ) if inside_points else None
    tails = free_thermal_wightman_batch([z.s for z in inside_points], [z.y for z in inside_points], p, tol)

    rows = []
    cursor = 0
    for index, (inside, points) in enumerate(configurations):
        expected = in_relativistic_tube(points, spec)
        if inside:
            span = slice(cursor, cursor + len(points))
            cursor += len(points)
            cr = max(probe.cr_residuals[span])
            contour = max(probe.contour_residuals[span])
            tail = max(v.tail_bound for v in tails[span])
            classified = cr < HOLOMORPHY_TOLERANCE and contour < HOLOMORPHY_TOLERANCE
        else:
            cr = contour = tail = float("nan")
            classified = True
            for z in points:
                try:
                    free_thermal_wightman_batch([z.s], [z.y], p, tol)
                except (PointOutsideAnalyticityDomain, QuadratureTailTooLarge):
                    classified = False
                    break
        rows.append(TubeScanRow(index, points, expected, classified, cr, contour, tail))
    report = TubeScanReport(rows=tuple(rows))
    LOGGER.info("Tube scan: %d/%d correctly classified", report.n_correct, len(rows))
    return report


def quasi_free_npoint(points: Sequence[TubePoint], p: DispersionParams, tol: float = 1e-12) -> CertifiedValue:
    """sum over pairings of prod W(z_a - z_b), a < b, with a first-order error bound.

    Raises:
        PointOutsideAnalyticityDomain: some pair difference leaves the tube.
    """
    n = len(points)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    if not pairs:
        return CertifiedValue(0.0, 0.0, 0.0)
    values = free_thermal_wightman_batch(
        [points[a].s - points[b].s for a, b in pairs], [points[a].y - points[b].y for a, b in pairs], p, tol
    )
    lookup = dict(zip(pairs, values))
    total, error = 0.0 + 0.0j, 0.0
    for matching in pairings(range(n)):
        factors = [lookup[pair] for pair in matching]
        total += np.prod([f.value for f in factors])
        for k, factor in enumerate(factors):
            others = np.prod([abs(f.value) for j, f in enumerate(factors) if j != k])
            error += factor.error_bound * others
    return CertifiedValue(complex(total), float(error), 0.0)


@dataclass(frozen=True)
class SpectralReport:
    n_checked: int
    min_margin: float
    violations: int
    truncation_violations: int
    passed: bool

    @property
    def truncation_too_severe(self) -> bool:
        return self.violations == 0 and self.truncation_violations > 0


def spectral_support_check(p: DispersionParams, n_cut: int) -> SpectralReport:
    """nu_n > |k_n| and nu_n^2 - k_n^2 = m^2 for every circle mode |n| <= n_cut."""
    modes = np.arange(-n_cut, n_cut + 1)
    k = 2.0 * np.pi * modes / p.beta
    nu = matsubara_energy(modes, p)
    margin = nu - np.abs(k)
    dispersion_error = np.abs(nu**2 - k**2 - p.mass**2) / np.maximum(1.0, nu**2)
    violations = int(np.sum((margin <= 0) | (dispersion_error > 1e-12)))
    return SpectralReport(
        n_checked=modes.size,
        min_margin=float(margin.min()),
        violations=violations,
        truncation_violations=0,
        passed=violations == 0,
    )


def spectral_support_check_fock(
    model: FockModel, tol: float = 1e-9, strict: bool = False
) -> SpectralReport:
    """Joint (P_C, H_C) spectrum against E >= |p|, excluding the top decile of energies.

    Violations confined to the excluded top decile are counted separately.

    Raises:
        TruncationTooSevere: with ``strict``, when only the top decile violates the bound.
    """
    pairs = np.array(joint_spectrum(model, interacting=True))
    momenta, energies = pairs[:, 0], pairs[:, 1]
    margin = energies - np.abs(momenta)
    cutoff = np.quantile(energies, 0.9)
    retained = energies <= cutoff
    violations = int(np.sum((margin < -tol) & retained))
    truncation_violations = int(np.sum((margin < -tol) & ~retained))
    report = SpectralReport(
        n_checked=int(retained.sum()),
        min_margin=float(margin[retained].min()),
        violations=violations,
        truncation_violations=truncation_violations,
        passed=violations == 0,
    )
    if strict and report.truncation_too_severe:
        raise TruncationTooSevere(f"{truncation_violations} violations in the truncation-polluted top decile")
    return report


@dataclass(frozen=True)
class GrowthReport:
    lambdas: Tuple[float, ...]
    magnitudes: Tuple[float, ...]
    slope: float


def growth_diagnostic(
    p: DispersionParams, direction: Tuple[float, float], lambdas: Sequence[float], tol: float = 1e-10
) -> GrowthReport:
    """Slope of log|W(-i lambda alpha, -i lambda s)| against log lambda as lambda decreases.

    ``direction`` = (alpha, s) must lie in V_beta. Not an acceptance test.
    """
    alpha, s = direction
    lambdas = np.asarray(lambdas, dtype=float)
    values = free_thermal_wightman_batch(-1j * lambdas * alpha, -1j * lambdas * s, p, tol)
    magnitudes = np.array([abs(v.value) for v in values])
    slope = float(np.polyfit(np.log(lambdas), np.log(magnitudes), 1)[0])
    return GrowthReport(lambdas=tuple(lambdas), magnitudes=tuple(magnitudes), slope=slope)


def kms_grid(extent: float = 2.0, n: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """A square n x n grid of real (s, y) in [-extent, extent]^2."""
    axis = np.linspace(-extent, extent, n)
    return axis, axis

