"""Schwinger functions and the statistical verification battery.

Sharp-time fields are lattice sums on one alpha-slice:
phi(alpha_i, h) = a_x * sum_j h_j phi(i, j). All checks accept an optional
pre-drawn ``Ensemble`` so a battery can share samples between them.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from math import factorial, prod
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AsymmetricLatticeForExactVariant, GapTooSmall, OffLatticeTime, SupportViolation
from .lattice import CylinderLattice, SpectralCovariance, covariance_pairing, spectral_multipliers
from .measure import Ensemble, MeasureSpec, SamplingParams, interaction_action_batch, sample_measure
from .oracles import DispersionParams, cov_mixed_sharp_time
from .statistics import Estimate
from .wick import OrderingLabel, rewick, sharp_time_constants, wick_coefficients

LOGGER = logging.getLogger(__name__)

MAX_NPOINT = 8
MAX_MOMENT_ORDER = 8
MAX_HOLDER_EXPONENT = 12
EXACT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SmearedPoint:
    """phi(alpha, h): a sharp-time field at ``alpha`` smeared with the spatial profile h."""

    alpha: float
    profile: np.ndarray
    normalization: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.profile)):
            raise ValueError("profile must be finite")
        if not np.any(self.profile):
            raise ValueError("profile must not vanish identically")


class ReflectionAxis(str, Enum):
    ALPHA = "AlphaReflection"
    X = "XReflection"


@dataclass(frozen=True)
class ReflectionSpec:
    axis: ReflectionAxis


def slice_index(lat: CylinderLattice, alpha: float) -> int:
    """Index i with alpha = i * a_alpha.

    Raises:
        OffLatticeTime: alpha outside [0, beta) or between slices.
    """
    position = alpha / lat.a_alpha
    index = int(round(position))
    if alpha < 0 or index >= lat.n_alpha or abs(position - index) > 1e-9:
        raise OffLatticeTime(f"alpha={alpha} is not a lattice slice (spacing {lat.a_alpha})")
    return index


def smeared_point(lat: CylinderLattice, alpha: float, profile: Sequence[float]) -> SmearedPoint:
    profile = np.asarray(profile, dtype=float)
    if profile.shape != (lat.n_x,):
        raise ValueError(f"profile needs {lat.n_x} entries, got {profile.shape}")
    slice_index(lat, alpha)
    return SmearedPoint(alpha=float(alpha), profile=profile, normalization=float(lat.a_x * np.sum(profile**2)))


def gaussian_profile(lat: CylinderLattice, width: float = 1.0, centre: float = 0.0) -> np.ndarray:
    return np.exp(-(((lat.x_coords - centre) / width) ** 2))


def sharp_time_fields(configs: np.ndarray, lat: CylinderLattice, profile: np.ndarray) -> np.ndarray:
    """phi(alpha_i, h) for every sample and slice, shape (n, n_alpha)."""
    return lat.a_x * (configs @ profile)


def point_test_function(lat: CylinderLattice, point: SmearedPoint) -> np.ndarray:
    """Lattice test function f with phi(f) = phi(alpha, h)."""
    f = np.zeros(lat.shape)
    f[slice_index(lat, point.alpha)] = point.profile / lat.a_alpha
    return f


def pairings(items: Sequence[int]) -> Iterator[Tuple[Tuple[int, int], ...]]:
    """All perfect matchings of ``items``; none for an odd count."""
    items = list(items)
    if not items:
        yield ()
        return
    if len(items) % 2:
        return
    first = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1 :]
        for tail in pairings(rest):
            yield ((first, items[k]),) + tail


def isserlis(covariance: np.ndarray) -> float:
    """Gaussian moment E[X_1 ... X_n] as the sum over pairings of covariance products."""
    covariance = np.asarray(covariance)
    n = covariance.shape[0]
    if n > MAX_NPOINT:
        raise ValueError(f"Isserlis sums are limited to n <= {MAX_NPOINT}")
    return sum(prod(covariance[a, b] for a, b in matching) for matching in pairings(range(n)))


def wick_pair_oracle(covariance: np.ndarray, c: float, n: int, m: int) -> float:
    """E[:phi(a)^n:_c :phi(b)^m:_c] for a Gaussian pair with 2x2 ``covariance``.

    Both Wick powers are expanded into monomials and every monomial moment is
    summed over its pairings.
    """
    covariance = np.asarray(covariance, dtype=float)
    total = 0.0
    for i, left in enumerate(wick_coefficients(n, c)):
        for j, right in enumerate(wick_coefficients(m, c)):
            if left == 0.0 or right == 0.0:
                continue
            labels = [0] * i + [1] * j
            total += left * right * isserlis(covariance[np.ix_(labels, labels)])
    return float(total)


def double_factorial(n: int) -> int:
    return prod(range(n, 0, -2))


def gaussian_moment(p: int, variance: float) -> float:
    """E[X^p] for X ~ N(0, variance): zero for odd p, (p-1)!! variance^{p/2} otherwise."""
    if p % 2:
        return 0.0
    return double_factorial(p - 1) * variance ** (p // 2)


def generating_functional(ensemble: Ensemble, f: np.ndarray) -> Estimate:
    """Re E[e^{i phi(f)}] = E[cos phi(f)]."""
    lat = ensemble.lattice
    return ensemble.estimate(lambda configs: np.cos(lat.cell_area * np.tensordot(configs, f, axes=2)))


def free_generating_functional(cov: SpectralCovariance, f: np.ndarray) -> float:
    return float(np.exp(-0.5 * covariance_pairing(cov, f, f)))


def _ensemble(spec: MeasureSpec, run: SamplingParams, seed: int, stream, ensemble: Optional[Ensemble]) -> Ensemble:
    return ensemble if ensemble is not None else sample_measure(spec, seed, run, stream)


def schwinger_npoint(
    points: Sequence[SmearedPoint],
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
) -> Estimate:
    """Monte Carlo estimate of E[prod_j phi(alpha_j, h_j)] under d mu_l."""
    if not 1 <= len(points) <= MAX_NPOINT:
        raise ValueError(f"n-point functions need 1 <= n <= {MAX_NPOINT}, got {len(points)}")
    lat = spec.lattice
    indices = [slice_index(lat, point.alpha) for point in points]

    def observable(configs: np.ndarray) -> np.ndarray:
        product = np.ones(configs.shape[0])
        for index, point in zip(indices, points):
            product *= lat.a_x * (configs[:, index, :] @ point.profile)
        return product

    return _ensemble(spec, run, seed, stream, ensemble).estimate(observable)


def free_npoint_oracle(points: Sequence[SmearedPoint], cov: SpectralCovariance) -> float:
    """Isserlis sum over exact lattice covariances of the smeared points."""
    lat = cov.lattice
    tests = [point_test_function(lat, point) for point in points]
    matrix = np.array([[covariance_pairing(cov, f, g) for g in tests] for f in tests])
    return isserlis(matrix)


@dataclass(frozen=True)
class ProfileRow:
    d_alpha: float
    estimate: Estimate
    lattice_exact: float
    continuum: float


def sharp_time_profile_oracle(lat: CylinderLattice, profile: np.ndarray, d_alpha: float) -> float:
    """(1/2L) sum_k |h^(k)|^2 cov_mixed_sharp_time(d, k) over the spatial circle modes of the lattice."""
    params = DispersionParams(beta=lat.beta, mass=lat.mass)
    k = 2.0 * np.pi * np.fft.fftfreq(lat.n_x, d=lat.a_x)
    transform = lat.a_x * np.exp(1j * np.outer(k, lat.x_coords)) @ profile
    return float(np.sum(np.abs(transform) ** 2 * cov_mixed_sharp_time(d_alpha, k, params)) / (2.0 * lat.L))


def sharp_time_lattice_exact(cov: SpectralCovariance, profile: np.ndarray, d_index: int) -> float:
    lat = cov.lattice
    f0 = np.zeros(lat.shape)
    fd = np.zeros(lat.shape)
    f0[0] = profile / lat.a_alpha
    fd[d_index % lat.n_alpha] = profile / lat.a_alpha
    return covariance_pairing(cov, f0, fd)


def sharp_time_two_point_profile(
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    profile: Optional[np.ndarray] = None,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
    average_base: bool = True,
) -> List[ProfileRow]:
    """E[phi(alpha, h) phi(alpha + d, h)] for every slice separation d.

    With ``average_base`` the product is averaged over the base slice alpha;
    otherwise alpha = 0.
    """
    lat = spec.lattice
    h = gaussian_profile(lat) if profile is None else np.asarray(profile, dtype=float)
    ensemble = _ensemble(spec, run, seed, stream, ensemble)
    fields = sharp_time_fields(ensemble.configs, lat, h)
    cov = spectral_multipliers(lat)
    rows = []
    for d in range(lat.n_alpha):
        shifted = np.roll(fields, -d, axis=1)
        values = np.mean(fields * shifted, axis=1) if average_base else fields[:, 0] * shifted[:, 0]
        d_alpha = d * lat.a_alpha
        rows.append(
            ProfileRow(
                d_alpha=d_alpha,
                estimate=ensemble.estimate_values(values),
                lattice_exact=sharp_time_lattice_exact(cov, h, d),
                continuum=sharp_time_profile_oracle(lat, h, d_alpha),
            )
        )
    return rows


@dataclass(frozen=True)
class PeriodicityReport:
    differences: Tuple[Tuple[float, Estimate], ...]
    passed: bool


def kms_periodicity_check(
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    profile: Optional[np.ndarray] = None,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
    n_sigma: float = 3.0,
) -> PeriodicityReport:
    """S(d) - S(beta - d) at a fixed base slice, jackknifed as a difference."""
    lat = spec.lattice
    h = gaussian_profile(lat) if profile is None else np.asarray(profile, dtype=float)
    ensemble = _ensemble(spec, run, seed, stream, ensemble)
    fields = sharp_time_fields(ensemble.configs, lat, h)
    differences = []
    for d in range(1, lat.n_alpha // 2):
        values = fields[:, 0] * fields[:, d] - fields[:, 0] * fields[:, lat.n_alpha - d]
        differences.append((d * lat.a_alpha, ensemble.estimate_values(values)))
    passed = all(diff.agrees_with(0.0, n_sigma, EXACT_TOLERANCE) for _, diff in differences)
    return PeriodicityReport(differences=tuple(differences), passed=passed)


@dataclass(frozen=True)
class LatticeFunctional:
    """A real function of the configuration with the set of sites it reads."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    support: np.ndarray
    name: str = ""


def field_functional(lat: CylinderLattice, point: SmearedPoint) -> LatticeFunctional:
    index = slice_index(lat, point.alpha)
    support = np.zeros(lat.shape, dtype=bool)
    support[index] = point.profile != 0
    return LatticeFunctional(
        evaluate=lambda configs: lat.a_x * (configs[:, index, :] @ point.profile),
        support=support,
        name=f"phi({point.alpha:g}, h)",
    )


def positive_half(lat: CylinderLattice, reflection: ReflectionSpec) -> np.ndarray:
    """Sites with alpha in [0, beta/2] or with x >= 0."""
    half = np.zeros(lat.shape, dtype=bool)
    if reflection.axis is ReflectionAxis.ALPHA:
        half[: lat.n_alpha // 2 + 1] = True
    else:
        half[:, lat.n_x // 2 :] = True
    return half


def reflect(configs: np.ndarray, reflection: ReflectionSpec) -> np.ndarray:
    """alpha -> -alpha (mod beta) maps slice i to -i; x -> -x maps column j to n_x - 1 - j."""
    if reflection.axis is ReflectionAxis.ALPHA:
        n_alpha = configs.shape[-2]
        return configs[..., (-np.arange(n_alpha)) % n_alpha, :]
    return configs[..., ::-1]


@dataclass(frozen=True)
class GramReport:
    reflection: ReflectionAxis
    matrix: np.ndarray
    errors: np.ndarray
    min_eigenvalue: Estimate
    max_asymmetry: float
    passed: bool


def os_positivity_gram(
    functionals: Sequence[LatticeFunctional],
    reflection: ReflectionSpec,
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
    n_sigma: float = 3.0,
) -> GramReport:
    """Gram matrix M_ij = E[R(F_i) F_j] and its jackknifed minimum eigenvalue.

    Raises:
        SupportViolation: a functional reads sites outside the positive half.
    """
    lat = spec.lattice
    half = positive_half(lat, reflection)
    for functional in functionals:
        if np.any(functional.support & ~half):
            raise SupportViolation(f"{functional.name or 'functional'} reads sites outside the {reflection.axis.value} half")
    ensemble = _ensemble(spec, run, seed, stream, ensemble)
    k = len(functionals)
    direct = np.stack([functional.evaluate(ensemble.configs) for functional in functionals])
    mirrored = np.stack([functional.evaluate(reflect(ensemble.configs, reflection)) for functional in functionals])
    products = (mirrored[:, None, :] * direct[None, :, :]).reshape(k * k, -1).T

    entries = [ensemble.estimate_values(products[:, c]) for c in range(k * k)]
    matrix = np.array([e.value for e in entries]).reshape(k, k)
    errors = np.array([e.std_error for e in entries]).reshape(k, k)

    def smallest_eigenvalue(means: np.ndarray) -> float:
        gram = means.reshape(k, k)
        return float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[0])

    min_eigenvalue = ensemble.estimate_values(products, smallest_eigenvalue)
    passed = min_eigenvalue.value >= -n_sigma * min_eigenvalue.std_error - EXACT_TOLERANCE
    LOGGER.info("OS Gram (%s): min eigenvalue %.4g +- %.2g", reflection.axis.value, min_eigenvalue.value, min_eigenvalue.std_error)
    return GramReport(
        reflection=reflection.axis,
        matrix=matrix,
        errors=errors,
        min_eigenvalue=min_eigenvalue,
        max_asymmetry=float(np.max(np.abs(matrix - matrix.T))),
        passed=bool(passed),
    )


def free_gram_oracle(cov: SpectralCovariance, points: Sequence[SmearedPoint], reflection: ReflectionSpec) -> np.ndarray:
    """Exact (R f_i, C f_j) for field functionals."""
    lat = cov.lattice
    tests = [point_test_function(lat, point) for point in points]
    return np.array([[covariance_pairing(cov, reflect(f, reflection), g) for g in tests] for f in tests])


class NelsonVariant(str, Enum):
    EXACT = "exact"
    ORDERING = "ordering"
    PAIRED = "paired"


@dataclass(frozen=True)
class NelsonReport:
    variant: NelsonVariant
    first: Estimate
    second: Estimate
    deviation: float
    passed: bool


def _two_point(ensemble: Ensemble, f: np.ndarray, g: np.ndarray) -> Estimate:
    area = ensemble.lattice.cell_area

    def observable(configs: np.ndarray) -> np.ndarray:
        return area**2 * np.tensordot(configs, f, axes=2) * np.tensordot(configs, g, axes=2)

    return ensemble.estimate(observable)


def _swapped_ensemble(ensemble: Ensemble, swapped_spec: MeasureSpec) -> Ensemble:
    configs = np.swapaxes(ensemble.configs, -1, -2)
    log_weights = None
    if ensemble.log_weights is not None:
        log_weights = -interaction_action_batch(configs, swapped_spec)
    return Ensemble(
        lattice=swapped_spec.lattice,
        configs=configs,
        method=ensemble.method,
        log_weights=log_weights,
        n_chains=ensemble.n_chains,
    )


def _full_window(spec: MeasureSpec, lat: CylinderLattice) -> MeasureSpec:
    return MeasureSpec(
        lattice=lat,
        interaction=spec.interaction,
        spatial_cutoff_l=lat.L,
        estimator=spec.estimator,
        wick_override=spec.wick_override,
    )


def nelson_symmetry_check(
    f: np.ndarray,
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    variant: NelsonVariant | str = NelsonVariant.EXACT,
    g: Optional[np.ndarray] = None,
    stream: Sequence[int] = (0,),
    n_sigma: float = 3.0,
) -> NelsonReport:
    """Compare <phi(f) phi(g)> computed in the two axis orders.

    * exact: symmetric torus; every sample is read once as is and once with
      the axes exchanged (weights recomputed on the swapped lattice). The two
      estimates agree to 1e-12.
    * ordering: the interaction re-expressed against the sharp-time constants
      c_0 (x-first) and c_beta (alpha-first) via ``rewick``; two independent runs.
      ``rewick`` is an exact identity, so both runs sample the same measure: this
      variant checks the re-ordering and the sampler under independent streams,
      not the axis swap.
    * paired: independent runs on (beta, 2L) and on the swapped torus (2L, beta)
      with f and g transposed.

    The exact and paired variants integrate the interaction over the whole torus.

    Raises:
        AsymmetricLatticeForExactVariant: exact variant on a torus with beta != 2L or n_alpha != n_x.
    """
    variant = NelsonVariant(variant)
    g = f if g is None else g
    lat = spec.lattice

    if variant is NelsonVariant.EXACT:
        if not lat.is_symmetric():
            raise AsymmetricLatticeForExactVariant(
                f"exact variant needs beta = 2L and n_alpha = n_x, got beta={lat.beta}, L={lat.L}, "
                f"{lat.n_alpha}x{lat.n_x}"
            )
        full = _full_window(spec, lat)
        swapped_spec = _full_window(spec, lat.swapped())
        ensemble = sample_measure(full, seed, run, stream)
        first = _two_point(ensemble, f, g)
        second = _two_point(_swapped_ensemble(ensemble, swapped_spec), f.T, g.T)
        deviation = abs(first.value - second.value)
        passed = deviation <= EXACT_TOLERANCE * max(1.0, abs(first.value))
    else:
        if variant is NelsonVariant.ORDERING:
            c_zero, c_beta = sharp_time_constants(lat)
            x_first = spec.model_copy(
                update={"interaction": rewick(spec.interaction, c_zero, OrderingLabel.C_ZERO), "wick_override": True}
            )
            alpha_first = spec.model_copy(
                update={"interaction": rewick(spec.interaction, c_beta, OrderingLabel.C_BETA), "wick_override": True}
            )
            first = _two_point(sample_measure(x_first, seed, run, (*stream, 0)), f, g)
            second = _two_point(sample_measure(alpha_first, seed, run, (*stream, 1)), f, g)
        else:
            original = _full_window(spec, lat)
            swapped_spec = _full_window(spec, lat.swapped())
            first = _two_point(sample_measure(original, seed, run, (*stream, 0)), f, g)
            second = _two_point(sample_measure(swapped_spec, seed, run, (*stream, 1)), f.T, g.T)
        deviation = abs(first.value - second.value)
        passed = deviation <= n_sigma * first.combined_error(second) + EXACT_TOLERANCE
    LOGGER.info("Nelson %s: %.5g vs %.5g", variant.value, first.value, second.value)
    return NelsonReport(variant=variant, first=first, second=second, deviation=float(deviation), passed=bool(passed))


@dataclass(frozen=True)
class MomentGrowthRow:
    p: int
    estimate: Estimate
    bound: float
    margin: Estimate
    free_exact: Optional[float]
    passed: bool


def moment_growth_check(
    profile: np.ndarray,
    p_list: Sequence[int],
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
    n_sigma: float = 3.0,
) -> List[MomentGrowthRow]:
    """Check E[phi(0,h)^p] <= p! K^p with K^2 = E[phi(0,h)^2] / 2 fitted at p = 2.

    Moments are averaged over slices (the measure is alpha-translation invariant).
    For the free measure the exact Gaussian moment is reported alongside.
    """
    for p in p_list:
        if p % 2 or not 2 <= p <= MAX_MOMENT_ORDER:
            raise ValueError(f"moment orders must be even and at most {MAX_MOMENT_ORDER}, got {p}")
    lat = spec.lattice
    ensemble = _ensemble(spec, run, seed, stream, ensemble)
    fields = sharp_time_fields(ensemble.configs, lat, np.asarray(profile, dtype=float))
    free_variance = None
    if spec.interaction.degree == 0:
        free_variance = sharp_time_lattice_exact(spectral_multipliers(lat), np.asarray(profile, dtype=float), 0)

    rows = []
    second = np.mean(fields**2, axis=1)
    k_squared = float(np.average(second, weights=ensemble.weights) / 2.0)
    for p in p_list:
        columns = np.column_stack([second, np.mean(fields**p, axis=1)])
        moment = ensemble.estimate_values(columns, lambda means: float(means[1]))
        margin = ensemble.estimate_values(
            columns, lambda means, p=p: float(factorial(p) * (means[0] / 2.0) ** (p // 2) - means[1])
        )
        bound = factorial(p) * k_squared ** (p // 2)
        free_exact = gaussian_moment(p, free_variance) if free_variance is not None else None
        passed = margin.value >= -n_sigma * margin.std_error
        if free_exact is not None:
            passed = passed and free_exact <= factorial(p) * (free_variance / 2.0) ** (p // 2)
        LOGGER.debug("Moment p=%d: %.5g, bound %.5g (K^2=%.4g)", p, moment.value, bound, k_squared)
        rows.append(
            MomentGrowthRow(p=p, estimate=moment, bound=bound, margin=margin, free_exact=free_exact, passed=bool(passed))
        )
    return rows


def holder_exponent(gap: float, beta: float) -> int:
    """Smallest positive even integer p with 1/p <= gap/beta."""
    if gap <= 0:
        raise GapTooSmall(f"gap {gap} must be positive")
    p = 2
    while 1.0 / p > gap / beta * (1 + 1e-12):
        p += 2
        if p > MAX_HOLDER_EXPONENT:
            raise GapTooSmall(f"gap {gap} needs an exponent above {MAX_HOLDER_EXPONENT}")
    return p


def cyclic_gaps(alphas: Sequence[float], beta: float) -> List[float]:
    """Gap after each point on the circle of circumference beta, wrap-around included."""
    alphas = list(alphas)
    return [b - a for a, b in zip(alphas, alphas[1:])] + [beta - alphas[-1] + alphas[0]]


def holder_exponents(alphas: Sequence[float], beta: float) -> List[int]:
    """p_i from the smaller of the two gaps adjacent to alpha_i."""
    gaps = cyclic_gaps(alphas, beta)
    return [holder_exponent(min(gaps[i - 1], gaps[i]), beta) for i in range(len(alphas))]


@dataclass(frozen=True)
class HolderReport:
    sign: int
    exponents: Tuple[int, ...]
    lhs: Estimate
    norms: Tuple[float, ...]
    rhs: float
    margin: Estimate
    passed: bool


def _signed_part(values: np.ndarray, sign: int) -> np.ndarray:
    return np.maximum(sign * values, 0.0)


def holder_chain_check(
    profiles: Sequence[np.ndarray],
    alphas: Sequence[float],
    spec: MeasureSpec,
    run: SamplingParams,
    seed: int,
    sign: int = 1,
    stream: Sequence[int] = (0,),
    ensemble: Optional[Ensemble] = None,
    n_sigma: float = 3.0,
) -> HolderReport:
    """|E[prod_i phi_s(alpha_i, h_i)]| <= prod_i ||phi_s(h_i)||_{p_i}, s = sign.

    ||phi_s(h)||_p = E[prod_{k<p} phi_s(k beta/p, h)]^{1/p}. Both sides are
    averaged over a common translation of all slices.

    Raises:
        GapTooSmall: an exponent above 12 would be needed.
        OffLatticeTime: an alpha or a staggered point k beta/p is not a slice.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if len(profiles) != len(alphas) or not alphas:
        raise ValueError("one profile per alpha is required")
    if any(b <= a for a, b in zip(alphas, alphas[1:])) or not 0 <= alphas[0] or alphas[-1] >= spec.lattice.beta:
        raise ValueError("alphas must increase strictly inside [0, beta)")
    lat = spec.lattice
    indices = [slice_index(lat, alpha) for alpha in alphas]
    exponents = holder_exponents(alphas, lat.beta)
    for p in exponents:
        if lat.n_alpha % p:
            raise OffLatticeTime(f"staggered points k*beta/{p} need n_alpha divisible by {p}, got {lat.n_alpha}")

    ensemble = _ensemble(spec, run, seed, stream, ensemble)
    parts = [_signed_part(sharp_time_fields(ensemble.configs, lat, np.asarray(h, dtype=float)), sign) for h in profiles]

    lhs_values = np.ones((ensemble.size, lat.n_alpha))
    for index, part in zip(indices, parts):
        lhs_values *= np.roll(part, -index, axis=1)
    columns = [lhs_values.mean(axis=1)]
    for part, p in zip(parts, exponents):
        stride = lat.n_alpha // p
        staggered = np.ones_like(part)
        for k in range(p):
            staggered *= np.roll(part, -k * stride, axis=1)
        columns.append(staggered.mean(axis=1))
    columns = np.column_stack(columns)

    def norm_product(means: np.ndarray) -> float:
        return float(prod(max(m, 0.0) ** (1.0 / p) for m, p in zip(means[1:], exponents)))

    lhs = ensemble.estimate_values(columns, lambda means: float(abs(means[0])))
    margin = ensemble.estimate_values(columns, lambda means: norm_product(means) - abs(means[0]))
    means = np.average(columns, axis=0, weights=ensemble.weights)
    norms = tuple(float(max(m, 0.0) ** (1.0 / p)) for m, p in zip(means[1:], exponents))
    passed = margin.value >= -n_sigma * margin.std_error - EXACT_TOLERANCE
    return HolderReport(
        sign=sign,
        exponents=tuple(exponents),
        lhs=lhs,
        norms=norms,
        rhs=norm_product(means),
        margin=margin,
        passed=bool(passed),
    )
