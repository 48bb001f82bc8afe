"""The acceptance battery: one experiment per check group, scheduled independently.

Each group draws from its own random stream, fixed by its position in
``BatterySection`` so that enabling or disabling other groups never changes
its numbers.
"""

import logging
from math import factorial
from typing import Callable, Dict, List

import numpy as np

from ..config import BatterySection, RunConfig
from ..estimate import (
    NelsonVariant,
    ReflectionAxis,
    ReflectionSpec,
    field_functional,
    free_generating_functional,
    free_npoint_oracle,
    gaussian_moment,
    gaussian_profile,
    generating_functional,
    holder_chain_check,
    kms_periodicity_check,
    moment_growth_check,
    os_positivity_gram,
    point_test_function,
    schwinger_npoint,
    sharp_time_fields,
    sharp_time_lattice_exact,
    sharp_time_profile_oracle,
    smeared_point,
    wick_pair_oracle,
)
from ..lattice import (
    DENSE_ORACLE_MAX_SITES,
    CylinderLattice,
    DispersionMode,
    build_lattice,
    covariance_pairing,
    dense_green_oracle,
    green_matrix,
    sample_gaussian,
    smear,
    spectral_multipliers,
)
from ..measure import (
    build_measure_spec,
    detailed_balance_distance,
    gaussian_ensemble,
    metropolis_ensemble,
    partition_ratio,
    reweighting_ensemble,
    sample_measure,
)
from ..oracles import (
    DispersionParams,
    cov_circle_cbeta,
    cov_mixed_sharp_time,
    cov_spatial_circle,
    cov_thermal_c0,
    cov_thermal_c0_coth,
)
from ..rng import make_rng
from ..statistics import EstimateMethod, sample_estimate
from ..summarizer import CheckResult, ExperimentResult
from ..wick import (
    WickPolynomial,
    lattice_wick_constant,
    rewick,
    wick_coefficients,
    wick_power,
    wick_power_hermite,
    wick_power_recursive,
)
from .base_experiment import BaseExperiment
from .fock_checks import fock_models, gibbs_holder_checks, phi_bound_checks, spectrum_checks
from .nelson import nelson_checks
from .tube_scan import kms_boundary_checks, quasi_free_checks, tube_checks

LOGGER = logging.getLogger(__name__)

COVARIANCE_DRAWS = 100
MOMENT_ORDERS = (1, 2, 3, 4, 5, 6)
GROWTH_ORDERS = (2, 4, 6, 8)
MIN_BATTERY_ESS = 100.0
DETAILED_BALANCE_GRID = (-1.5, -0.5, 0.5, 1.5)
STANDARD_SEPARATIONS = 5
WICK_MAX_ORDER = 10
WICK_FIELD_RANGE = 10.0
WICK_CONSTANTS = tuple(float(c) for c in range(11))

CheckFunction = Callable[[RunConfig, int], List[CheckResult]]


def _n_sigma(config: RunConfig) -> float:
    return config.tolerances.scaled("n_sigma")


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))


def check_free_exactness(config: RunConfig, stream: int) -> List[CheckResult]:
    """Spectral Green's function against the dense inverse of -Delta + m^2."""
    section = config.lattice
    lattices = [build_lattice(section.beta, section.L, 16, 16, section.mass, section.dispersion)]
    configured = section.build()
    if configured.n_sites <= DENSE_ORACLE_MAX_SITES and configured.shape != (16, 16):
        lattices.append(configured)
    checks = []
    for lat in lattices:
        spectral = green_matrix(spectral_multipliers(lat))
        dense = dense_green_oracle(lat)
        checks.append(
            CheckResult.at_most(
                f"free_exactness.green_{lat.n_alpha}x{lat.n_x}",
                _relative(dense, spectral),
                config.tolerances.scaled("dense_oracle"),
            )
        )
    return checks


def check_covariance_identities(config: RunConfig, stream: int) -> List[CheckResult]:
    """coth form, coinciding-point reduction, beta-reflection and the circle reduction over random parameters."""
    rng = make_rng(config.seed, stream)
    worst = {"coth": 0.0, "reduction": 0.0, "reflection": 0.0, "circle": 0.0}
    for _ in range(COVARIANCE_DRAWS):
        p = DispersionParams(beta=float(rng.uniform(0.2, 5.0)), mass=float(rng.uniform(0.1, 3.0)))
        k = rng.uniform(-20.0, 20.0, 16)
        n = rng.integers(-20, 21, 16)
        d = rng.uniform(0.0, p.beta, 16)
        c0 = cov_thermal_c0(k, p)
        worst["coth"] = max(worst["coth"], _relative(c0, cov_thermal_c0_coth(k, p)))
        worst["reduction"] = max(worst["reduction"], _relative(c0, cov_mixed_sharp_time(0.0, k, p)))
        worst["reflection"] = max(
            worst["reflection"], _relative(cov_mixed_sharp_time(d, k, p), cov_mixed_sharp_time(p.beta - d, k, p))
        )
        worst["circle"] = max(worst["circle"], _relative(cov_circle_cbeta(n, p), cov_spatial_circle(0.0, n, p)))
    tolerance = config.tolerances.scaled("exact")
    return [CheckResult.at_most(f"covariance.{name}", value, tolerance) for name, value in worst.items()]


def check_gaussian_moments(config: RunConfig, stream: int) -> List[CheckResult]:
    """Moments, the generating functional and an Isserlis four-point function of the free field."""
    lat = config.lattice.build()
    cov = spectral_multipliers(lat)
    ensemble = gaussian_ensemble(cov, config.seed, config.run.n_samples, (stream,))
    h = gaussian_profile(lat)
    f = point_test_function(lat, smeared_point(lat, 0.0, h))
    variance = covariance_pairing(cov, f, f)
    fields = smear(ensemble.configs, f, lat)
    n_sigma = _n_sigma(config)

    checks = [
        CheckResult.agreement(f"gaussian_moments.p{p}", ensemble.estimate_values(fields**p), gaussian_moment(p, variance), n_sigma)
        for p in MOMENT_ORDERS
    ]
    checks.append(
        CheckResult.agreement(
            "gaussian_moments.generating_functional",
            generating_functional(ensemble, f),
            free_generating_functional(cov, f),
            n_sigma,
        )
    )
    quarter = lat.n_alpha // 4
    points = [smeared_point(lat, i * lat.a_alpha, h) for i in (0, 1, quarter, 2 * quarter)]
    free_spec = build_measure_spec(lat, [0.0])
    checks.append(
        CheckResult.agreement(
            "gaussian_moments.isserlis_4pt",
            schwinger_npoint(points, free_spec, config.run.sampling(), config.seed, ensemble=ensemble),
            free_npoint_oracle(points, cov),
            n_sigma,
        )
    )
    return checks


def _oracle_lattice(config: RunConfig) -> CylinderLattice:
    section = config.lattice
    lat = section.build()
    if lat.n_sites > DENSE_ORACLE_MAX_SITES:
        return build_lattice(section.beta, section.L, 16, 16, section.mass, section.dispersion)
    return lat


def check_wick(config: RunConfig, stream: int) -> List[CheckResult]:
    """Implementation agreement over the full range, re-ordering, and the moments of lattice Wick powers."""
    exact = config.tolerances.scaled("exact")
    phi = np.linspace(-WICK_FIELD_RANGE, WICK_FIELD_RANGE, 201)
    worst = 0.0
    for n in range(WICK_MAX_ORDER + 1):
        for c in WICK_CONSTANTS:
            reference = wick_power(phi, c, n)
            # sum of the term magnitudes before cancellation
            scale = np.maximum(1.0, np.polynomial.polynomial.polyval(np.abs(phi), np.abs(wick_coefficients(n, c))))
            for other in (wick_power_hermite(phi, c, n), wick_power_recursive(phi, c, n)):
                worst = max(worst, float(np.max(np.abs(reference - other) / scale)))
    polynomial = WickPolynomial(coefficients=(0.3, 0.0, -0.2, 0.0, 0.05), wick_constant=0.4)
    round_trip = rewick(rewick(polynomial, 1.1), 0.4)
    drift = float(np.max(np.abs(np.subtract(round_trip.coefficients, polynomial.coefficients))))
    checks = [
        CheckResult.at_most("wick.implementations", worst, exact),
        CheckResult.at_most("wick.rewick_round_trip", drift, exact),
    ]

    lat = _oracle_lattice(config)
    cov = spectral_multipliers(lat)
    c = lattice_wick_constant(cov)
    green = dense_green_oracle(lat)
    a, b = 0, 1
    pair_covariance = green[np.ix_((a, b), (a, b))]
    samples = sample_gaussian(cov, config.seed, config.run.n_samples, (stream,)).reshape(-1, lat.n_sites)
    at_a, at_b = samples[:, a], samples[:, b]
    n_sigma = _n_sigma(config)
    for n in range(1, 7):
        estimate = sample_estimate(wick_power(at_a, c, n), EstimateMethod.GAUSSIAN)
        checks.append(CheckResult.agreement(f"wick.centred_p{n}", estimate, 0.0, n_sigma))
    oracle_gap = 0.0
    for n in range(1, 5):
        for m in range(1, 5):
            target = factorial(n) * green[a, b] ** n if n == m else 0.0
            oracle_gap = max(oracle_gap, abs(wick_pair_oracle(pair_covariance, c, n, m) - target))
            estimate = sample_estimate(wick_power(at_a, c, n) * wick_power(at_b, c, m), EstimateMethod.GAUSSIAN)
            checks.append(CheckResult.agreement(f"wick.orthogonality_{n}{m}", estimate, target, n_sigma))
    checks.append(CheckResult.at_most("wick.isserlis_oracle", oracle_gap, config.tolerances.scaled("dense_oracle")))
    return checks


def _laplacian_lattice(config: RunConfig) -> CylinderLattice:
    lat = config.lattice.build()
    if lat.dispersion_mode is not DispersionMode.LATTICE_LAPLACIAN:
        LOGGER.warning("Metropolis needs the lattice Laplacian; comparing estimators on that dispersion")
        lat = lat.model_copy(update={"dispersion_mode": DispersionMode.LATTICE_LAPLACIAN})
    return lat


def _standard_observables(lat: CylinderLattice) -> Dict[str, Callable[[np.ndarray], np.ndarray]]:
    """Sharp-time moments of degree 1 to 4 and the two-point function at up to five time separations."""
    h = gaussian_profile(lat)

    def fields(configs: np.ndarray) -> np.ndarray:
        return sharp_time_fields(configs, lat, h)

    def moment(p: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda configs: np.mean(fields(configs) ** p, axis=1)

    def two_point(d: int) -> Callable[[np.ndarray], np.ndarray]:
        def observable(configs: np.ndarray) -> np.ndarray:
            values = fields(configs)
            return np.mean(values * np.roll(values, -d, axis=1), axis=1)

        return observable

    observables = {f"phi{p}": moment(p) for p in range(1, 5)}
    for d in range(1, min(STANDARD_SEPARATIONS, lat.n_alpha - 1) + 1):
        observables[f"phi_phi_d{d}"] = two_point(d)
    return observables


def check_interacting_measure(config: RunConfig, stream: int) -> List[CheckResult]:
    """Reweighting against Metropolis on the standard observables, plus ESS and Z_l >= 1."""
    lat = _laplacian_lattice(config)
    spec = build_measure_spec(lat, config.interacting_coefficients(), config.measure.l)
    run = config.run.sampling()
    reweighted = reweighting_ensemble(spec, config.seed, run.n_samples, (stream, 0))
    chains = metropolis_ensemble(spec, config.seed, run.n_sweeps, run.burn_in, run.thin, run.n_chains, (stream, 1))
    n_sigma = _n_sigma(config)

    checks = [CheckResult.at_least("interacting_measure.ess", reweighted.ess, MIN_BATTERY_ESS)]
    for name, observable in _standard_observables(lat).items():
        checks.append(
            CheckResult.comparison(
                f"interacting_measure.{name}", reweighted.estimate(observable), chains.estimate(observable), n_sigma
            )
        )
    # Jensen: E[e^{-V}] >= e^{-E[V]} = 1 since Wick powers are centred
    ratio = partition_ratio(spec, config.seed, run.n_samples, (stream, 2))
    checks.append(
        CheckResult.at_least("interacting_measure.partition_ratio", ratio.value, 1.0 - n_sigma * ratio.std_error, ratio.std_error)
    )
    return checks


def check_detailed_balance(config: RunConfig, stream: int) -> List[CheckResult]:
    """Stationary law of the single-site kernel on a 2x2 torus against e^{-S}."""
    section = config.lattice
    lat = CylinderLattice(beta=section.beta, L=section.L, n_alpha=2, n_x=2, mass=section.mass)
    spec = build_measure_spec(lat, config.interacting_coefficients())
    distance = detailed_balance_distance(spec, np.array(DETAILED_BALANCE_GRID))
    return [CheckResult.at_most("detailed_balance.total_variation", distance, config.tolerances.scaled("detailed_balance"))]


def check_os_positivity(config: RunConfig, stream: int) -> List[CheckResult]:
    lat = config.lattice.build()
    spec = config.interacting_spec()
    run = config.run.sampling()
    ensemble = sample_measure(spec, config.seed, run, (stream,))
    h = gaussian_profile(lat)
    quarter = lat.n_alpha // 4
    alpha_functionals = [field_functional(lat, smeared_point(lat, i * lat.a_alpha, h)) for i in (0, 1, 2, quarter)]
    positive = (lat.x_coords > 0).astype(float)
    x_functionals = [
        field_functional(lat, smeared_point(lat, i * lat.a_alpha, gaussian_profile(lat, 0.5, centre) * positive))
        for i in (0, quarter)
        for centre in (0.5, 1.5)
    ]
    checks = []
    for axis, functionals in ((ReflectionAxis.ALPHA, alpha_functionals), (ReflectionAxis.X, x_functionals)):
        report = os_positivity_gram(
            functionals, ReflectionSpec(axis), spec, run, config.seed, ensemble=ensemble, n_sigma=_n_sigma(config)
        )
        bound = -_n_sigma(config) * report.min_eigenvalue.std_error - config.tolerances.scaled("exact")
        checks.append(
            CheckResult.at_least(
                f"os_positivity.{axis.value}", report.min_eigenvalue.value, bound, report.min_eigenvalue.std_error
            )
        )
    return checks


def check_kms_periodicity(config: RunConfig, stream: int) -> List[CheckResult]:
    """S(d) = S(beta - d): exact for the free mode sums, statistical for the interacting measure."""
    lat = config.lattice.build()
    cov = spectral_multipliers(lat)
    h = gaussian_profile(lat)
    worst_lattice, worst_continuum = 0.0, 0.0
    for d in range(1, lat.n_alpha // 2):
        mirror = lat.n_alpha - d
        worst_lattice = max(
            worst_lattice, abs(sharp_time_lattice_exact(cov, h, d) - sharp_time_lattice_exact(cov, h, mirror))
        )
        worst_continuum = max(
            worst_continuum,
            abs(sharp_time_profile_oracle(lat, h, d * lat.a_alpha) - sharp_time_profile_oracle(lat, h, mirror * lat.a_alpha)),
        )
    exact = config.tolerances.scaled("exact")
    checks = [
        CheckResult.at_most("kms_periodicity.free_lattice", worst_lattice, exact),
        CheckResult.at_most("kms_periodicity.free_continuum", worst_continuum, exact),
    ]
    report = kms_periodicity_check(
        config.interacting_spec(), config.run.sampling(), config.seed, stream=(stream,), n_sigma=_n_sigma(config)
    )
    for d_alpha, difference in report.differences:
        checks.append(
            CheckResult.agreement(f"kms_periodicity.interacting_d{d_alpha:.4g}", difference, 0.0, _n_sigma(config), exact)
        )
    return checks


def check_holder_chain(config: RunConfig, stream: int) -> List[CheckResult]:
    """Sharp-time Hoelder chains at two and three slices, for the positive and negative parts."""
    lat = config.lattice.build()
    spec = config.interacting_spec()
    run = config.run.sampling()
    ensemble = sample_measure(spec, config.seed, run, (stream,))
    h = gaussian_profile(lat)
    chains = {"two": (0.0, lat.beta / 2.0), "three": (0.0, lat.beta / 4.0, lat.beta / 2.0)}
    if lat.n_alpha % 4:
        LOGGER.warning("n_alpha=%d is not divisible by 4; skipping the three-slice chain", lat.n_alpha)
        del chains["three"]
    checks = []
    for label, alphas in chains.items():
        for sign in (1, -1):
            report = holder_chain_check(
                [h] * len(alphas), alphas, spec, run, config.seed, sign, ensemble=ensemble, n_sigma=_n_sigma(config)
            )
            bound = -_n_sigma(config) * report.margin.std_error - config.tolerances.scaled("exact")
            name = f"holder_chain.{label}_{'plus' if sign > 0 else 'minus'}"
            checks.append(CheckResult.at_least(name, report.margin.value, bound, report.margin.std_error))
    return checks


def check_moment_growth(config: RunConfig, stream: int) -> List[CheckResult]:
    lat = config.lattice.build()
    run = config.run.sampling()
    h = gaussian_profile(lat)
    free_spec = build_measure_spec(lat, [0.0])
    cov = spectral_multipliers(lat)
    variance = sharp_time_lattice_exact(cov, h, 0)
    free = gaussian_ensemble(cov, config.seed, run.n_samples, (stream, 0))
    checks = []
    for label, spec, ensemble in (
        ("free", free_spec, free),
        ("interacting", config.interacting_spec(), None),
    ):
        rows = moment_growth_check(
            h, GROWTH_ORDERS, spec, run, config.seed, stream=(stream, 1), ensemble=ensemble, n_sigma=_n_sigma(config)
        )
        for row in rows:
            bound = -_n_sigma(config) * row.margin.std_error
            checks.append(
                CheckResult.at_least(f"moment_growth.{label}_p{row.p}", row.margin.value, bound, row.margin.std_error)
            )
            if row.free_exact is not None:
                exact_bound = factorial(row.p) * (variance / 2.0) ** (row.p // 2)
                checks.append(CheckResult.at_most(f"moment_growth.free_exact_p{row.p}", row.free_exact, exact_bound))
    return checks


def check_nelson(config: RunConfig, stream: int) -> List[CheckResult]:
    checks = []
    for index, variant in enumerate(NelsonVariant):
        variant_checks, _ = nelson_checks(config, variant, (stream, index))
        checks.extend(variant_checks)
    return checks


def check_kms_boundary(config: RunConfig, stream: int) -> List[CheckResult]:
    return kms_boundary_checks(config)


def check_relativistic_tube(config: RunConfig, stream: int) -> List[CheckResult]:
    checks, _ = tube_checks(config, stream)
    return checks + quasi_free_checks(config, stream)


def check_spectrum(config: RunConfig, stream: int) -> List[CheckResult]:
    free, interacting = fock_models(config)
    return spectrum_checks(config, free, interacting)


def check_phi_bounds(config: RunConfig, stream: int) -> List[CheckResult]:
    free, interacting = fock_models(config)
    checks, _ = phi_bound_checks(config, free, interacting, stream)
    return checks


def check_gibbs_holder(config: RunConfig, stream: int) -> List[CheckResult]:
    checks, _ = gibbs_holder_checks(config, stream)
    return checks


CHECKS: Dict[str, CheckFunction] = {
    "free_exactness": check_free_exactness,
    "covariance_identities": check_covariance_identities,
    "gaussian_moments": check_gaussian_moments,
    "wick": check_wick,
    "interacting_measure": check_interacting_measure,
    "detailed_balance": check_detailed_balance,
    "os_positivity": check_os_positivity,
    "kms_periodicity": check_kms_periodicity,
    "holder_chain": check_holder_chain,
    "nelson": check_nelson,
    "kms_boundary": check_kms_boundary,
    "relativistic_tube": check_relativistic_tube,
    "spectrum": check_spectrum,
    "phi_bounds": check_phi_bounds,
    "gibbs_holder": check_gibbs_holder,
    "moment_growth": check_moment_growth,
}


class CheckExperiment(BaseExperiment):
    """One battery group."""

    def __init__(self, config: RunConfig, name: str, check: CheckFunction, stream: int):
        super().__init__(config, stream)
        self.name = name
        self.check = check

    def run(self) -> ExperimentResult:
        return ExperimentResult(self.name, self.check(self.config, self.stream))


def battery_experiments(config: RunConfig) -> List[BaseExperiment]:
    """The enabled groups in declaration order, each with its fixed stream."""
    experiments = []
    for stream, name in enumerate(BatterySection.model_fields):
        if getattr(config.battery, name):
            experiments.append(CheckExperiment(config, name, CHECKS[name], stream))
    return experiments
