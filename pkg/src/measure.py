"""The interacting measure d mu_l = e^{-S_int} d phi_C / Z_l at finite lattice cutoff.

Two estimators share one ensemble abstraction: reweighting of exact Gaussian
samples (the oracle path) and a checkerboard Metropolis chain against the
full local action (the scalable path).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import (
    AcceptanceOutOfRange,
    CutoffOutOfRange,
    DegenerateWeights,
    LatticeMismatch,
    UnsupportedDispersion,
    WickConstantMismatch,
)
from .lattice import (
    CylinderLattice,
    DispersionMode,
    FieldConfiguration,
    SpectralCovariance,
    colour_noise,
    iter_gaussian_batches,
    spectral_multipliers,
)
from .rng import make_rng
from .statistics import (
    Estimate,
    EstimateMethod,
    effective_sample_size,
    normalised_weights,
    sample_estimate,
)
from .wick import OrderingLabel, WickPolynomial, wick_polynomial_eval

LOGGER = logging.getLogger(__name__)

MIN_REWEIGHTING_SAMPLES = 100
MIN_ESS = 10.0
ACCEPTANCE_RANGE = (0.3, 0.6)
TARGET_ACCEPTANCE = 0.45
TUNING_INTERVAL = 25

Observable = Callable[[np.ndarray], np.ndarray]


class EstimatorKind(str, Enum):
    REWEIGHTING = "Reweighting"
    METROPOLIS = "Metropolis"


class SamplingParams(BaseModel):
    """Sample counts shared by both estimators."""

    model_config = ConfigDict(frozen=True)

    n_samples: int = 20000
    n_sweeps: int = 6000
    burn_in: int = 1000
    thin: int = 5
    n_chains: int = 4

    @model_validator(mode="after")
    def _check(self) -> "SamplingParams":
        if self.n_samples < MIN_REWEIGHTING_SAMPLES:
            raise ValueError(f"n_samples must be at least {MIN_REWEIGHTING_SAMPLES}")
        if self.n_sweeps <= self.burn_in:
            raise ValueError("n_sweeps must exceed burn_in")
        if self.thin < 1 or self.n_chains < 1:
            raise ValueError("thin and n_chains must be positive")
        return self


class MeasureSpec(BaseModel):
    """Lattice, interaction and spatial cutoff l of the measure d mu_l."""

    model_config = ConfigDict(frozen=True)

    lattice: CylinderLattice
    interaction: WickPolynomial
    spatial_cutoff_l: float
    estimator: EstimatorKind = EstimatorKind.REWEIGHTING
    wick_override: bool = False

    @model_validator(mode="after")
    def _check_invariants(self) -> "MeasureSpec":
        l, L = self.spatial_cutoff_l, self.lattice.L
        if not (0 < l <= L * (1 + 1e-12)):
            raise CutoffOutOfRange(f"spatial cutoff l={l} must satisfy 0 < l <= L={L}")
        if self.interaction.degree > 0 and not self.wick_override:
            expected = spectral_multipliers(self.lattice).site_variance
            if abs(self.interaction.wick_constant - expected) > 1e-12 * max(1.0, expected):
                raise WickConstantMismatch(
                    f"interaction ordered against {self.interaction.wick_constant}, "
                    f"lattice constant is {expected}; rewick it or set wick_override"
                )
        return self


def build_measure_spec(
    lat: CylinderLattice,
    coefficients: Sequence[float],
    spatial_cutoff_l: Optional[float] = None,
    estimator: EstimatorKind | str = EstimatorKind.REWEIGHTING,
) -> MeasureSpec:
    """Spec with P = sum c_j :lambda^j: ordered against the lattice site variance; l defaults to L."""
    interaction = WickPolynomial(
        coefficients=tuple(coefficients),
        wick_constant=spectral_multipliers(lat).site_variance,
        label=OrderingLabel.C_FULL,
    )
    return MeasureSpec(
        lattice=lat,
        interaction=interaction,
        spatial_cutoff_l=lat.L if spatial_cutoff_l is None else spatial_cutoff_l,
        estimator=EstimatorKind(estimator),
    )


def window_mask(lat: CylinderLattice, l: float) -> np.ndarray:
    """Boolean x-columns with |x_j| <= l."""
    return np.abs(lat.x_coords) <= l + 1e-12 * lat.L


def interaction_density(values: np.ndarray, spec: MeasureSpec) -> np.ndarray:
    """cell_area * :P(phi):, zero outside the cutoff window; broadcasts over leading axes."""
    lat = spec.lattice
    density = lat.cell_area * wick_polynomial_eval(spec.interaction, values)
    return density * window_mask(lat, spec.spatial_cutoff_l)


def interaction_action_batch(configs: np.ndarray, spec: MeasureSpec) -> np.ndarray:
    """S_int for every configuration in a (n, n_alpha, n_x) batch."""
    if configs.shape[-2:] != spec.lattice.shape:
        raise LatticeMismatch(f"configurations of shape {configs.shape[-2:]} on lattice {spec.lattice.shape}")
    if spec.interaction.is_zero():
        return np.zeros(configs.shape[:-2])
    return interaction_density(configs, spec).sum(axis=(-2, -1))


def interaction_action(config: FieldConfiguration, spec: MeasureSpec) -> float:
    """S_int = sum over sites with |x| <= l of a_alpha a_x :P(phi):."""
    if config.lattice != spec.lattice:
        raise LatticeMismatch("configuration lives on a different lattice than the measure")
    return float(interaction_action_batch(config.values[None], spec)[0])


def free_action_batch(configs: np.ndarray, lat: CylinderLattice) -> np.ndarray:
    """(1/2) (phi, (-Delta_lat + m^2) phi) with the cell-area pairing."""
    grad_alpha = (np.roll(configs, -1, axis=-2) - configs) / lat.a_alpha
    grad_x = (np.roll(configs, -1, axis=-1) - configs) / lat.a_x
    density = grad_alpha**2 + grad_x**2 + lat.mass**2 * configs**2
    return 0.5 * lat.cell_area * density.sum(axis=(-2, -1))


def full_action_batch(configs: np.ndarray, spec: MeasureSpec) -> np.ndarray:
    return free_action_batch(configs, spec.lattice) + interaction_action_batch(configs, spec)


@dataclass(frozen=True)
class Ensemble:
    """Configurations of shape (n, n_alpha, n_x) plus optional log-weights.

    Metropolis ensembles store ``n_chains`` equal-length chains one after another.
    """

    lattice: CylinderLattice
    configs: np.ndarray
    method: EstimateMethod
    log_weights: Optional[np.ndarray] = None
    n_chains: int = 1

    @property
    def size(self) -> int:
        return self.configs.shape[0]

    @property
    def weights(self) -> Optional[np.ndarray]:
        return None if self.log_weights is None else normalised_weights(self.log_weights)

    @property
    def ess(self) -> float:
        weights = self.weights
        return float(self.size) if weights is None else effective_sample_size(weights)

    def values(self, observable: Observable) -> np.ndarray:
        return np.asarray(observable(self.configs), dtype=float)

    def estimate(self, observable: Observable, statistic: Optional[Callable[[np.ndarray], float]] = None) -> Estimate:
        """Expectation of ``observable`` (per-sample values), or ``statistic`` of its column means."""
        return self.estimate_values(self.values(observable), statistic)

    def estimate_values(
        self, values: np.ndarray, statistic: Optional[Callable[[np.ndarray], float]] = None
    ) -> Estimate:
        return sample_estimate(values, self.method, self.weights, statistic, self.n_chains)


def gaussian_ensemble(cov: SpectralCovariance, seed: int, n_samples: int, stream: Sequence[int] = (0,)) -> Ensemble:
    rng = make_rng(seed, *stream)
    configs = np.concatenate(list(iter_gaussian_batches(cov, rng, n_samples)), axis=0)
    return Ensemble(lattice=cov.lattice, configs=configs, method=EstimateMethod.GAUSSIAN)


def reweighting_ensemble(spec: MeasureSpec, seed: int, n_samples: int, stream: Sequence[int] = (0,)) -> Ensemble:
    """Gaussian samples weighted by e^{-S_int}.

    Raises:
        DegenerateWeights: the effective sample size is below 10.
    """
    if n_samples < MIN_REWEIGHTING_SAMPLES:
        raise ValueError(f"reweighting needs at least {MIN_REWEIGHTING_SAMPLES} samples, got {n_samples}")
    base = gaussian_ensemble(spectral_multipliers(spec.lattice), seed, n_samples, stream)
    ensemble = Ensemble(
        lattice=spec.lattice,
        configs=base.configs,
        method=EstimateMethod.REWEIGHTING,
        log_weights=-interaction_action_batch(base.configs, spec),
    )
    ess = ensemble.ess
    LOGGER.info("Reweighting ensemble: %d samples, ESS %.1f", n_samples, ess)
    if ess < MIN_ESS:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < {MIN_ESS}; reduce the coupling or volume")
    return ensemble


def reweighted_expectation(
    observable: Observable, spec: MeasureSpec, seed: int, n_samples: int, stream: Sequence[int] = (0,)
) -> Estimate:
    """(sum O_i w_i) / (sum w_i) over Gaussian samples with w_i = e^{-S_int}."""
    return reweighting_ensemble(spec, seed, n_samples, stream).estimate(observable)


def local_action(values: np.ndarray, neighbour_alpha: np.ndarray, neighbour_x: np.ndarray, spec: MeasureSpec):
    """Terms of the full action that depend on one site's value.

    ``neighbour_alpha`` and ``neighbour_x`` are the sums of the two neighbours
    along each axis; ``values`` broadcasts against them.
    """
    lat = spec.lattice
    inv_a2, inv_x2 = 1.0 / lat.a_alpha**2, 1.0 / lat.a_x**2
    quadratic = (inv_a2 + inv_x2 + 0.5 * lat.mass**2) * values**2
    linear = values * (neighbour_alpha * inv_a2 + neighbour_x * inv_x2)
    return lat.cell_area * (quadratic - linear) + interaction_density(values, spec)


def neighbour_sums(configs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    alpha = np.roll(configs, 1, axis=-2) + np.roll(configs, -1, axis=-2)
    x = np.roll(configs, 1, axis=-1) + np.roll(configs, -1, axis=-1)
    return alpha, x


def metropolis_accept(delta_action: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Accept with probability min(1, e^{-delta S})."""
    return np.log(uniforms) < -delta_action


def checkerboard_masks(lat: CylinderLattice) -> Tuple[np.ndarray, np.ndarray]:
    parity = np.add.outer(np.arange(lat.n_alpha), np.arange(lat.n_x)) % 2
    return parity == 0, parity == 1


def initial_proposal_width(lat: CylinderLattice) -> float:
    """2.4 conditional standard deviations of the free local action."""
    curvature = lat.cell_area * (1.0 / lat.a_alpha**2 + 1.0 / lat.a_x**2 + 0.5 * lat.mass**2)
    return 2.4 / np.sqrt(2.0 * curvature)


def _half_sweep(configs: np.ndarray, mask: np.ndarray, width: float, spec: MeasureSpec, rng) -> float:
    neighbour_alpha, neighbour_x = neighbour_sums(configs)
    proposal = configs + width * rng.standard_normal(configs.shape)
    delta = local_action(proposal, neighbour_alpha, neighbour_x, spec) - local_action(
        configs, neighbour_alpha, neighbour_x, spec
    )
    accepted = metropolis_accept(delta, rng.random(configs.shape)) & mask
    configs[accepted] = proposal[accepted]
    return float(accepted.sum()) / (mask.sum() * configs.shape[0])


def metropolis_ensemble(
    spec: MeasureSpec,
    seed: int,
    n_sweeps: int,
    burn_in: int,
    thin: int = 1,
    n_chains: int = 4,
    stream: Sequence[int] = (0,),
) -> Ensemble:
    """Run ``n_chains`` checkerboard Metropolis chains side by side.

    The proposal width is tuned towards 45% acceptance during burn-in and then frozen;
    configurations are recorded every ``thin`` sweeps after burn-in.

    Raises:
        UnsupportedDispersion: the action is only local for the lattice Laplacian.
        AcceptanceOutOfRange: production acceptance outside [0.3, 0.6].
    """
    lat = spec.lattice
    if lat.dispersion_mode is not DispersionMode.LATTICE_LAPLACIAN:
        raise UnsupportedDispersion("Metropolis needs the local LatticeLaplacian action")
    if n_sweeps <= burn_in:
        raise ValueError(f"n_sweeps={n_sweeps} must exceed burn_in={burn_in}")
    if thin < 1 or n_chains < 1:
        raise ValueError("thin and n_chains must be positive")

    rng = make_rng(seed, *stream)
    cov = spectral_multipliers(lat)
    configs, _ = colour_noise(cov, rng.standard_normal((n_chains, *lat.shape)))
    configs = np.ascontiguousarray(configs)
    masks = checkerboard_masks(lat)
    width = initial_proposal_width(lat)

    recorded: List[np.ndarray] = []
    window_acceptance: List[float] = []
    production_acceptance: List[float] = []
    for sweep in range(n_sweeps):
        rate = np.mean([_half_sweep(configs, mask, width, spec, rng) for mask in masks])
        if sweep < burn_in:
            window_acceptance.append(rate)
            if len(window_acceptance) == TUNING_INTERVAL:
                mean_rate = float(np.mean(window_acceptance))
                width *= float(np.exp(mean_rate - TARGET_ACCEPTANCE))
                LOGGER.debug("Sweep %d: acceptance %.3f, proposal width %.4f", sweep, mean_rate, width)
                window_acceptance.clear()
            continue
        production_acceptance.append(rate)
        if (sweep - burn_in) % thin == thin - 1:
            recorded.append(configs.copy())

    acceptance = float(np.mean(production_acceptance))
    low, high = ACCEPTANCE_RANGE
    if not low <= acceptance <= high:
        raise AcceptanceOutOfRange(f"acceptance {acceptance:.3f} outside [{low}, {high}] after tuning")
    if not recorded:
        raise ValueError("no configurations recorded; lower thin or raise n_sweeps")
    chains = np.stack(recorded, axis=1).reshape(-1, *lat.shape)
    LOGGER.info("Metropolis: %d chains x %d records, acceptance %.3f", n_chains, len(recorded), acceptance)
    return Ensemble(lattice=lat, configs=chains, method=EstimateMethod.METROPOLIS, n_chains=n_chains)


def metropolis_expectation(
    observable: Observable,
    spec: MeasureSpec,
    seed: int,
    n_sweeps: int,
    burn_in: int,
    thin: int = 1,
    n_chains: int = 4,
    stream: Sequence[int] = (0,),
) -> Estimate:
    """Metropolis estimate with error bars inflated by sqrt(2 tau_int)."""
    return metropolis_ensemble(spec, seed, n_sweeps, burn_in, thin, n_chains, stream).estimate(observable)


def sample_measure(spec: MeasureSpec, seed: int, run: SamplingParams, stream: Sequence[int] = (0,)) -> Ensemble:
    """Draw the ensemble selected by ``spec.estimator`` with the sample counts in ``run``."""
    if spec.estimator is EstimatorKind.METROPOLIS:
        return metropolis_ensemble(spec, seed, run.n_sweeps, run.burn_in, run.thin, run.n_chains, stream)
    return reweighting_ensemble(spec, seed, run.n_samples, stream)


def partition_ratio(spec: MeasureSpec, seed: int, n_samples: int, stream: Sequence[int] = (0,)) -> Estimate:
    """Z_l = E_gauss[e^{-S_int}] with a jackknife error."""
    if spec.interaction.is_zero():
        return Estimate(value=1.0, std_error=0.0, n_eff=float(n_samples), method=EstimateMethod.GAUSSIAN)
    ensemble = reweighting_ensemble(spec, seed, n_samples, stream)
    relative = sample_estimate(ensemble.weights, EstimateMethod.GAUSSIAN)
    scale = float(np.exp(np.max(ensemble.log_weights)))
    return Estimate(
        value=relative.value * scale,
        std_error=relative.std_error * scale,
        n_eff=ensemble.ess,
        method=EstimateMethod.REWEIGHTING,
    )


@dataclass(frozen=True)
class ExtensivityReport:
    cutoffs: Tuple[float, ...]
    log_partition: Tuple[Estimate, ...]
    slope: float
    slope_error: float
    max_residual_sigma: float


def partition_extensivity(
    spec: MeasureSpec, cutoffs: Sequence[float], seed: int, n_samples: int
) -> ExtensivityReport:
    """ln Z_l for several cutoffs and the weighted linear fit ln Z_l ~ slope * l + intercept."""
    log_z: List[Estimate] = []
    for index, l in enumerate(cutoffs):
        ratio = partition_ratio(spec.model_copy(update={"spatial_cutoff_l": l}), seed, n_samples, stream=(index,))
        log_z.append(
            Estimate(
                value=float(np.log(ratio.value)),
                std_error=ratio.std_error / ratio.value,
                n_eff=ratio.n_eff,
                method=ratio.method,
            )
        )
    l_values = np.asarray(cutoffs, dtype=float)
    y = np.array([e.value for e in log_z])
    sigma = np.array([max(e.std_error, 1e-300) for e in log_z])
    design = np.vstack([l_values, np.ones_like(l_values)]).T / sigma[:, None]
    solution, *_ = np.linalg.lstsq(design, y / sigma, rcond=None)
    covariance = np.linalg.pinv(design.T @ design)
    residuals = (y - (solution[0] * l_values + solution[1])) / sigma
    return ExtensivityReport(
        cutoffs=tuple(float(l) for l in cutoffs),
        log_partition=tuple(log_z),
        slope=float(solution[0]),
        slope_error=float(np.sqrt(covariance[0, 0])),
        max_residual_sigma=float(np.max(np.abs(residuals))),
    )


def metropolis_transition_matrix(spec: MeasureSpec, grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Single-site Metropolis kernel on a discretised field range.

    Every state assigns each site a value from ``grid``. A step picks a site
    uniformly, proposes one of the other grid values uniformly and accepts
    with ``metropolis_accept``'s rule on the ``local_action`` difference,
    the same two functions the checkerboard sampler uses.

    Returns:
        (transition matrix, the states as an array of shape (n_states, n_alpha, n_x))
    """
    lat = spec.lattice
    grid = np.asarray(grid, dtype=float)
    g = grid.size
    n_sites = lat.n_sites
    indices = np.array(np.unravel_index(np.arange(g**n_sites), (g,) * n_sites)).T
    states = grid[indices].reshape(-1, *lat.shape)
    strides = g ** np.arange(n_sites - 1, -1, -1)
    neighbour_alpha, neighbour_x = neighbour_sums(states)
    current_action = local_action(states, neighbour_alpha, neighbour_x, spec)
    proposal_probability = 1.0 / (n_sites * (g - 1))

    transition = np.zeros((len(states), len(states)))
    for site in range(n_sites):
        i, j = divmod(site, lat.n_x)
        for value_index, value in enumerate(grid):
            rows = np.nonzero(indices[:, site] != value_index)[0]
            proposed = states[rows].copy()
            proposed[:, i, j] = value
            delta = (
                local_action(proposed, neighbour_alpha[rows], neighbour_x[rows], spec)[:, i, j]
                - current_action[rows, i, j]
            )
            columns = rows + (value_index - indices[rows, site]) * strides[site]
            transition[rows, columns] += proposal_probability * np.minimum(1.0, np.exp(-delta))
    transition[np.diag_indices_from(transition)] = 1.0 - transition.sum(axis=1)
    return transition, states


def detailed_balance_distance(spec: MeasureSpec, grid: np.ndarray) -> float:
    """Total-variation distance between the kernel's stationary law and e^{-S}/Z on the grid states."""
    transition, states = metropolis_transition_matrix(spec, grid)
    eigenvalues, eigenvectors = np.linalg.eig(transition.T)
    stationary = np.real(eigenvectors[:, np.argmin(np.abs(eigenvalues - 1.0))])
    stationary = stationary / stationary.sum()
    action = full_action_batch(states, spec)
    target = np.exp(-(action - action.min()))
    target /= target.sum()
    return float(0.5 * np.abs(stationary - target).sum())
