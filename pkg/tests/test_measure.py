import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import CutoffOutOfRange, LatticeMismatch, UnsupportedDispersion, WickConstantMismatch
from src.lattice import CylinderLattice, DispersionMode, FieldConfiguration, build_lattice, spectral_multipliers
from src.measure import (
    EstimatorKind,
    MeasureSpec,
    SamplingParams,
    build_measure_spec,
    detailed_balance_distance,
    free_action_batch,
    gaussian_ensemble,
    interaction_action,
    interaction_action_batch,
    metropolis_ensemble,
    metropolis_expectation,
    metropolis_transition_matrix,
    partition_extensivity,
    partition_ratio,
    reweighted_expectation,
    reweighting_ensemble,
    sample_measure,
    window_mask,
)
from src.wick import WickPolynomial, wick_power

QUARTIC = [0.0, 0.0, 0.0, 0.0, 0.05]


@pytest.fixture
def lattice():
    return build_lattice(1.0, 1.0, 8, 8, 1.0)


def test_spec_orders_against_the_site_variance(lattice):
    spec = build_measure_spec(lattice, QUARTIC)
    assert spec.spatial_cutoff_l == lattice.L
    assert spec.interaction.wick_constant == pytest.approx(spectral_multipliers(lattice).site_variance)


def test_spec_rejects_bad_cutoffs_and_constants(lattice):
    with pytest.raises(CutoffOutOfRange):
        build_measure_spec(lattice, QUARTIC, spatial_cutoff_l=2.0)
    with pytest.raises(CutoffOutOfRange):
        build_measure_spec(lattice, QUARTIC, spatial_cutoff_l=0.0)
    wrong = WickPolynomial(coefficients=tuple(QUARTIC), wick_constant=0.01)
    with pytest.raises(WickConstantMismatch):
        MeasureSpec(lattice=lattice, interaction=wrong, spatial_cutoff_l=1.0)
    assert MeasureSpec(lattice=lattice, interaction=wrong, spatial_cutoff_l=1.0, wick_override=True).wick_override


def test_window_holds_the_columns_with_small_x(lattice):
    mask = window_mask(lattice, 0.5)
    assert mask.sum() == 4
    np.testing.assert_array_equal(np.abs(lattice.x_coords[mask]) <= 0.5, True)


def test_interaction_action_of_a_constant_field(lattice):
    spec = build_measure_spec(lattice, QUARTIC, spatial_cutoff_l=0.5)
    config = FieldConfiguration(lattice, np.ones(lattice.shape))
    c = spec.interaction.wick_constant
    expected = lattice.cell_area * lattice.n_alpha * 4 * 0.05 * wick_power(1.0, c, 4)
    assert interaction_action(config, spec) == pytest.approx(expected)


def test_interaction_action_rejects_foreign_configurations(lattice):
    spec = build_measure_spec(lattice, QUARTIC)
    with pytest.raises(LatticeMismatch):
        interaction_action_batch(np.zeros((2, 4, 4)), spec)
    other = build_lattice(1.0, 1.0, 4, 4, 1.0)
    with pytest.raises(LatticeMismatch):
        interaction_action(FieldConfiguration(other, np.zeros(other.shape)), spec)


def test_free_action_equipartition(lattice):
    """E[S_free] = n_sites / 2 under the free measure."""
    ensemble = gaussian_ensemble(spectral_multipliers(lattice), seed=5, n_samples=8000)
    action = free_action_batch(ensemble.configs, lattice)
    assert action.mean() == pytest.approx(lattice.n_sites / 2.0, rel=0.02)


def test_free_reweighting_has_unit_weights(lattice):
    spec = build_measure_spec(lattice, [0.0])
    ensemble = reweighting_ensemble(spec, seed=1, n_samples=500)
    np.testing.assert_array_equal(ensemble.weights, 1.0)
    assert ensemble.ess == pytest.approx(500.0)
    assert partition_ratio(spec, seed=1, n_samples=500).value == 1.0


def test_reweighting_is_reproducible(lattice):
    spec = build_measure_spec(lattice, QUARTIC)
    first = reweighting_ensemble(spec, seed=9, n_samples=200, stream=(3,))
    second = reweighting_ensemble(spec, seed=9, n_samples=200, stream=(3,))
    np.testing.assert_array_equal(first.configs, second.configs)
    np.testing.assert_array_equal(first.log_weights, second.log_weights)


def test_partition_ratio_exceeds_one(lattice):
    """Jensen: E[e^{-S_int}] >= e^{-E[S_int]} = 1 for centred Wick powers."""
    spec = build_measure_spec(lattice, QUARTIC)
    ratio = partition_ratio(spec, seed=2, n_samples=4000)
    assert ratio.value >= 1.0 - 3.0 * ratio.std_error


def test_reweighting_and_metropolis_agree(lattice):
    spec = build_measure_spec(lattice, QUARTIC)

    def phi_squared(configs):
        return np.mean(configs**2, axis=(1, 2))

    first = reweighted_expectation(phi_squared, spec, seed=11, n_samples=20000)
    second = metropolis_expectation(phi_squared, spec, seed=11, n_sweeps=4000, burn_in=1000, thin=2, n_chains=4, stream=(1,))
    assert abs(first.value - second.value) <= 4.0 * first.combined_error(second)


def test_metropolis_requires_the_local_action():
    lat = build_lattice(1.0, 1.0, 8, 8, 1.0, DispersionMode.CONTINUUM_MODES)
    spec = build_measure_spec(lat, QUARTIC)
    with pytest.raises(UnsupportedDispersion):
        metropolis_ensemble(spec, seed=0, n_sweeps=10, burn_in=5)


def test_sample_measure_dispatches_on_the_estimator(lattice):
    run = SamplingParams(n_samples=200, n_sweeps=300, burn_in=200, thin=1, n_chains=2)
    reweighted = sample_measure(build_measure_spec(lattice, QUARTIC), seed=0, run=run)
    chains = sample_measure(build_measure_spec(lattice, QUARTIC, estimator=EstimatorKind.METROPOLIS), seed=0, run=run)
    assert reweighted.size == 200
    assert chains.size == 2 * 100
    assert chains.n_chains == 2


def test_sampling_params_validation():
    with pytest.raises(ValidationError):
        SamplingParams(n_samples=10)
    with pytest.raises(ValidationError):
        SamplingParams(n_sweeps=100, burn_in=100)


def test_transition_matrix_is_stochastic_and_balanced():
    lat = CylinderLattice(beta=1.0, L=1.0, n_alpha=2, n_x=2, mass=1.0)
    spec = build_measure_spec(lat, QUARTIC)
    grid = np.array([-1.0, 0.0, 1.0])
    transition, states = metropolis_transition_matrix(spec, grid)
    assert transition.shape == (81, 81)
    assert states.shape == (81, 2, 2)
    np.testing.assert_allclose(transition.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(transition >= -1e-15)
    assert detailed_balance_distance(spec, grid) < 1e-10


def test_partition_extensivity_fit(lattice):
    spec = build_measure_spec(lattice, QUARTIC)
    report = partition_extensivity(spec, [0.25, 0.5, 0.75, 1.0], seed=4, n_samples=2000)
    assert len(report.log_partition) == 4
    assert np.isfinite(report.slope)
    assert report.slope_error >= 0.0
