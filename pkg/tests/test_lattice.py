import numpy as np
import pytest

from src.errors import LatticeTooLargeForDenseOracle, NonPositiveParameter, OddLatticeSize
from src.lattice import (
    DispersionMode,
    build_lattice,
    colour_noise,
    covariance_pairing,
    dense_green_oracle,
    green_matrix,
    sample_gaussian,
    smear,
    spectral_multipliers,
    volume_convergence,
)
from src.rng import make_rng


@pytest.fixture
def small_lattice():
    return build_lattice(1.0, 2.0, 8, 8, 1.0)


@pytest.mark.parametrize("dispersion", list(DispersionMode))
def test_spectral_green_matches_dense_inverse(dispersion):
    """The FFT Green's function equals the explicit inverse of -Delta + m^2."""
    lat = build_lattice(1.0, 4.0, 16, 16, 0.7, dispersion)
    spectral = green_matrix(spectral_multipliers(lat))
    dense = dense_green_oracle(lat)
    np.testing.assert_allclose(spectral, dense, rtol=1e-10, atol=1e-12)


def test_site_variance_is_the_green_diagonal(small_lattice):
    cov = spectral_multipliers(small_lattice)
    dense = dense_green_oracle(small_lattice)
    assert cov.site_variance == pytest.approx(dense[0, 0], rel=1e-12)
    np.testing.assert_allclose(np.diag(dense), cov.site_variance, rtol=1e-12)


@pytest.mark.parametrize(
    "args, error",
    [
        ((1.0, 2.0, 7, 8, 1.0), OddLatticeSize),
        ((1.0, 2.0, 8, 9, 1.0), OddLatticeSize),
        ((1.0, 2.0, 8, 8, -1.0), NonPositiveParameter),
        ((0.0, 2.0, 8, 8, 1.0), NonPositiveParameter),
        ((1.0, 2.0, 2, 8, 1.0), NonPositiveParameter),
    ],
)
def test_build_lattice_rejects_bad_parameters(args, error):
    with pytest.raises(error):
        build_lattice(*args)


def test_dense_oracle_refuses_large_lattices():
    lat = build_lattice(1.0, 4.0, 128, 64, 1.0)
    with pytest.raises(LatticeTooLargeForDenseOracle):
        dense_green_oracle(lat)


def test_site_coordinates_are_reflection_symmetric(small_lattice):
    x = small_lattice.x_coords
    np.testing.assert_allclose(x, -x[::-1])
    assert small_lattice.alpha_coords[0] == 0.0


def test_swapped_lattice_exchanges_axes():
    lat = build_lattice(1.0, 2.0, 8, 16, 1.0)
    swapped = lat.swapped()
    assert swapped.shape == (16, 8)
    assert swapped.beta == pytest.approx(4.0)
    assert swapped.L == pytest.approx(0.5)
    assert build_lattice(2.0, 1.0, 8, 8, 1.0).is_symmetric()
    assert not lat.is_symmetric()


def test_colour_noise_gives_real_fields(small_lattice):
    cov = spectral_multipliers(small_lattice)
    noise = make_rng(1, 0).standard_normal((10, *small_lattice.shape))
    fields, residue = colour_noise(cov, noise)
    assert fields.shape == (10, 8, 8)
    assert residue < 1e-12


def test_gaussian_samples_have_the_lattice_covariance(small_lattice):
    cov = spectral_multipliers(small_lattice)
    configs = sample_gaussian(cov, seed=7, count=40000)
    empirical = np.mean(configs[:, 0, 0] * configs[:, 0, 0])
    neighbour = np.mean(configs[:, 0, 0] * configs[:, 1, 0])
    green = dense_green_oracle(small_lattice)
    assert empirical == pytest.approx(green[0, 0], rel=0.05)
    assert neighbour == pytest.approx(green[0, small_lattice.n_x], rel=0.05)


def test_sampling_is_reproducible(small_lattice):
    cov = spectral_multipliers(small_lattice)
    first = sample_gaussian(cov, seed=3, count=5, stream=(2,))
    second = sample_gaussian(cov, seed=3, count=5, stream=(2,))
    other = sample_gaussian(cov, seed=3, count=5, stream=(4,))
    np.testing.assert_array_equal(first, second)
    assert not np.allclose(first, other)


def test_covariance_pairing_matches_dense_quadratic_form(small_lattice):
    cov = spectral_multipliers(small_lattice)
    rng = make_rng(11)
    f = rng.standard_normal(small_lattice.shape)
    g = rng.standard_normal(small_lattice.shape)
    dense = small_lattice.cell_area**2 * f.ravel() @ dense_green_oracle(small_lattice) @ g.ravel()
    assert covariance_pairing(cov, f, g) == pytest.approx(dense, rel=1e-10)


def test_smear_is_linear(small_lattice):
    rng = make_rng(5)
    configs = rng.standard_normal((3, *small_lattice.shape))
    f = rng.standard_normal(small_lattice.shape)
    g = rng.standard_normal(small_lattice.shape)
    np.testing.assert_allclose(
        smear(configs, 2.0 * f + g, small_lattice), 2.0 * smear(configs, f, small_lattice) + smear(configs, g, small_lattice)
    )


def test_site_variance_converges_with_volume():
    table = volume_convergence(1.0, [1.0, 2.0, 3.0, 4.0], 0.25, 1.0, 8)
    variances = np.array([variance for _, variance in table])
    steps = np.abs(np.diff(variances))
    assert np.all(np.diff(steps) < 0), "finite-volume corrections should shrink with L"
