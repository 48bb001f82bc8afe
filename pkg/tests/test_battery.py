import numpy as np

from src.config import BatterySection, validate_config
from src.estimate import gaussian_profile, sharp_time_fields
from src.experiments.battery import _standard_observables, check_wick
from src.lattice import build_lattice
from src.rng import make_rng

SMALL = {"lattice": {"n_alpha": 8, "n_x": 8, "L": 1.0}, "run": {"n_samples": 4000, "seed": 3}}


def test_wick_group_covers_lattice_moments_and_pairs():
    config = validate_config(SMALL)
    checks = {check.name: check for check in check_wick(config, list(BatterySection.model_fields).index("wick"))}
    expected = {f"wick.centred_p{n}" for n in range(1, 7)}
    expected |= {f"wick.orthogonality_{n}{m}" for n in range(1, 5) for m in range(1, 5)}
    expected |= {"wick.implementations", "wick.rewick_round_trip", "wick.isserlis_oracle"}
    assert set(checks) == expected
    for name in ("wick.implementations", "wick.rewick_round_trip", "wick.isserlis_oracle"):
        assert checks[name].passed


def test_standard_observables_span_moments_and_separations():
    lat = build_lattice(1.0, 1.0, 16, 8, 1.0)
    observables = _standard_observables(lat)
    assert list(observables) == ["phi1", "phi2", "phi3", "phi4"] + [f"phi_phi_d{d}" for d in range(1, 6)]

    configs = make_rng(5).standard_normal((10, *lat.shape))
    fields = sharp_time_fields(configs, lat, gaussian_profile(lat))
    np.testing.assert_allclose(observables["phi3"](configs), np.mean(fields**3, axis=1))
    np.testing.assert_allclose(
        observables["phi_phi_d2"](configs), np.mean(fields * np.roll(fields, -2, axis=1), axis=1)
    )


def test_short_lattices_use_fewer_separations():
    observables = _standard_observables(build_lattice(1.0, 1.0, 4, 8, 1.0))
    assert [name for name in observables if name.startswith("phi_phi")] == ["phi_phi_d1", "phi_phi_d2", "phi_phi_d3"]
