from typing import Any, Dict, List, Tuple

import numpy as np

from ..config import RunConfig
from ..estimate import NelsonVariant, gaussian_profile, nelson_symmetry_check
from ..lattice import CylinderLattice, build_lattice
from ..summarizer import CheckResult, ExperimentResult
from .base_experiment import BaseExperiment


def nelson_test_function(lat: CylinderLattice) -> np.ndarray:
    """A bump centred at alpha = beta/2 times the Gaussian spatial profile."""
    alpha_profile = np.exp(-(((lat.alpha_coords - lat.beta / 2.0) / (lat.beta / 4.0)) ** 2))
    return np.outer(alpha_profile, gaussian_profile(lat))


def nelson_lattice(config: RunConfig, variant: NelsonVariant) -> CylinderLattice:
    """The exact variant runs on the symmetric torus beta = 2L with n_x = n_alpha."""
    section = config.lattice
    if variant is NelsonVariant.EXACT:
        return build_lattice(section.beta, section.beta / 2.0, section.n_alpha, section.n_alpha, section.mass, section.dispersion)
    return section.build()


def nelson_checks(
    config: RunConfig, variant: NelsonVariant, stream: Tuple[int, ...]
) -> Tuple[List[CheckResult], List[Dict[str, Any]]]:
    lat = nelson_lattice(config, variant)
    spec = config.interacting_spec(lat) if variant is NelsonVariant.EXACT else config.interacting_spec()
    report = nelson_symmetry_check(
        nelson_test_function(lat),
        spec,
        config.run.sampling(),
        config.seed,
        variant,
        stream=stream,
        n_sigma=config.tolerances.scaled("n_sigma"),
    )
    exact = config.tolerances.scaled("exact")
    if variant is NelsonVariant.EXACT:
        error = 0.0
        bound = exact * max(1.0, abs(report.first.value))
    else:
        error = report.first.combined_error(report.second)
        bound = config.tolerances.scaled("n_sigma") * error + exact
    check = CheckResult.at_most(f"nelson.{variant.value}", report.deviation, bound, error)
    row = {
        "variant": variant.value,
        "first": report.first.value,
        "first_error": report.first.std_error,
        "second": report.second.value,
        "second_error": report.second.std_error,
        "deviation": report.deviation,
    }
    return [check], [row]


class NelsonExperiment(BaseExperiment):
    """Axis-swap symmetry of the two-point function for one variant."""

    def __init__(self, config: RunConfig, variant: NelsonVariant | str, stream: int = 0):
        super().__init__(config, stream)
        self.variant = NelsonVariant(variant)
        self.name = f"nelson.{self.variant.value}"

    def run(self) -> ExperimentResult:
        checks, rows = nelson_checks(self.config, self.variant, self.streams())
        return ExperimentResult(self.name, checks, tables={"nelson.csv": rows})
