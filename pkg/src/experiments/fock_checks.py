import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from ..config import RunConfig
from ..continuation import spectral_support_check, spectral_support_check_fock
from ..errors import NoConstantsFound
from ..fock import (
    FockModel,
    GibbsSpec,
    build_fock,
    build_interaction,
    circle_wick_constant,
    commutator_defect,
    euclidean_two_point,
    free_euclidean_two_point,
    gibbs_holder_check,
    momentum_commutator,
    phi_bound_check,
    random_holder_trial,
    vacuum_overlap,
)
from ..oracles import DispersionParams
from ..rng import make_rng
from ..summarizer import CheckResult, ExperimentResult
from ..wick import OrderingLabel, WickPolynomial
from .base_experiment import BaseExperiment

LOGGER = logging.getLogger(__name__)

# mode cutoff of the free dispersion check
FREE_SPECTRUM_MODES = 50


def fock_models(config: RunConfig) -> Tuple[FockModel, FockModel]:
    """The truncated free model and the same model with the quartic interaction built in."""
    section = config.fock
    free = build_fock(config.lattice.beta, config.lattice.mass, section.mode_cut, section.occ_cut)
    quartic = WickPolynomial(
        coefficients=(0.0, 0.0, 0.0, 0.0, section.coupling),
        wick_constant=circle_wick_constant(free),
        label=OrderingLabel.C_BETA,
    )
    return free, build_interaction(free, quartic)


def spectrum_checks(config: RunConfig, free: FockModel, interacting: FockModel) -> List[CheckResult]:
    params = DispersionParams(beta=config.lattice.beta, mass=config.lattice.mass)
    checks = [CheckResult.at_most("spectrum.dispersion", spectral_support_check(params, FREE_SPECTRUM_MODES).violations, 0)]
    for label, model in (("free", free), ("interacting", interacting)):
        report = spectral_support_check_fock(model, strict=config.fock.strict_truncation)
        checks.append(CheckResult.at_most(f"spectrum.fock_{label}.violations", report.violations, 0))
        if report.truncation_violations:
            LOGGER.warning("%d spectrum violations confined to the top decile (%s)", report.truncation_violations, label)
    return checks


def phi_bound_checks(
    config: RunConfig, free: FockModel, interacting: FockModel, stream: int
) -> Tuple[List[CheckResult], List[Dict[str, Any]]]:
    """Search grid constants for every epsilon, random g and both Hamiltonians."""
    rng = make_rng(config.seed, stream, 0)
    vectors = rng.standard_normal((config.fock.n_random_g, free.modes.size))
    tolerance = config.tolerances.scaled("phi_bound")
    checks, records = [], []
    for epsilon in config.fock.epsilons:
        for label, model, use_interaction in (("free", free, False), ("interacting", interacting, True)):
            worst, found = np.inf, 0
            for g in vectors:
                try:
                    report = phi_bound_check(model, g, epsilon, interacting=use_interaction)
                except NoConstantsFound:
                    records.append({"epsilon": epsilon, "hamiltonian": label, "c1": None, "c2": None})
                    continue
                found += 1
                worst = min(worst, report.min_eigenvalue_plus, report.min_eigenvalue_minus)
                records.append(
                    {
                        "epsilon": epsilon,
                        "hamiltonian": label,
                        "c1": report.c1,
                        "c2": report.c2,
                        "min_eigenvalue_plus": report.min_eigenvalue_plus,
                        "min_eigenvalue_minus": report.min_eigenvalue_minus,
                    }
                )
            name = f"phi_bounds.eps{epsilon:g}.{label}"
            checks.append(CheckResult.at_least(f"{name}.found", found, len(vectors)))
            checks.append(CheckResult.at_least(f"{name}.min_eigenvalue", worst, -tolerance))
    return checks, records


def gibbs_holder_checks(config: RunConfig, stream: int) -> Tuple[List[CheckResult], Dict[str, Any]]:
    rng = make_rng(config.seed, stream, 1)
    violations, worst_ratio = 0, 0.0
    for _ in range(config.fock.holder_trials):
        spec, operators, steps = random_holder_trial(rng)
        report = gibbs_holder_check(spec, operators, steps)
        violations += not report.passed
        if report.rhs > 0:
            worst_ratio = max(worst_ratio, report.lhs / report.rhs)
    identity_spec = GibbsSpec(hamiltonian=np.diag(np.linspace(0.0, 2.0, 6)), beta=1.0)
    identity = gibbs_holder_check(identity_spec, [np.eye(6)] * 3, [0.25, 0.25])
    checks = [
        CheckResult.at_most("gibbs_holder.violations", violations, 0),
        CheckResult.at_most(
            "gibbs_holder.identity_equality",
            abs(identity.lhs - 1.0) + abs(identity.rhs - 1.0),
            config.tolerances.scaled("dense_oracle"),
        ),
    ]
    return checks, {"trials": config.fock.holder_trials, "violations": violations, "worst_ratio": worst_ratio}


def bridge_checks(config: RunConfig, free: FockModel, interacting: FockModel) -> Tuple[List[CheckResult], Dict[str, Any]]:
    """Truncation sanity and the coupling-0 Euclidean two-point function against its mode sum."""
    exact = config.tolerances.scaled("exact")
    g = np.exp(-free.momenta**2)
    worst = max(
        abs(euclidean_two_point(free, g, s, interacting=False) - free_euclidean_two_point(free, g, s))
        for s in np.linspace(0.0, free.beta, 5)
    )
    hamiltonian = interacting.hamiltonian().toarray()
    scale = max(1.0, abs(interacting.interaction).max() * abs(interacting.momentum).max())
    checks = [
        CheckResult.at_most("fock.commutator_defect", commutator_defect(free), exact),
        CheckResult.at_most("fock.momentum_conservation", momentum_commutator(interacting) / scale, exact),
        CheckResult.at_most("fock.hamiltonian_symmetry", float(np.max(np.abs(hamiltonian - hamiltonian.T))), exact),
        CheckResult.at_most("fock.euclidean_two_point", worst, exact),
    ]
    document = {
        "dimension": free.dim,
        "ground_energy": interacting.ground_energy,
        "vacuum_overlap": vacuum_overlap(interacting),
    }
    return checks, document


class FockExperiment(BaseExperiment):
    """Spectrum condition, phi-bounds and the Gibbs Hoelder inequality on the truncated circle theory."""

    name = "fock"

    def run(self) -> ExperimentResult:
        free, interacting = fock_models(self.config)
        checks, document = bridge_checks(self.config, free, interacting)
        checks.extend(spectrum_checks(self.config, free, interacting))
        phi_checks, constants = phi_bound_checks(self.config, free, interacting, self.stream)
        checks.extend(phi_checks)
        holder_checks, holder = gibbs_holder_checks(self.config, self.stream)
        checks.extend(holder_checks)
        document.update({"phi_bounds": constants, "gibbs_holder": holder})
        document["violations"] = {check.name: check.value for check in checks if check.name.endswith("violations")}
        return ExperimentResult(self.name, checks, documents={"fock.json": document})
