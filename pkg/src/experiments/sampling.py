import logging

import numpy as np

from ..estimate import gaussian_profile, sharp_time_fields
from ..measure import MIN_ESS, EstimatorKind, interaction_action_batch, sample_measure
from ..summarizer import CheckResult, ExperimentResult
from .base_experiment import BaseExperiment

LOGGER = logging.getLogger(__name__)


class SamplingExperiment(BaseExperiment):
    """Draw the configured measure and dump per-sample observables."""

    name = "sample"

    def run(self) -> ExperimentResult:
        config = self.config
        spec = config.measure_spec()
        lat = spec.lattice
        ensemble = sample_measure(spec, config.seed, config.run.sampling(), self.streams())
        fields = sharp_time_fields(ensemble.configs, lat, gaussian_profile(lat))
        action = interaction_action_batch(ensemble.configs, spec)
        weights = ensemble.weights if ensemble.weights is not None else np.full(ensemble.size, 1.0 / ensemble.size)

        rows = [
            {"index": i, "weight": float(weights[i]), "phi_0": float(fields[i, 0]), "interaction_action": float(action[i])}
            for i in range(ensemble.size)
        ]
        phi2 = ensemble.estimate_values(np.mean(fields**2, axis=1))
        LOGGER.info("<phi(0,h)^2> = %.5g +- %.2g over %d samples", phi2.value, phi2.std_error, ensemble.size)

        checks = [CheckResult.flag("sample.phi2_finite", bool(np.isfinite(phi2.value)), phi2.value)]
        if spec.estimator is EstimatorKind.REWEIGHTING:
            checks.append(CheckResult.at_least("sample.ess", ensemble.ess, MIN_ESS))
        document = {
            "estimator": spec.estimator.value,
            "n_samples": ensemble.size,
            "ess": ensemble.ess,
            "phi2": phi2.model_dump(mode="json"),
        }
        return ExperimentResult(self.name, checks, tables={"samples.csv": rows}, documents={"sample.json": document})
