import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from ..config import RunConfig
from ..continuation import kms_boundary_check, kms_grid, quasi_free_npoint, tube_scan
from ..estimate import pairings
from ..oracles import DispersionParams, RegionSpec, TubePoint, free_thermal_wightman
from ..rng import make_rng
from ..summarizer import CheckResult, ExperimentResult
from .base_experiment import BaseExperiment

LOGGER = logging.getLogger(__name__)

# imaginary times of the quasi-free check, as fractions of beta, decreasing
QUASI_FREE_TIMES = (0.8, 0.55, 0.3, 0.05)


def dispersion_params(config: RunConfig) -> DispersionParams:
    return DispersionParams(beta=config.lattice.beta, mass=config.lattice.mass)


def kms_boundary_checks(config: RunConfig) -> List[CheckResult]:
    s_grid, y_grid = kms_grid(config.tube.kms_extent, config.tube.kms_points)
    report = kms_boundary_check(dispersion_params(config), s_grid, y_grid)
    LOGGER.info("KMS boundary Richardson ratio %.3g (diagnostic)", report.richardson_ratio)
    return [CheckResult.at_most("kms_boundary.deviation", report.deviation, config.tolerances.scaled("kms_boundary"))]


def tube_checks(config: RunConfig, stream: int) -> Tuple[List[CheckResult], List[Dict[str, Any]]]:
    section = config.tube
    region = RegionSpec(beta=config.lattice.beta, lambdas=section.lambdas)
    report = tube_scan(
        dispersion_params(config),
        region,
        section.n_inside,
        section.n_outside,
        seed=config.seed,
        step=section.step,
        margin=section.margin,
        stream=(stream,),
    )
    inside = [row for row in report.rows if row.expected_inside]
    worst_cr = max((row.cr_residual for row in inside), default=0.0)
    worst_contour = max((row.contour_residual for row in inside), default=0.0)
    tolerance = config.tolerances.scaled("holomorphy")
    checks = [
        CheckResult.at_least("relativistic_tube.classified", report.n_correct, len(report.rows)),
        CheckResult.at_most("relativistic_tube.cr_residual", worst_cr, tolerance),
        CheckResult.at_most("relativistic_tube.contour_residual", worst_contour, tolerance),
    ]
    rows = [
        {
            "point": row.index,
            "classification": "inside" if row.classified_inside else "outside",
            "cr_residual": row.cr_residual,
            "contour_residual": row.contour_residual,
            "tail_bound": row.tail_bound,
        }
        for row in report.rows
    ]
    return checks, rows


def quasi_free_checks(config: RunConfig, stream: int) -> List[CheckResult]:
    """The four-point quasi-free evaluation against the pairing sum of separately evaluated factors."""
    p = dispersion_params(config)
    rng = make_rng(config.seed, stream, 1)
    points = [
        TubePoint(s=complex(t, -fraction * p.beta), y=complex(x, 0.0))
        for fraction, t, x in zip(QUASI_FREE_TIMES, rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
    ]
    combined = quasi_free_npoint(points, p)
    separate = 0.0 + 0.0j
    for matching in pairings(range(len(points))):
        term = 1.0 + 0.0j
        for a, b in matching:
            term *= free_thermal_wightman(TubePoint(s=points[a].s - points[b].s, y=points[a].y - points[b].y), p).value
        separate += term
    deviation = abs(combined.value - separate)
    return [
        CheckResult.at_most(
            "relativistic_tube.quasi_free", deviation, config.tolerances.scaled("dense_oracle"), combined.error_bound
        )
    ]


class TubeScanExperiment(BaseExperiment):
    """Inside/outside classification of random complex points plus the quasi-free four-point consistency."""

    name = "tube-scan"

    def run(self) -> ExperimentResult:
        checks, rows = tube_checks(self.config, self.stream)
        checks.extend(quasi_free_checks(self.config, self.stream))
        return ExperimentResult(self.name, checks, tables={"tube_scan.csv": rows})
