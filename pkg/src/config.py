import logging
import re
import tomllib
from pathlib import Path
from typing import List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import BoundedBelowViolation, ConfigValidationError, DegreeTooHigh, ParseError, ThermalPhiError
from .lattice import CylinderLattice, DispersionMode, build_lattice
from .measure import EstimatorKind, MeasureSpec, SamplingParams, build_measure_spec
from .wick import WickPolynomial

LOGGER = logging.getLogger(__name__)

load_dotenv()


class Settings(BaseSettings):
    """Process-wide defaults, overridable through THERMALPHI_* variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="THERMALPHI_", env_file=".env", extra="ignore")

    THREADS: int = 4
    OUTPUT_DIR: str = "results"
    TOLERANCE_SCALE: float = 1.0
    SEED: int = 20240917
    LOG_LEVEL: str = "INFO"


settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class LatticeSection(_Section):
    beta: float = 1.0
    L: float = 4.0
    n_alpha: int = 16
    n_x: int = 64
    mass: float = 1.0
    dispersion: DispersionMode = DispersionMode.LATTICE_LAPLACIAN

    @field_validator("beta", "L", "mass")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"must be positive, got {value}")
        return value

    @field_validator("n_alpha", "n_x")
    @classmethod
    def _even(cls, value: int) -> int:
        if value < 4 or value % 2:
            raise ValueError(f"must be even and at least 4, got {value}")
        return value

    def build(self) -> CylinderLattice:
        return build_lattice(self.beta, self.L, self.n_alpha, self.n_x, self.mass, self.dispersion)


class MeasureSection(_Section):
    P: List[float] = [0.0]
    l: Optional[float] = None
    estimator: EstimatorKind = EstimatorKind.REWEIGHTING
    coupling: float = 0.05

    @field_validator("P")
    @classmethod
    def _bounded_below(cls, value: List[float]) -> List[float]:
        try:
            WickPolynomial(coefficients=tuple(value))
        except (BoundedBelowViolation, DegreeTooHigh) as exc:
            raise ValueError(f"bounded-below: {exc}") from exc
        return value

    @field_validator("coupling")
    @classmethod
    def _non_negative_coupling(cls, value: float) -> float:
        if value < 0:
            raise ValueError(f"bounded-below: quartic coupling must be non-negative, got {value}")
        return value


class RunSection(_Section):
    n_samples: int = 20000
    n_sweeps: int = 6000
    burn_in: int = 1000
    thin: int = 5
    n_chains: int = 4
    seed: Optional[int] = None
    threads: Optional[int] = None

    def sampling(self) -> SamplingParams:
        return SamplingParams(
            n_samples=self.n_samples,
            n_sweeps=self.n_sweeps,
            burn_in=self.burn_in,
            thin=self.thin,
            n_chains=self.n_chains,
        )


class BatterySection(_Section):
    """Which acceptance checks the battery runs."""

    free_exactness: bool = True
    covariance_identities: bool = True
    gaussian_moments: bool = True
    wick: bool = True
    interacting_measure: bool = True
    detailed_balance: bool = True
    os_positivity: bool = True
    kms_periodicity: bool = True
    holder_chain: bool = True
    nelson: bool = True
    kms_boundary: bool = True
    relativistic_tube: bool = True
    spectrum: bool = True
    phi_bounds: bool = True
    gibbs_holder: bool = True
    moment_growth: bool = True


class FockSection(_Section):
    mode_cut: int = 2
    occ_cut: int = 4
    coupling: float = 0.05
    epsilons: List[float] = [0.0, 0.5, 1.0]
    n_random_g: int = 20
    holder_trials: int = 200
    strict_truncation: bool = False

    @field_validator("coupling")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError(f"bounded-below: quartic coupling must be non-negative, got {value}")
        return value


class TubeSection(_Section):
    lambdas: List[float] = [1.0]
    n_inside: int = 50
    n_outside: int = 50
    step: float = 1e-4
    margin: float = 0.05
    kms_points: int = 10
    kms_extent: float = 2.0

    @field_validator("lambdas")
    @classmethod
    def _weights(cls, value: List[float]) -> List[float]:
        if not value or any(lam <= 0 for lam in value) or abs(sum(value) - 1.0) > 1e-12:
            raise ValueError(f"weights must be positive and sum to 1, got {value}")
        return value

    @field_validator("n_inside", "n_outside")
    @classmethod
    def _at_least_ten(cls, value: int) -> int:
        if value < 10:
            raise ValueError(f"need at least 10 points, got {value}")
        return value


class OutputSection(_Section):
    dir: Optional[str] = None


class ToleranceSection(_Section):
    """Acceptance thresholds; every entry is multiplied by the tolerance scale."""

    exact: float = 1e-12
    dense_oracle: float = 1e-10
    n_sigma: float = 3.0
    kms_boundary: float = 1e-8
    holomorphy: float = 1e-6
    detailed_balance: float = 1e-3
    phi_bound: float = 1e-10
    scale: Optional[float] = None

    def scaled(self, name: str) -> float:
        scale = settings.TOLERANCE_SCALE if self.scale is None else self.scale
        return getattr(self, name) * scale


class RunConfig(_Section):
    lattice: LatticeSection = LatticeSection()
    measure: MeasureSection = MeasureSection()
    run: RunSection = RunSection()
    battery: BatterySection = BatterySection()
    fock: FockSection = FockSection()
    tube: TubeSection = TubeSection()
    output: OutputSection = OutputSection()
    tolerances: ToleranceSection = ToleranceSection()

    @model_validator(mode="after")
    def _cross_checks(self) -> "RunConfig":
        if self.measure.l is not None and not 0 < self.measure.l <= self.lattice.L:
            raise ConfigValidationError("measure.l", f"spatial cutoff must satisfy 0 < l <= L={self.lattice.L}")
        try:
            self.run.sampling()
        except ValidationError as exc:
            raise ConfigValidationError("run", exc.errors()[0]["msg"]) from exc
        return self

    @property
    def seed(self) -> int:
        return settings.SEED if self.run.seed is None else self.run.seed

    @property
    def threads(self) -> int:
        return settings.THREADS if self.run.threads is None else self.run.threads

    @property
    def output_dir(self) -> Path:
        return Path(settings.OUTPUT_DIR if self.output.dir is None else self.output.dir)

    def measure_spec(self) -> MeasureSpec:
        return build_measure_spec(self.lattice.build(), self.measure.P, self.measure.l, self.measure.estimator)

    def interacting_coefficients(self) -> List[float]:
        """P when it has an interaction, otherwise the quartic polynomial coupling * :lambda^4:."""
        if WickPolynomial(coefficients=tuple(self.measure.P)).degree > 0:
            return list(self.measure.P)
        return [0.0, 0.0, 0.0, 0.0, self.measure.coupling]

    def interacting_spec(self, lat: Optional[CylinderLattice] = None) -> MeasureSpec:
        """The interacting measure on the configured lattice, or on ``lat`` with the full window."""
        if lat is None:
            return build_measure_spec(self.lattice.build(), self.interacting_coefficients(), self.measure.l, self.measure.estimator)
        return build_measure_spec(lat, self.interacting_coefficients(), None, self.measure.estimator)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        out: Optional[str] = None,
        tolerance_scale: Optional[float] = None,
    ) -> "RunConfig":
        """Apply command-line flags on top of the file values."""
        run = self.run.model_copy(
            update={"seed": self.seed if seed is None else seed, "threads": self.threads if threads is None else threads}
        )
        output = self.output.model_copy(update={"dir": str(self.output_dir if out is None else out)})
        if tolerance_scale is not None:
            scale = tolerance_scale
        else:
            scale = settings.TOLERANCE_SCALE if self.tolerances.scale is None else self.tolerances.scale
        tolerances = self.tolerances.model_copy(update={"scale": scale})
        return self.model_copy(update={"run": run, "output": output, "tolerances": tolerances})


_LINE_PATTERN = re.compile(r"line (\d+)")


def _dotted(location: Tuple) -> str:
    return ".".join(str(part) for part in location) or "config"


def validate_config(data: dict) -> RunConfig:
    """Validate a parsed mapping; the first offending field is named in the error."""
    try:
        config = RunConfig.model_validate(data)
        config.measure_spec()
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigValidationError(_dotted(first["loc"]), first["msg"]) from exc
    except ConfigValidationError:
        raise
    except ThermalPhiError as exc:
        raise ConfigValidationError("config", str(exc)) from exc
    return config


def parse_config(path: str | Path) -> RunConfig:
    """Read a TOML run configuration, filling defaults.

    Raises:
        ParseError: The file is missing or not valid TOML (with the line when known).
        ConfigValidationError: A value violates a module invariant.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _LINE_PATTERN.search(str(exc))
        raise ParseError(str(exc), int(match.group(1)) if match else None) from exc
    config = validate_config(data)
    LOGGER.debug("Parsed %s: %s", path, config.model_dump())
    return config
