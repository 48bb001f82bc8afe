import csv
import json
import logging
import math
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .statistics import Estimate

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULTS_HEADER = ("name", "value", "error", "bound", "passed")


@dataclass(frozen=True)
class CheckResult:
    """One acceptance check: a measured value, its error and the bound it is held to."""

    name: str
    value: float
    error: float
    bound: float
    passed: bool

    @classmethod
    def at_most(cls, name: str, value: float, bound: float, error: float = 0.0) -> "CheckResult":
        value = float(value)
        return cls(name, value, float(error), float(bound), bool(np.isfinite(value) and value <= bound))

    @classmethod
    def at_least(cls, name: str, value: float, bound: float, error: float = 0.0) -> "CheckResult":
        value = float(value)
        return cls(name, value, float(error), float(bound), bool(np.isfinite(value) and value >= bound))

    @classmethod
    def agreement(cls, name: str, estimate: Estimate, target: float, n_sigma: float, floor: float = 0.0) -> "CheckResult":
        """|estimate - target| against n_sigma standard errors (plus an absolute floor)."""
        deviation = abs(estimate.value - target)
        bound = n_sigma * estimate.std_error + floor
        return cls(name, float(deviation), float(estimate.std_error), float(bound), bool(deviation <= bound))

    @classmethod
    def comparison(cls, name: str, first: Estimate, second: Estimate, n_sigma: float, floor: float = 0.0) -> "CheckResult":
        """Two independent estimates of the same quantity."""
        deviation = abs(first.value - second.value)
        error = first.combined_error(second)
        bound = n_sigma * error + floor
        return cls(name, float(deviation), float(error), float(bound), bool(deviation <= bound))

    @classmethod
    def flag(cls, name: str, passed: bool, value: float = math.nan) -> "CheckResult":
        return cls(name, float(value), 0.0, math.nan, bool(passed))


@dataclass
class ExperimentResult:
    name: str
    checks: List[CheckResult] = field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    documents: Dict[str, Any] = field(default_factory=dict)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in ("thermalphi", "numpy", "scipy", "pydantic"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


class Summarizer:
    """Collects experiment results and writes results.csv, summary.json, manifest.json and the per-experiment files."""

    def __init__(self, config: RunConfig, subcommand: str):
        self.config = config
        self.subcommand = subcommand
        self.results: List[ExperimentResult] = []

    def add(self, results: Sequence[ExperimentResult]) -> None:
        self.results.extend(results)

    @property
    def checks(self) -> List[CheckResult]:
        return [check for result in self.results for check in result.checks]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def summary(self) -> Dict[str, Any]:
        checks = self.checks
        failing = [check.name for check in checks if not check.passed]
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "pass" if not failing else "fail",
            "passed": len(checks) - len(failing),
            "failed": len(failing),
            "checks": [
                {
                    "name": check.name,
                    "value": check.value if math.isfinite(check.value) else None,
                    "error": check.error if math.isfinite(check.error) else None,
                    "bound": check.bound if math.isfinite(check.bound) else None,
                    "passed": check.passed,
                }
                for check in checks
            ],
            "failing": failing,
        }

    def manifest(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "subcommand": self.subcommand,
            "seed": self.config.seed,
            "config": self.config.model_dump(mode="json"),
            "versions": _versions(),
        }

    def write(self, directory: Optional[Path] = None) -> Path:
        """Write every report; raises OSError when the directory is not writable."""
        directory = Path(directory or self.config.output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        self._write_csv(directory / "results.csv", RESULTS_HEADER, [check.__dict__ for check in self.checks])

        tables: Dict[str, List[Dict[str, Any]]] = {}
        documents: Dict[str, Any] = {}
        for result in self.results:
            for name, rows in result.tables.items():
                tables.setdefault(name, []).extend(rows)
            for name, payload in result.documents.items():
                documents.setdefault(name, {})[result.name] = payload
        for name, rows in tables.items():
            if rows:
                self._write_csv(directory / name, tuple(rows[0]), rows)
        for name, payload in documents.items():
            self._write_json(directory / name, payload)

        self._write_json(directory / "summary.json", self.summary())
        self._write_json(directory / "manifest.json", self.manifest())
        LOGGER.info("Wrote %d checks and %d tables to %s", len(self.checks), len(tables), directory)
        return directory

    @staticmethod
    def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(row[key]) for key in header])

    @staticmethod
    def _write_json(path: Path, payload: Any) -> None:
        with path.open("w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=False, default=_json_default)
            handle.write("\n")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def format_output(summary: Dict[str, Any], directory: Path) -> str:
    """
    Format a run summary as Markdown for the terminal.

    Args:
        summary: The dictionary returned by Summarizer.summary()
        directory: Where the reports were written

    Returns:
        Markdown formatted string representation of the run
    """
    output = [f"# thermalphi: {summary['status'].upper()}"]
    output.append(f"- **Passed**: {summary['passed']}")
    output.append(f"- **Failed**: {summary['failed']}")
    output.append(f"- **Reports**: {directory}")

    output.append("\n## Checks")
    for check in summary["checks"]:
        mark = "ok  " if check["passed"] else "FAIL"
        value = "-" if check["value"] is None else f"{check['value']:.4g}"
        bound = "-" if check["bound"] is None else f"{check['bound']:.4g}"
        output.append(f"- [{mark}] {check['name']}: {value} (bound {bound})")

    if summary["failing"]:
        output.append("\n## Failing Checks")
        for name in summary["failing"]:
            output.append(f"- {name}")
    return "\n".join(output)
