import asyncio
import logging
import time
from abc import ABC, abstractmethod
from typing import Tuple

from ..config import RunConfig
from ..errors import ExperimentError
from ..summarizer import ExperimentResult

LOGGER = logging.getLogger(__name__)


class BaseExperiment(ABC):
    name: str = "experiment"

    def __init__(self, config: RunConfig, stream: int = 0):
        """
        Initialize an experiment.

        Args:
            config: The validated run configuration (command-line overrides applied)
            stream: Index of this experiment's random stream within the run
        """
        self.config = config
        self.stream = stream

    @property
    def seed(self) -> int:
        return self.config.seed

    def streams(self, *keys: int) -> Tuple[int, ...]:
        """Stream path for a consumer nested inside this experiment."""
        return (self.stream, *keys)

    @abstractmethod
    def run(self) -> ExperimentResult:
        """
        Run the experiment synchronously.

        Returns:
            The checks it evaluated plus any tables or documents to write
        """

    async def execute(self, semaphore: asyncio.Semaphore) -> ExperimentResult:
        """Run in a worker thread once the semaphore admits it."""
        async with semaphore:
            LOGGER.info("Starting %s", self.name)
            start = time.perf_counter()
            try:
                result = await asyncio.to_thread(self.run)
            except Exception as exc:
                LOGGER.error("%s failed: %s", self.name, exc)
                raise ExperimentError(self.name, exc) from exc
            failed = sum(not check.passed for check in result.checks)
            LOGGER.info(
                "Finished %s in %.1fs: %d checks, %d failed",
                self.name,
                time.perf_counter() - start,
                len(result.checks),
                failed,
            )
            return result
