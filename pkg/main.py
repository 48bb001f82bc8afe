import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from src.config import RunConfig, parse_config, settings
from src.errors import ThermalPhiError
from src.orchestrator import SUBCOMMANDS, run_subcommand
from src.summarizer import format_output

LOGGER = logging.getLogger("thermalphi")

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Thermal P(phi)_2 lattice simulator and verification suite")
    parser.add_argument("subcommand", choices=list(SUBCOMMANDS), help="Which experiments to run")
    parser.add_argument("--config", type=str, help="TOML run configuration; defaults apply when omitted")
    parser.add_argument("--seed", type=int, help="Master seed (overrides run.seed)")
    parser.add_argument("--threads", type=int, help="Maximum number of experiments running at once")
    parser.add_argument("--out", type=str, help="Output directory for results.csv, summary.json and manifest.json")
    parser.add_argument("--tolerance-scale", type=float, help="Multiply every tolerance by this factor")
    parser.add_argument("--log-level", type=str, default=settings.LOG_LEVEL, help="Logging level")
    return parser


async def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = parse_config(args.config) if args.config else RunConfig()
        config = config.with_overrides(
            seed=args.seed, threads=args.threads, out=args.out, tolerance_scale=args.tolerance_scale
        )
        summarizer = await run_subcommand(args.subcommand, config)
    except (ThermalPhiError, OSError, ValueError) as e:
        LOGGER.error("%s failed: %s", args.subcommand, e)
        print(f"Error: {e}")
        return EXIT_ERROR

    print(format_output(summarizer.summary(), config.output_dir))
    return EXIT_PASSED if summarizer.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
