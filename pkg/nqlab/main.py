import argparse
import logging
import sys
from typing import List, Optional

from nqlab import __version__
from nqlab.core.config import settings
from nqlab.core.errors import ConfigInvalid, NqLabError
from nqlab.schemas.experiment import Command
from nqlab.services.experiment_service import ExperimentService

# Configure logging
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

VALIDATE = "validate"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Numerical experiments on N_q summability of series and derived conjugate series",
    )
    parser.add_argument("command", choices=[c.value for c in Command] + [VALIDATE])
    parser.add_argument("--config", required=True, help="JSON experiment document")
    parser.add_argument("--out", default=None, help="Output directory for CSV files and manifest.json")
    parser.add_argument("--tolerance", type=float, default=None, help="Override the check tolerance")
    parser.add_argument("--seed", type=int, default=None, help="Seed for grid jitter")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and return the process exit code.
    """
    args = build_parser().parse_args(argv)
    service = ExperimentService()
    try:
        raw = service.read_config(args.config)
        if args.tolerance is not None:
            raw["tolerance"] = args.tolerance
        if args.seed is not None:
            raw["seed"] = args.seed

        if args.command == VALIDATE:
            diagnostics = service.validate(raw)
            for diagnostic in diagnostics:
                print(diagnostic)
            return ConfigInvalid.exit_code if diagnostics else 0

        raw["command"] = args.command
        config = service.load(raw)
        manifest = service.run(config, args.out)
        logger.info(f"All {len(manifest.checks)} checks passed")
        return manifest.exit_code
    except ConfigInvalid as exc:
        for diagnostic in exc.diagnostics:
            print(diagnostic, file=sys.stderr)
        return exc.exit_code
    except NqLabError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception as exc:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
