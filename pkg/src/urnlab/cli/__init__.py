# urnlab/cli/__init__.py
import argparse
import logging
from typing import List, Optional

from urnlab import __version__
from urnlab.core.errors import EXIT_RUNTIME, UrnlabError

from . import simulate
from . import sweep
from . import verify

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urnlab", description="Simulation and statistical verification of randomly reinforced urns"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    simulate.register(subparsers)
    verify.register(subparsers)
    sweep.register(subparsers)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Run one command and translate failures into stable exit codes"""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except UrnlabError as exc:
        step = getattr(exc, "step", None)
        suffix = f" (step {step})" if step is not None else ""
        logger.error(f"{type(exc).__name__}: {exc}{suffix}")
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"Unexpected error in '{args.command}': {exc}")
        return EXIT_RUNTIME
