import argparse
import logging
import time
from pathlib import Path

from urnlab.cli.common import finish_metrics, output_dir, require_positive, resolve_threads
from urnlab.core.config import settings
from urnlab.core.errors import EXIT_FAIL, EXIT_OK
from urnlab.models.manifest import Manifest
from urnlab.services import verify_service
from urnlab.services.suites import suite_ids
from urnlab.services.verify_service import load_acceptance
from urnlab.utils.telemetrics import tracer
from urnlab.utils.writers import atomic_write_json, config_hash, tool_versions

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="Run verification suites against the acceptance file")
    parser.add_argument("--suite", nargs="+", default=["all"], help="Suite ids (T1..T10) or 'all'")
    parser.add_argument("--acceptance", default=None, help="Acceptance file (default ACCEPTANCE_FILE)")
    parser.add_argument("--seed", type=int, default=None, help="Seed (overrides the acceptance file)")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default URNLAB_THREADS)")
    parser.add_argument("--multiplier", type=int, default=None, help="Z-infinity proxy multiplier")
    parser.add_argument("--out", default=".", help="Output directory")
    parser.set_defaults(handler=cmd_verify)


def cmd_verify(args: argparse.Namespace) -> int:
    """Exit 0 iff every non-informational criterion passes"""
    require_positive("--threads", args.threads)
    require_positive("--multiplier", args.multiplier)
    ids = suite_ids(args.suite)
    acceptance_path = Path(args.acceptance or settings.ACCEPTANCE_FILE)
    acceptance = load_acceptance(acceptance_path)
    threads = resolve_threads(args.threads)
    out = output_dir(args.out)

    before_time = time.perf_counter()
    with tracer().start_as_current_span("cmd_verify"):
        report = verify_service.run_all(acceptance, ids, threads, seed=args.seed, proxy_multiplier=args.multiplier)
        atomic_write_json(out / "report.json", report)

    multiplier = args.multiplier or acceptance.proxy_multiplier
    manifest = Manifest(
        config_hash=config_hash(acceptance),
        seed=report.seed,
        replications=sum(acceptance.suites[i].replications for i in ids),
        tool_version=tool_versions(),
        proxy_multiplier=multiplier,
        thresholds={i.value: acceptance.suites[i].thresholds for i in ids},
        wall_time_seconds=time.perf_counter() - before_time,
    )
    atomic_write_json(out / "manifest.json", manifest)
    finish_metrics(out)

    for suite in report.suites:
        logger.info(f"{suite.suite.value} [{suite.theorem_ref}]: {suite.verdict.value}")
    return EXIT_OK if report.passed else EXIT_FAIL
