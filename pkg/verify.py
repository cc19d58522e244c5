import logging
import os
import sys

from domains.synth_tree import serialize_synth
from theory.lab import PRECONDITION_FAILED
from theory.suite import run_suite
from utils.args import get_verify_parser
from utils.utils import run_main, write_csv

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["instance", "check", "measured", "bound", "slack", "status", "detail"]


def main(args) -> int:
    outcome = run_suite(
        seed=args.seed,
        quick=args.quick,
        only=args.suites,
        inject_inadmissible=args.inject_inadmissible,
        show_progress=args.progress,
    )
    write_csv([r.to_row() for r in outcome.reports], os.path.join(args.out, "verify.csv"), REPORT_COLUMNS)
    skipped = [r for r in outcome.reports if r.status == PRECONDITION_FAILED]
    for report in skipped:
        logger.warning(f"{report.check} on {report.instance}: precondition failed ({report.detail})")
    if not outcome.failures:
        logger.info(f"{len(outcome.reports)} checks passed")
        return 0

    for report in outcome.failures:
        logger.error(
            f"{report.check} on {report.instance}: measured {report.measured:g}, bound {report.bound:g} {report.detail}"
        )
    trees = outcome.failing_trees()
    if trees:
        path = os.path.join(args.out, "failing_instances.yaml")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(serialize_synth(trees))
        logger.error(f"{len(trees)} failing trees written to {path}; replay with --domain synth --problems {path}")
    return 1


def run(argv=None) -> int:
    return run_main(main, get_verify_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
