import logging
import os
import sys
from dataclasses import asdict

from pytorch_lightning import seed_everything

from domains.configurations import get_domain_config, load_problems
from search.configurations import parse_solver
from training.bootstrap import ITERATION_COLUMNS, RESULT_COLUMNS, SUMMARY_COLUMNS, BootstrapConfig, summarize
from training.bootstrap import test as bootstrap_test
from utils.args import get_test_parser
from utils.model_utils import build_metrics_logger, load_guiding_model
from utils.utils import run_main, write_csv

logger = logging.getLogger(__name__)


def main(args) -> int:
    """Unsolved test problems are results, not errors: exit 0."""
    seed_everything(args.seed, workers=True)
    domain_config = get_domain_config(args.domain)
    solver = parse_solver(args.solver)
    problems = load_problems(args.domain, args.problems)
    model = load_guiding_model(args.model, args.domain)
    config = BootstrapConfig.from_namespace(args, domain_config["initial_budget"])
    metrics_logger = build_metrics_logger(args, "test")

    rows, logs = bootstrap_test(problems, solver, model, config, metrics_logger)
    metrics_logger.finalize("success")

    write_csv(rows, os.path.join(args.out, "test_results.csv"), RESULT_COLUMNS)
    write_csv([asdict(log) for log in logs], os.path.join(args.out, "test_iterations.csv"), ITERATION_COLUMNS)
    summary = summarize(rows, str(solver))
    write_csv([summary], os.path.join(args.out, "summary.csv"), SUMMARY_COLUMNS)
    logger.info(
        f"{solver}: {summary['solved']}/{len(problems)} solved, mean length {summary['mean_length']:.1f}, "
        f"mean expansions {summary['mean_expansions']:.1f}, mean time {summary['mean_time_s']:.2f}s"
    )
    return 0


def run(argv=None) -> int:
    return run_main(main, get_test_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
