import logging
import os
import sys

from pytorch_lightning import seed_everything

from domains.configurations import get_domain_config, load_problems
from search.configurations import SOLVERS, parse_solver
from training.bootstrap import RESULT_COLUMNS, SUMMARY_COLUMNS, BootstrapConfig, solve_all, summarize
from utils.args import get_bench_parser
from utils.model_utils import load_guiding_model
from utils.utils import run_main, write_csv

logger = logging.getLogger(__name__)

WASTAR_WEIGHTS = (1.5, 2.0, 2.5, 3.0)
PUCT_CONSTANTS = (1.0, 1.5, 2.0)


def default_solvers():
    names = []
    for family in SOLVERS:
        if family == "wastar":
            names += [f"wastar:{w:g}" for w in WASTAR_WEIGHTS]
        elif family == "puct":
            names += [f"puct:{c:g}" for c in PUCT_CONSTANTS]
        else:
            names.append(family)
    return names


def main(args) -> int:
    """Every solver gets one attempt per problem with the same budget (or
    time limit) and the same model."""
    seed_everything(args.seed, workers=True)
    domain_config = get_domain_config(args.domain)
    solvers = [parse_solver(name) for name in (args.solvers or default_solvers())]
    problems = load_problems(args.domain, args.problems)
    model = load_guiding_model(args.model, args.domain)
    config = BootstrapConfig.from_namespace(args, domain_config["initial_budget"], max_iterations=1)
    config.validate()

    summaries = []
    for solver in solvers:
        results = solve_all(problems, solver, model, config)
        rows = []
        for i, (problem, result) in enumerate(zip(problems, results)):
            row = result.to_row(problem.problem_id or str(i))
            row.update(iteration=1, budget=config.initial_budget)
            rows.append(row)
        write_csv(rows, os.path.join(args.out, f"bench_{str(solver).replace(':', '_')}.csv"), RESULT_COLUMNS)
        summary = summarize(rows, str(solver))
        logger.info(f"{solver}: {summary['solved']}/{len(problems)} solved")
        summaries.append(summary)
    write_csv(summaries, os.path.join(args.out, "bench_summary.csv"), SUMMARY_COLUMNS)
    return 0


def run(argv=None) -> int:
    return run_main(main, get_bench_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
