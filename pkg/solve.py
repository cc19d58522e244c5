import logging
import os
import sys

from pytorch_lightning import seed_everything

from domains.configurations import get_domain_config, load_problems
from search.configurations import parse_solver
from search.core import is_valid_solution
from training.bootstrap import BootstrapConfig, solve_all
from utils.args import get_solve_parser
from utils.model_utils import load_guiding_model
from utils.utils import run_main, write_csv

logger = logging.getLogger(__name__)

SOLVE_COLUMNS = ["id", "solved", "length", "expansions", "time_s"]


def main(args) -> int:
    seed_everything(args.seed, workers=True)
    domain_config = get_domain_config(args.domain)
    solver = parse_solver(args.solver)
    problems = load_problems(args.domain, args.problems)
    model = load_guiding_model(args.model, args.domain)
    config = BootstrapConfig.from_namespace(args, domain_config["initial_budget"], max_iterations=1)
    config.validate()

    results = solve_all(problems, solver, model, config)
    rows = []
    for i, (problem, result) in enumerate(zip(problems, results)):
        if result.solved and not is_valid_solution(problem, result):
            raise RuntimeError(f"{solver} returned an invalid path for problem {problem.problem_id}")
        rows.append(result.to_row(problem.problem_id or str(i)))

    frame = write_csv(rows, os.path.join(args.out, "solve.csv"), SOLVE_COLUMNS)
    frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    unsolved = len(rows) - int(frame["solved"].sum())
    logger.info(f"{solver}: {len(rows) - unsolved}/{len(rows)} solved")
    return 1 if unsolved else 0


def run(argv=None) -> int:
    return run_main(main, get_solve_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
