import argparse

from domains.configurations import DOMAIN_CFG
from models.configurations import ARCHITECTURES, OPTIMIZER
from search.puct import BACKUPS


def get_base_parser(description: str = None):
    parser = argparse.ArgumentParser(
        description=description,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--config", type=str, help="YAML file whose keys supply defaults for any flag"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--log_level", "--log-level", type=str, default="INFO", help="Choose from [DEBUG, INFO, WARNING, ERROR]"
    )
    parser.add_argument(
        "--out", type=str, default="./results", help="output directory"
    )
    return parser


def add_problem_args(parser):
    parser.add_argument(
        "--domain", type=str, required=True, help=f"Choose from {list(DOMAIN_CFG.keys())}"
    )
    parser.add_argument("--problems", type=str, required=True, help="problem file")
    return parser


def add_search_args(parser, single_solver: bool = True):
    if single_solver:
        parser.add_argument(
            "--solver",
            type=str,
            default="phs-star",
            help="astar, wastar:W, gbfs, levints, phs, phs-h, phs-star or puct:C",
        )
    parser.add_argument(
        "--budget", type=int, default=None, help="node expansions per attempt; domain default if unset"
    )
    parser.add_argument(
        "--batch",
        dest="batch_size",
        type=int,
        default=32,
        help="children (BFS) or leaves (PUCT) evaluated per network call",
    )
    parser.add_argument("--workers", type=int, default=1, help="parallel search processes")
    parser.add_argument("--model", type=str, default=None, help="checkpoint to guide the search")
    parser.add_argument(
        "--time_limit", "--time-limit", type=float, default=None, help="seconds per problem instead of an expansion budget"
    )
    parser.add_argument("--puct_backup", "--puct-backup", type=str, default="mean", help=f"Choose from {list(BACKUPS)}")
    parser.add_argument("--safe_pruning", "--safe-pruning", action="store_true")
    return parser


def add_bootstrap_args(parser):
    parser.add_argument(
        "--time_budget", "--time-budget", type=float, default=None, help="wall-clock seconds for the whole run"
    )
    parser.add_argument("--max_iterations", "--max-iterations", type=int, default=None)
    parser.add_argument(
        "--batch_problems", "--batch-problems", type=int, default=32, help="problems attempted between updates"
    )
    parser.add_argument("--progress", action="store_true", help="show progress bars")
    parser.add_argument("--wandb", action="store_true")
    parser.add_argument("--project_name", type=str, help="wandb project name")
    return parser


def get_solve_parser():
    parser = get_base_parser("Solve every problem of a file once.")
    add_problem_args(parser)
    add_search_args(parser)
    return parser


def get_train_parser():
    parser = get_base_parser("Train a policy/heuristic network with the Bootstrap process.")
    add_problem_args(parser)
    add_search_args(parser)
    add_bootstrap_args(parser)
    parser.add_argument(
        "--architecture", type=str, default=None, help=f"Choose from {list(ARCHITECTURES.keys())}"
    )
    parser.add_argument("--lr", type=float, default=OPTIMIZER["lr"])
    parser.add_argument("--weight_decay", type=float, default=OPTIMIZER["weight_decay"])
    parser.add_argument("--update_steps", type=int, default=1, help="Adam steps per update pass")
    parser.add_argument("--mse_reduction", type=str, default="mean", help="Choose from [mean, sum]")
    parser.add_argument("--runs", type=int, default=1, help="independent seeds; the best is kept")
    parser.add_argument("--resume", type=str, default=None, help="checkpoint whose weights and Adam state start every run")
    return parser


def get_test_parser():
    parser = get_base_parser("Test a frozen model, doubling the budget every iteration.")
    add_problem_args(parser)
    add_search_args(parser)
    add_bootstrap_args(parser)
    return parser


def get_gen_parser():
    parser = get_base_parser("Generate a problem file and its manifest.")
    parser.add_argument("--domain", type=str, required=True, help="Choose from [stp, witness]")
    parser.add_argument("--num", type=int, default=1000, help="number of problems")
    parser.add_argument("--split", type=str, default="train", help="Choose from [train, test]")
    parser.add_argument("--size", type=int, default=5, help="sliding-tile width")
    parser.add_argument("--min_length", type=int, default=50, help="shortest random walk (stp train)")
    parser.add_argument("--max_length", type=int, default=1000, help="longest random walk (stp train)")
    parser.add_argument("--rows", type=int, default=4, help="witness cell rows")
    parser.add_argument("--cols", type=int, default=4, help="witness cell columns")
    parser.add_argument("--fill", type=float, default=0.6, help="fraction of coloured witness cells")
    return parser


def get_verify_parser():
    parser = get_base_parser("Check the search-loss bounds on exactly enumerated instances.")
    parser.add_argument("--quick", action="store_true", help="smaller instance counts")
    parser.add_argument("--suites", type=str, nargs="*", default=None, help="subset of suites to run")
    parser.add_argument(
        "--inject_inadmissible", action="store_true", help="add a tree whose eta violates PHS-admissibility"
    )
    parser.add_argument("--progress", action="store_true", help="show progress bars")
    return parser


def get_bench_parser():
    parser = get_base_parser("Run several solvers on one problem file.")
    add_problem_args(parser)
    add_search_args(parser, single_solver=False)
    parser.add_argument(
        "--solvers", type=str, nargs="*", default=None, help="solver list; every registered solver if unset"
    )
    return parser
