import logging
import os
import sys
from dataclasses import asdict

from pytorch_lightning import seed_everything
import wandb

from domains.configurations import get_domain_config, load_problems
from models.network import PolicyHeuristicNet
from search.configurations import parse_solver
from training.bootstrap import ITERATION_COLUMNS, BootstrapConfig, TrainRun, select_best_model
from training.bootstrap import train as bootstrap_train
from utils.args import get_train_parser
from utils.exceptions import ConfigError
from utils.model_utils import build_metrics_logger, build_optimizer, load_checkpoint, save_checkpoint
from utils.utils import run_main, write_csv

logger = logging.getLogger(__name__)


def build_model(args, problems, solver, domain_config) -> PolicyHeuristicNet:
    architecture = args.architecture or domain_config["architecture"]
    if architecture is None:
        raise ConfigError(f"Domain {args.domain} carries its own policy and heuristic; there is no network to train")
    if not (solver.uses_policy or solver.uses_heuristic):
        raise ConfigError(f"Solver {solver} uses no learned function")
    problem = problems[0]
    return PolicyHeuristicNet(
        feature_shape=problem.feature_shape,
        num_actions=problem.num_actions,
        architecture=architecture,
        losses=solver.losses,
        mse_reduction=args.mse_reduction,
        lr=args.lr,
        weight_decay=args.weight_decay,
    )


def resume_model(path: str, domain: str, solver):
    """Checkpointed model and Adam state; the checkpoint must train the
    losses `solver` trains."""
    model, optimizer_state = load_checkpoint(path, domain)
    if tuple(model.hparams.losses) != tuple(solver.losses):
        raise ConfigError(
            f"Checkpoint {path} trains {list(model.hparams.losses)}, "
            f"solver {solver} trains {list(solver.losses)}"
        )
    return model, optimizer_state


def main(args) -> int:
    domain_config = get_domain_config(args.domain)
    solver = parse_solver(args.solver)
    problems = load_problems(args.domain, args.problems)
    if not problems:
        raise ConfigError(f"Problem file {args.problems} is empty")
    if args.runs < 1:
        raise ConfigError(f"number of runs must be at least 1, got {args.runs}")

    runs = []
    for k in range(args.runs):
        seed = args.seed + k
        seed_everything(seed, workers=True)
        config = BootstrapConfig.from_namespace(args, domain_config["initial_budget"], seed=seed)
        if args.resume:
            model, optimizer_state = resume_model(args.resume, args.domain, solver)
        else:
            model, optimizer_state = build_model(args, problems, solver, domain_config), None
        optimizer = build_optimizer(model, optimizer_state)
        metrics_logger = build_metrics_logger(args, f"run_{k}")

        model, logs = bootstrap_train(problems, solver, model, config, optimizer, metrics_logger)
        metrics_logger.finalize("success")
        if args.wandb:
            wandb.finish()

        run_dir = os.path.join(args.out, f"run_{k}")
        save_checkpoint(os.path.join(run_dir, "model.ckpt"), model, args.domain, optimizer)
        write_csv([asdict(log) for log in logs], os.path.join(run_dir, "iterations.csv"), ITERATION_COLUMNS)
        run = TrainRun(model, logs, optimizer)
        logger.info(f"run {k} (seed {seed}): {run.total_solved}/{len(problems)} training problems solved")
        runs.append(run)

    best, run = select_best_model(runs)
    save_checkpoint(os.path.join(args.out, "best_model.ckpt"), run.model, args.domain, run.optimizer)
    with open(os.path.join(args.out, "best_run.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(f"run_{best}\n")
    logger.info(f"best run: run_{best}")
    return 0


def run(argv=None) -> int:
    return run_main(main, get_train_parser(), argv)


if __name__ == "__main__":
    sys.exit(run())
