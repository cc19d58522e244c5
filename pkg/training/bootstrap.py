"""Bootstrap training and testing.

Each iteration sweeps the problems in file order with the current
expansion budget. During training the model is updated after every batch
of attempted problems, using the solution paths found in that batch, and
the budget doubles after an iteration that solved no problem for the first
time. During testing the model is frozen, a solved problem is not
attempted again, and the budget doubles after every iteration.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from domains.base import Problem
from models.losses import TrainSample, adam_update, gradients
from models.network import PolicyHeuristicNet
from search.configurations import SolverSpec
from search.core import SearchBudget, SearchResult
from utils.exceptions import ConfigError
from utils.model_utils import progress_bar

logger = logging.getLogger(__name__)

ITERATION_COLUMNS = ["iteration", "budget", "new_solved", "total_solved", "cum_expansions", "cum_seconds"]
RESULT_COLUMNS = ["id", "solved", "length", "expansions", "time_s", "iteration", "budget"]
SUMMARY_COLUMNS = ["solver", "solved", "mean_length", "mean_expansions", "mean_time_s"]


@dataclass
class BootstrapConfig:
    initial_budget: int = 2000
    batch_problems: int = 32
    wall_time_budget: Optional[float] = None
    max_iterations: Optional[int] = None
    workers: int = 1
    seed: int = 0
    search_batch_size: int = 32
    # turns each attempt's budget into a wall-clock limit
    time_limit_per_problem: Optional[float] = None
    update_steps: int = 1
    puct_backup: str = "mean"
    safe_pruning: bool = False
    show_progress: bool = False

    @classmethod
    def from_namespace(cls, args, initial_budget: int, **overrides) -> "BootstrapConfig":
        """Fields present on an argparse namespace; `--budget` overrides the
        domain's initial budget."""
        fields = dict(
            initial_budget=getattr(args, "budget", None) or initial_budget,
            batch_problems=getattr(args, "batch_problems", cls.batch_problems),
            wall_time_budget=getattr(args, "time_budget", None),
            max_iterations=getattr(args, "max_iterations", None),
            workers=getattr(args, "workers", cls.workers),
            seed=getattr(args, "seed", cls.seed),
            search_batch_size=getattr(args, "batch_size", cls.search_batch_size),
            time_limit_per_problem=getattr(args, "time_limit", None),
            update_steps=getattr(args, "update_steps", cls.update_steps),
            puct_backup=getattr(args, "puct_backup", cls.puct_backup),
            safe_pruning=getattr(args, "safe_pruning", cls.safe_pruning),
            show_progress=getattr(args, "progress", cls.show_progress),
        )
        fields.update(overrides)
        return cls(**fields)

    def validate(self) -> None:
        if self.initial_budget < 1:
            raise ConfigError(f"initial budget must be at least 1, got {self.initial_budget}")
        if self.batch_problems < 1:
            raise ConfigError(f"batch of problems must be at least 1, got {self.batch_problems}")
        if self.workers < 1:
            raise ConfigError(f"number of workers must be at least 1, got {self.workers}")
        if self.update_steps < 1:
            raise ConfigError(f"update steps must be at least 1, got {self.update_steps}")
        if self.wall_time_budget is None and self.max_iterations is None:
            raise ConfigError("set a wall-time budget or a maximum number of iterations")


@dataclass
class IterationLog:
    iteration: int
    budget: int
    new_solved: int
    total_solved: int
    cum_expansions: int
    cum_seconds: float


@dataclass
class TrainRun:
    model: PolicyHeuristicNet
    logs: List[IterationLog] = field(default_factory=list)
    optimizer: Optional[torch.optim.Optimizer] = None

    @property
    def total_solved(self) -> int:
        return self.logs[-1].total_solved if self.logs else 0


def search_budget(budget: int, config: BootstrapConfig) -> SearchBudget:
    if config.time_limit_per_problem is not None:
        return SearchBudget(max_seconds=config.time_limit_per_problem)
    return SearchBudget(max_expansions=budget)


def attempt(
    problem: Problem,
    solver: SolverSpec,
    budget: int,
    model: Optional[PolicyHeuristicNet],
    config: BootstrapConfig,
) -> SearchResult:
    return solver.search(
        problem,
        search_budget(budget, config),
        batch_size=config.search_batch_size,
        model=model,
        puct_backup=config.puct_backup,
        safe_pruning=config.safe_pruning,
    )


def make_sample(problem: Problem, result: SearchResult, with_masks: bool = True) -> TrainSample:
    states = [problem.initial_state()]
    for action in result.solution_path:
        states.append(problem.apply(states[-1], action))
    masks = np.stack([problem.legal_mask(s) for s in states]) if with_masks else None
    return TrainSample(
        features=np.stack([problem.encode(s) for s in states]),
        actions=np.asarray(result.solution_path, dtype=np.int64),
        search_loss=result.search_loss,
        masks=masks,
    )


def update_pass(
    model: PolicyHeuristicNet,
    optimizer: torch.optim.Optimizer,
    samples: Sequence[TrainSample],
    steps: int = 1,
) -> Optional[float]:
    """Gradient steps on all solution paths of one batch of attempts."""
    if not samples:
        return None
    model.train()
    value = None
    for _ in range(steps):
        loss = model.training_step(list(samples))
        adam_update(model, optimizer, gradients(model, loss))
        value = float(loss.detach()) if torch.is_tensor(loss) else float(loss)
    model.eval()
    return value


_WORKER_MODEL: Optional[PolicyHeuristicNet] = None


def _init_worker(hparams: Optional[dict], state_dict: Optional[dict]) -> None:
    global _WORKER_MODEL
    torch.set_num_threads(1)
    if hparams is None:
        _WORKER_MODEL = None
        return
    model = PolicyHeuristicNet(**hparams)
    model = model.to(next(iter(state_dict.values())).dtype)
    model.load_state_dict(state_dict)
    model.eval()
    _WORKER_MODEL = model


def _attempt_in_worker(task) -> SearchResult:
    problem, solver, budget, config = task
    return attempt(problem, solver, budget, _WORKER_MODEL, config).detached()


def _snapshot(model: Optional[PolicyHeuristicNet]) -> Tuple[Optional[dict], Optional[dict]]:
    if model is None:
        return None, None
    state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
    return dict(model.hparams), state


class _Clock:
    def __init__(self, limit: Optional[float]):
        self.start = time.perf_counter()
        self.limit = limit

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    @property
    def expired(self) -> bool:
        return self.limit is not None and self.elapsed >= self.limit


def run_attempts(
    indices: Sequence[int],
    problems: Sequence[Problem],
    solver: SolverSpec,
    budget: int,
    model: Optional[PolicyHeuristicNet],
    config: BootstrapConfig,
    clock: _Clock,
    executor: Optional[ProcessPoolExecutor] = None,
) -> List[Tuple[int, SearchResult]]:
    """Attempt the given problems; stops starting new attempts once the
    wall-time budget is spent."""
    if executor is None:
        results = []
        for i in indices:
            if clock.expired:
                break
            results.append((i, attempt(problems[i], solver, budget, model, config)))
        return results
    if clock.expired:
        return []
    tasks = [(problems[i], solver, budget, config) for i in indices]
    return list(zip(indices, executor.map(_attempt_in_worker, tasks)))


def _executor(model: Optional[PolicyHeuristicNet], config: BootstrapConfig) -> Optional[ProcessPoolExecutor]:
    if config.workers <= 1:
        return None
    hparams, state = _snapshot(model)
    return ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(hparams, state))


def solve_all(
    problems: Sequence[Problem],
    solver: SolverSpec,
    model: Optional[PolicyHeuristicNet],
    config: BootstrapConfig,
) -> List[SearchResult]:
    """One attempt per problem at the initial budget, in input order."""
    executor = _executor(model, config)
    try:
        indices = list(range(len(problems)))
        results = run_attempts(indices, problems, solver, config.initial_budget, model, config, _Clock(None), executor)
    finally:
        if executor is not None:
            executor.shutdown()
    return [result for _, result in results]


def _log_iteration(log: IterationLog, metrics_logger, phase: str) -> None:
    logger.info(
        f"{phase} iteration {log.iteration}: budget {log.budget}, {log.new_solved} new, "
        f"{log.total_solved} solved, {log.cum_expansions} expansions, {log.cum_seconds:.1f}s"
    )
    if metrics_logger is not None:
        metrics_logger.log_metrics(
            {f"{phase}/{k}": v for k, v in asdict(log).items() if k != "iteration"},
            step=log.iteration,
        )


def train(
    problems: Sequence[Problem],
    solver: SolverSpec,
    model: PolicyHeuristicNet,
    config: BootstrapConfig,
    optimizer: Optional[torch.optim.Optimizer] = None,
    metrics_logger=None,
) -> Tuple[PolicyHeuristicNet, List[IterationLog]]:
    """Returns the trained model and one log per (possibly partial)
    iteration. Attempts are never interrupted by the wall-time budget."""
    config.validate()
    if not problems:
        raise ConfigError("no training problems")
    optimizer = optimizer or model.configure_optimizers()
    model.eval()
    clock = _Clock(config.wall_time_budget)
    budget = config.initial_budget
    ever_solved = set()
    logs: List[IterationLog] = []
    cum_expansions = 0
    iteration = 0
    while not clock.expired and (config.max_iterations is None or iteration < config.max_iterations):
        iteration += 1
        new_solved = 0
        batches = range(0, len(problems), config.batch_problems)
        for start in progress_bar(batches, f"Iteration {iteration}", disable=not config.show_progress):
            indices = list(range(start, min(start + config.batch_problems, len(problems))))
            executor = _executor(model, config)
            try:
                results = run_attempts(indices, problems, solver, budget, model, config, clock, executor)
            finally:
                if executor is not None:
                    executor.shutdown()
            samples = []
            for i, result in results:
                cum_expansions += result.expansions
                if result.solved:
                    samples.append(make_sample(problems[i], result))
                    if i not in ever_solved:
                        ever_solved.add(i)
                        new_solved += 1
            loss = update_pass(model, optimizer, samples, config.update_steps)
            if loss is not None:
                logger.info(f"update on {len(samples)} solutions, loss {loss:.4f}")
            if len(results) < len(indices):
                break
        log = IterationLog(iteration, budget, new_solved, len(ever_solved), cum_expansions, clock.elapsed)
        logs.append(log)
        _log_iteration(log, metrics_logger, "train")
        if new_solved == 0:
            budget *= 2
    return model, logs


def test(
    problems: Sequence[Problem],
    solver: SolverSpec,
    model: Optional[PolicyHeuristicNet],
    config: BootstrapConfig,
    metrics_logger=None,
) -> Tuple[List[dict], List[IterationLog]]:
    """Per-problem rows (first solve, or unsolved) and iteration logs."""
    config.validate()
    if model is not None:
        model.eval()
    clock = _Clock(config.wall_time_budget)
    budget = config.initial_budget
    solved: Dict[int, Tuple[SearchResult, int, int]] = {}
    logs: List[IterationLog] = []
    cum_expansions = 0
    iteration = 0
    executor = _executor(model, config)
    try:
        while len(solved) < len(problems) and not clock.expired and (
            config.max_iterations is None or iteration < config.max_iterations
        ):
            iteration += 1
            new_solved = 0
            unsolved = [i for i in range(len(problems)) if i not in solved]
            for start in progress_bar(
                range(0, len(unsolved), config.batch_problems),
                f"Test iteration {iteration}",
                disable=not config.show_progress,
            ):
                indices = unsolved[start : start + config.batch_problems]
                results = run_attempts(indices, problems, solver, budget, model, config, clock, executor)
                for i, result in results:
                    cum_expansions += result.expansions
                    if result.solved:
                        solved[i] = (result, iteration, budget)
                        new_solved += 1
                if len(results) < len(indices):
                    break
            log = IterationLog(iteration, budget, new_solved, len(solved), cum_expansions, clock.elapsed)
            logs.append(log)
            _log_iteration(log, metrics_logger, "test")
            budget *= 2
    finally:
        if executor is not None:
            executor.shutdown()

    rows = []
    for i, problem in enumerate(problems):
        problem_id = problem.problem_id or str(i)
        if i in solved:
            result, solved_at, solved_budget = solved[i]
            row = result.to_row(problem_id)
            row.update(iteration=solved_at, budget=solved_budget)
        else:
            row = {"id": problem_id, "solved": False, "length": None, "expansions": None,
                   "time_s": None, "iteration": None, "budget": None}
        rows.append(row)
    return rows, logs


def summarize(rows: Sequence[dict], solver: str) -> dict:
    """Solved count and means over solved problems only."""
    frame = pd.DataFrame(list(rows), columns=RESULT_COLUMNS)
    done = frame[frame["solved"].astype(bool)]

    def mean(column: str) -> float:
        return float(done[column].astype(float).mean()) if len(done) else math.nan

    return {
        "solver": solver,
        "solved": int(len(done)),
        "mean_length": mean("length"),
        "mean_expansions": mean("expansions"),
        "mean_time_s": mean("time_s"),
    }


def select_best_model(runs: Sequence[TrainRun]) -> Tuple[int, TrainRun]:
    """The run with the most training problems solved; earliest on ties."""
    if not runs:
        raise ConfigError("no runs to select from")
    best = max(range(len(runs)), key=lambda i: (runs[i].total_solved, -i))
    return best, runs[best]
