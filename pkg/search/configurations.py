from dataclasses import dataclass
from typing import Optional, Tuple

from domains.base import Problem
from search.core import SearchBudget, SearchResult, bfs_search, bfs_search_safe_pruning
from search.evaluators import Evaluator, parse_evaluator
from search.guides import Guide, default_guide
from search.puct import puct_search
from utils.exceptions import ConfigError


LEVIN, MSE, CROSS_ENTROPY = "levin", "mse", "cross_entropy"

SOLVERS = {
    "astar": {"search": "bfs", "losses": (MSE,), "policy": False, "heuristic": True},
    "wastar": {"search": "bfs", "losses": (MSE,), "policy": False, "heuristic": True},
    "gbfs": {"search": "bfs", "losses": (MSE,), "policy": False, "heuristic": True},
    "levints": {"search": "bfs", "losses": (LEVIN,), "policy": True, "heuristic": False},
    "phs": {"search": "bfs", "losses": (LEVIN,), "policy": True, "heuristic": False},
    "phs-h": {"search": "bfs", "losses": (LEVIN, MSE), "policy": True, "heuristic": True},
    "phs-star": {"search": "bfs", "losses": (LEVIN, MSE), "policy": True, "heuristic": True},
    "puct": {"search": "puct", "losses": (CROSS_ENTROPY, MSE), "policy": True, "heuristic": True},
}


@dataclass(frozen=True)
class SolverSpec:
    name: str
    evaluator: Optional[Evaluator] = None
    # PUCT exploration constant
    c: float = 1.0

    @property
    def family(self) -> str:
        return "puct" if self.evaluator is None else self.evaluator.kind

    @property
    def config(self) -> dict:
        return SOLVERS[self.family]

    @property
    def losses(self) -> Tuple[str, ...]:
        return self.config["losses"]

    @property
    def uses_policy(self) -> bool:
        return self.config["policy"]

    @property
    def uses_heuristic(self) -> bool:
        return self.config["heuristic"]

    def guide(self, model=None) -> Guide:
        return default_guide(model, self.uses_policy, self.uses_heuristic)

    def search(
        self,
        problem: Problem,
        budget: Optional[SearchBudget] = None,
        batch_size: int = 32,
        model=None,
        guide: Optional[Guide] = None,
        puct_backup: str = "mean",
        safe_pruning: bool = False,
    ) -> SearchResult:
        guide = guide or self.guide(model)
        if self.evaluator is None:
            return puct_search(problem, guide, budget, batch_size, self.c, puct_backup)
        if safe_pruning:
            return bfs_search_safe_pruning(problem, self.evaluator, budget, batch_size, guide)
        return bfs_search(problem, self.evaluator, budget, batch_size, guide)

    def __str__(self) -> str:
        return self.name


def parse_solver(text: str) -> SolverSpec:
    """An evaluator string or "puct:C"."""
    name = text.strip().lower()
    family, _, argument = name.partition(":")
    if family not in SOLVERS:
        raise ConfigError(f"Solver {family} not available. Choose from {list(SOLVERS.keys())}")
    if family == "puct":
        try:
            c = float(argument) if argument else 1.0
        except ValueError:
            raise ConfigError(f"PUCT constant {argument!r} is not a number")
        if c < 0:
            raise ConfigError(f"PUCT constant must be nonnegative, got {c}")
        return SolverSpec(f"puct:{c:g}", c=c)
    evaluator = parse_evaluator(name)
    return SolverSpec(str(evaluator), evaluator)
