"""PUCT baseline with unit virtual loss and batched leaf evaluation.

Values are heuristic estimates (lower is better), so selection takes the
argmin of the normalized value minus the exploration bonus. Every node
created counts as one expansion and solutions are recognized when they are
generated.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set

import numpy as np

from domains.base import Problem
from search.core import SearchBudget, SearchResult, SearchStatus, child_log_conditionals
from search.guides import Guide, GuideOutput, ProblemGuide
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

BACKUPS = ("mean", "min")


@dataclass(eq=False)
class MctsNode:
    state: Any
    state_key: bytes
    action: int
    parent: Optional["MctsNode"]
    prior: float
    loss: float
    depth: int
    children: List["MctsNode"] = field(default_factory=list)
    visits: int = 0
    value_sum: float = 0.0
    # backed-up heuristic estimate, None until the first backup
    value: Optional[float] = None
    virtual_loss: float = 0.0
    h_raw: Optional[float] = None
    log_probs: Optional[np.ndarray] = None
    expanded: bool = False
    # closed: revisits an ancestor state, has no children, or all its
    # children are closed
    dead: bool = False

    def path(self) -> List[int]:
        actions = []
        node = self
        while node.parent is not None:
            actions.append(node.action)
            node = node.parent
        return actions[::-1]


class ValueNormalizer:
    """Global running min/max of the backed-up values."""

    def __init__(self):
        self.h_min = math.inf
        self.h_max = -math.inf

    def update(self, value: float) -> None:
        self.h_min = min(self.h_min, value)
        self.h_max = max(self.h_max, value)

    def normalize(self, value: float) -> float:
        if not self.h_max > self.h_min:
            return 0.0
        return (value - self.h_min) / (self.h_max - self.h_min)


def puct_select_child(node: MctsNode, normalizer: ValueNormalizer, c: float = 1.0) -> MctsNode:
    """argmin over open children of h̄(child) − c·prior·√ΣN / (1 + N(child)),
    ties to the lowest child index. A child without a value yet borrows its
    parent's."""
    total_visits = sum(child.visits for child in node.children)
    sqrt_total = math.sqrt(total_visits)
    parent_value = node.value if node.value is not None else 0.0
    best, best_score = None, math.inf
    for child in node.children:
        if child.dead:
            continue
        value = child.value if child.value is not None else parent_value
        h_bar = normalizer.normalize(value + child.virtual_loss)
        score = h_bar - c * child.prior * sqrt_total / (1 + child.visits)
        if best is None or score < best_score:
            best, best_score = child, score
    return best


def total_virtual_loss(root: MctsNode) -> float:
    total, stack = 0.0, [root]
    while stack:
        node = stack.pop()
        total += node.virtual_loss
        stack.extend(node.children)
    return total


class PuctSearch:
    def __init__(
        self,
        problem: Problem,
        guide: Optional[Guide] = None,
        budget: Optional[SearchBudget] = None,
        batch_size: int = 32,
        c: float = 1.0,
        backup: str = "mean",
    ):
        if backup not in BACKUPS:
            raise ConfigError(f"Backup {backup} not available. Choose from {list(BACKUPS)}")
        if batch_size < 1:
            raise ConfigError(f"batch size must be at least 1, got {batch_size}")
        self.problem = problem
        self.guide = guide or ProblemGuide()
        self.budget = budget or SearchBudget()
        self.batch_size = batch_size
        self.c = c
        self.backup = backup
        self.normalizer = ValueNormalizer()
        self.cache: Optional[Dict[bytes, GuideOutput]] = {} if self.guide.cacheable else None
        self.expansions = 0
        self.loss = 0.0
        self.descents = 0
        self.status: Optional[SearchStatus] = None
        self.solution: Optional[MctsNode] = None
        self.root: Optional[MctsNode] = None
        self._start = time.perf_counter()

    @property
    def finished(self) -> bool:
        return self.status is not None

    def _create(self, state, parent: Optional[MctsNode], action: int, prior: float, loss: float) -> Optional[MctsNode]:
        """Count a new node against the budget; None when it does not fit."""
        if not self.budget.allows(self.expansions, self.loss, loss, time.perf_counter() - self._start):
            self.status = SearchStatus.EXHAUSTED
            return None
        self.expansions += 1
        self.loss += loss
        node = MctsNode(
            state=state,
            state_key=self.problem.state_key(state),
            action=action,
            parent=parent,
            prior=prior,
            loss=loss,
            depth=parent.depth + 1 if parent is not None else 0,
        )
        if self.problem.is_solution(state):
            self.status, self.solution = SearchStatus.SOLVED, node
        return node

    def start(self) -> None:
        problem = self.problem
        self.root = self._create(problem.initial_state(), None, -1, 1.0, problem.root_loss())

    def max_penalty(self) -> float:
        """ℓ_max backed up when a descent revisits a state on its own path."""
        if self.budget.max_loss is not None and math.isfinite(self.budget.max_loss):
            return float(self.budget.max_loss)
        if self.budget.max_expansions is not None:
            return float(self.budget.max_expansions)
        return self.normalizer.h_max if math.isfinite(self.normalizer.h_max) else 1.0

    def _backpropagate(self, path: List[MctsNode], value: float) -> None:
        for node in reversed(path):
            node.visits += 1
            node.value_sum += value
            if self.backup == "mean" or node.value is None:
                node.value = node.value_sum / node.visits if self.backup == "mean" else value
            else:
                node.value = min(node.value, value)
            self.normalizer.update(node.value)
        for node in path[1:]:
            node.virtual_loss -= 1.0
        self.descents += 1

    def _close(self, node: MctsNode) -> None:
        node.dead = True
        parent = node.parent
        while parent is not None and not parent.dead and all(c.dead for c in parent.children):
            parent.dead = True
            parent = parent.parent

    def _descend(self, in_flight: Set[int]) -> Optional[List[MctsNode]]:
        """Select down to a leaf, adding virtual loss on the way. Returns the
        path, or None when the descent ended on a revisited state or on a
        leaf already waiting for evaluation."""
        node = self.root
        path = [node]
        keys = {node.state_key}
        while node.expanded:
            node = puct_select_child(node, self.normalizer, self.c)
            node.virtual_loss += 1.0
            path.append(node)
            if node.state_key in keys:
                self._close(node)
                self._backpropagate(path, self.max_penalty())
                return None
            keys.add(node.state_key)
        if id(node) in in_flight:
            for n in path[1:]:
                n.virtual_loss -= 1.0
            return None
        return path

    def collect(self) -> List[List[MctsNode]]:
        """Paths to at most `batch_size` distinct leaves."""
        paths: List[List[MctsNode]] = []
        in_flight: Set[int] = set()
        while len(paths) < self.batch_size and not self.root.dead:
            path = self._descend(in_flight)
            if path is None:
                if in_flight:
                    break
                continue
            in_flight.add(id(path[-1]))
            paths.append(path)
        return paths

    def _evaluate(self, leaves: List[MctsNode]) -> None:
        todo = [leaf for leaf in leaves if leaf.h_raw is None]
        if not todo:
            return
        if self.cache is None:
            outputs = self.guide.evaluate(self.problem, [leaf.state for leaf in todo])
        else:
            missing = {}
            for leaf in todo:
                if leaf.state_key not in self.cache:
                    missing.setdefault(leaf.state_key, leaf.state)
            if missing:
                fresh = self.guide.evaluate(self.problem, list(missing.values()))
                self.cache.update(zip(missing.keys(), fresh))
            outputs = [self.cache[leaf.state_key] for leaf in todo]
        for leaf, out in zip(todo, outputs):
            leaf.h_raw, leaf.log_probs = max(out.h, 0.0), out.log_probs

    def _expand(self, leaf: MctsNode) -> None:
        transitions = self.problem.expand(leaf.state)
        log_conds = child_log_conditionals(leaf.log_probs, transitions)
        leaf.expanded = True
        for t, log_cond in zip(transitions, log_conds):
            child = self._create(t.state, leaf, t.action, math.exp(log_cond), t.loss)
            if child is None:
                return
            leaf.children.append(child)
            if self.finished:
                return
        if not leaf.children:
            self._close(leaf)

    def step(self) -> None:
        """One collect / evaluate / expand / backup round."""
        if self.root is None:
            self.start()
            if self.finished:
                return
        paths = self.collect()
        if not paths:
            if self.root.dead:
                self.status = SearchStatus.FRONTIER_EMPTY
            return
        self._evaluate([path[-1] for path in paths])
        for i, path in enumerate(paths):
            leaf = path[-1]
            self._expand(leaf)
            if self.finished:
                # release what the unfinished descents still hold
                for pending in paths[i:]:
                    for node in pending[1:]:
                        node.virtual_loss -= 1.0
                return
            self._backpropagate(path, leaf.h_raw)
        if self.root.dead:
            self.status = SearchStatus.FRONTIER_EMPTY

    def run(self) -> SearchResult:
        while not self.finished:
            self.step()
        return self.result()

    def result(self) -> SearchResult:
        result = SearchResult(
            status=self.status,
            expansions=self.expansions,
            generated=self.expansions,
            search_loss=self.loss,
            elapsed=time.perf_counter() - self._start,
        )
        if self.solution is not None:
            result.solution_path = self.solution.path()
            result.solution_length = self.solution.depth
        logger.debug(
            f"puct:{self.c:g} on {self.problem.problem_id!r}: {self.status.value}, "
            f"{self.expansions} nodes, {self.descents} descents"
        )
        return result


def puct_search(
    problem: Problem,
    guide: Optional[Guide] = None,
    budget: Optional[SearchBudget] = None,
    batch_size: int = 32,
    c: float = 1.0,
    backup: str = "mean",
) -> SearchResult:
    return PuctSearch(problem, guide, budget, batch_size, c, backup).run()
