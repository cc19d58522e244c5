import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from domains.base import Problem, Transition, replay
from search.evaluators import EvalContext, Evaluator
from search.guides import Guide, GuideOutput, ProblemGuide
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


class SearchStatus(str, Enum):
    SOLVED = "solved"
    EXHAUSTED = "exhausted"
    FRONTIER_EMPTY = "frontier_empty"


@dataclass
class SearchBudget:
    max_expansions: Optional[int] = None
    max_loss: Optional[float] = None
    max_seconds: Optional[float] = None

    def allows(self, expansions: int, loss: float, next_loss: float, elapsed: float) -> bool:
        """Whether one more expansion incurring `next_loss` fits."""
        if self.max_expansions is not None and expansions + 1 > self.max_expansions:
            return False
        if self.max_loss is not None and loss + next_loss > self.max_loss:
            return False
        if self.max_seconds is not None and elapsed >= self.max_seconds:
            return False
        return True


@dataclass(eq=False)
class SearchNode:
    state: Any
    state_key: bytes
    parent: Optional["SearchNode"]
    action: int
    depth: int
    g: float
    log_pi: float
    loss: float
    h: float = 0.0
    eta: Optional[float] = None
    # frontier key and its running max along the path
    eval: float = math.inf
    eval_plus: float = math.inf
    # guide policy at this node, used for its children's conditionals
    log_probs: Optional[np.ndarray] = None

    def context(self) -> EvalContext:
        parent_plus = self.parent.eval_plus if self.parent is not None else -math.inf
        return EvalContext(self.g, self.depth, self.log_pi, self.h, parent_plus, self.eta)

    def path(self) -> List[int]:
        actions = []
        node = self
        while node.parent is not None:
            actions.append(node.action)
            node = node.parent
        return actions[::-1]


class Frontier:
    """Min-heap on (eval, -g, insertion order)."""

    def __init__(self):
        self._heap: List[Tuple[float, float, int, SearchNode]] = []
        self._counter = itertools.count()

    def push(self, node: SearchNode) -> None:
        heapq.heappush(self._heap, (node.eval, -node.g, next(self._counter), node))

    def pop(self) -> SearchNode:
        return heapq.heappop(self._heap)[-1]

    def min_key(self) -> float:
        return self._heap[0][0]

    def __len__(self) -> int:
        return len(self._heap)


class VisitedTable:
    """Plain mode stores state keys. Safe mode stores, per state, the
    (log φ, log π) pair of the node with the largest π seen so far."""

    def __init__(self, safe: bool = False):
        self.safe = safe
        self._seen = set()
        self._pairs: Dict[bytes, Tuple[float, float]] = {}
        self.pruned = 0

    def check_and_add(self, key: bytes) -> bool:
        """Plain pruning: True if `key` was already visited."""
        if key in self._seen:
            self.pruned += 1
            return True
        self._seen.add(key)
        return False

    def check_and_update(self, key: bytes, log_phi: float, log_pi: float) -> bool:
        """Safe pruning: True iff φ_s ≤ φ(n) and π_s ≥ π(n); otherwise the
        stored pair is overwritten when π_s ≤ π(n)."""
        phi_s, pi_s = self._pairs.get(key, (math.inf, -math.inf))
        if phi_s <= log_phi and pi_s >= log_pi:
            self.pruned += 1
            return True
        if pi_s <= log_pi:
            self._pairs[key] = (log_phi, log_pi)
        return False

    def get(self, key: bytes) -> Optional[Tuple[float, float]]:
        return self._pairs.get(key)

    def __contains__(self, key: bytes) -> bool:
        return key in self._seen or key in self._pairs

    def __len__(self) -> int:
        return len(self._pairs) if self.safe else len(self._seen)


@dataclass
class SearchResult:
    status: SearchStatus
    solution_path: List[int] = field(default_factory=list)
    solution_length: int = 0
    expansions: int = 0
    generated: int = 0
    search_loss: float = 0.0
    elapsed: float = 0.0
    solution_node: Optional[SearchNode] = None
    # expanded nodes in order, when requested
    trace: Optional[List[SearchNode]] = None

    @property
    def solved(self) -> bool:
        return self.status == SearchStatus.SOLVED

    def detached(self) -> "SearchResult":
        """Copy without the node chain and trace; pickles at any solution depth."""
        return replace(self, solution_node=None, trace=None)

    def to_row(self, problem_id: str) -> dict:
        return {
            "id": problem_id,
            "solved": self.solved,
            "length": self.solution_length if self.solved else None,
            "expansions": self.expansions,
            "time_s": round(self.elapsed, 6),
        }


def child_log_conditionals(
    parent_log_probs: Optional[np.ndarray], transitions: Sequence[Transition]
) -> List[float]:
    """log π(child | parent) for each transition.

    A fixed prior on the transition wins. Otherwise the parent's policy is
    restricted to the generated actions and renormalized; with no policy
    the children are uniform.
    """
    if not transitions:
        return []
    values: List[Optional[float]] = [
        (math.log(t.prior) if t.prior > 0 else -math.inf) if t.prior is not None else None
        for t in transitions
    ]
    if all(v is not None for v in values):
        return values
    if parent_log_probs is None:
        uniform = -math.log(len(transitions))
        return [uniform if v is None else v for v in values]
    legal = np.array([parent_log_probs[t.action] for t in transitions], dtype=np.float64)
    normalizer = np.logaddexp.reduce(legal)
    if normalizer == -np.inf:
        renormalized = np.full(len(transitions), -math.log(len(transitions)))
    else:
        renormalized = legal - normalizer
    return [float(r) if v is None else v for r, v in zip(renormalized, values)]


def batch_evaluate(
    problem: Problem,
    pending: Sequence[SearchNode],
    evaluator: Evaluator,
    guide: Guide,
    cache: Optional[Dict[bytes, GuideOutput]] = None,
) -> List[float]:
    """Fill in guide outputs and the evaluator key of every pending node.

    Guide outputs for states already in `cache` are reused; the rest are
    computed in one call. Values do not depend on the batch composition.
    """
    if cache is None:
        outputs = guide.evaluate(problem, [n.state for n in pending])
    else:
        missing = {}
        for node in pending:
            if node.state_key not in cache and node.state_key not in missing:
                missing[node.state_key] = node.state
        if missing:
            fresh = guide.evaluate(problem, list(missing.values()))
            cache.update(zip(missing.keys(), fresh))
        outputs = [cache[n.state_key] for n in pending]
    values = []
    for node, out in zip(pending, outputs):
        node.log_probs, node.h, node.eta = out.log_probs, max(out.h, 0.0), out.eta
        ctx = node.context()
        node.eval = evaluator.key(ctx)
        node.eval_plus = max(ctx.parent_eval_plus, node.eval)
        values.append(node.eval)
    return values


def _make_root(problem: Problem) -> SearchNode:
    state = problem.initial_state()
    return SearchNode(
        state=state,
        state_key=problem.state_key(state),
        parent=None,
        action=-1,
        depth=0,
        g=problem.root_loss(),
        log_pi=0.0,
        loss=problem.root_loss(),
    )


def generate_children(problem: Problem, node: SearchNode) -> List[SearchNode]:
    transitions = problem.expand(node.state)
    log_conds = child_log_conditionals(node.log_probs, transitions)
    return [
        SearchNode(
            state=t.state,
            state_key=problem.state_key(t.state),
            parent=node,
            action=t.action,
            depth=node.depth + 1,
            g=node.g + t.loss,
            log_pi=node.log_pi + log_cond,
            loss=t.loss,
        )
        for t, log_cond in zip(transitions, log_conds)
    ]


def _best_first(
    problem: Problem,
    evaluator: Evaluator,
    budget: Optional[SearchBudget],
    batch_size: int,
    guide: Optional[Guide],
    pruning: Optional[str],
    record_trace: bool,
) -> SearchResult:
    if batch_size < 1:
        raise ConfigError(f"batch size must be at least 1, got {batch_size}")
    budget = budget or SearchBudget()
    guide = guide or ProblemGuide()
    cache: Optional[Dict[bytes, GuideOutput]] = {} if guide.cacheable else None
    start = time.perf_counter()

    root = _make_root(problem)
    batch_evaluate(problem, [root], evaluator, guide, cache)
    frontier = Frontier()
    frontier.push(root)
    visited = VisitedTable(safe=pruning == "safe")
    pending: List[SearchNode] = []
    pending_floor = math.inf
    trace: Optional[List[SearchNode]] = [] if record_trace else None
    expansions, generated, loss = 0, 1, 0.0
    status, solution = SearchStatus.FRONTIER_EMPTY, None

    while True:
        # children wait in `pending` until a full batch is collected, or until
        # one of them could be extracted before the frontier minimum
        if pending and (
            len(pending) >= batch_size or not frontier or pending_floor <= frontier.min_key()
        ):
            batch_evaluate(problem, pending, evaluator, guide, cache)
            for child in pending:
                frontier.push(child)
            pending, pending_floor = [], math.inf
        if not frontier:
            break
        node = frontier.pop()
        if pruning == "plain" and visited.check_and_add(node.state_key):
            continue
        if pruning == "safe" and visited.check_and_update(node.state_key, node.eval, node.log_pi):
            continue
        if not budget.allows(expansions, loss, node.loss, time.perf_counter() - start):
            status = SearchStatus.EXHAUSTED
            break
        expansions += 1
        loss += node.loss
        if trace is not None:
            trace.append(node)
        if problem.is_solution(node.state):
            status, solution = SearchStatus.SOLVED, node
            break
        children = generate_children(problem, node)
        generated += len(children)
        pending.extend(children)
        for child in children:
            pending_floor = min(pending_floor, evaluator.lower_key(child.context()))

    result = SearchResult(
        status=status,
        expansions=expansions,
        generated=generated,
        search_loss=loss,
        elapsed=time.perf_counter() - start,
        solution_node=solution,
        trace=trace,
    )
    if solution is not None:
        result.solution_path = solution.path()
        result.solution_length = solution.depth
    logger.debug(
        f"{evaluator} on {problem.problem_id!r}: {status.value}, "
        f"{expansions} expansions, {generated} generated, {visited.pruned} pruned"
    )
    return result


def bfs_search(
    problem: Problem,
    evaluator: Evaluator,
    budget: Optional[SearchBudget] = None,
    batch_size: int = 32,
    guide: Optional[Guide] = None,
    prune: bool = True,
    record_trace: bool = False,
) -> SearchResult:
    """Best-first search ordered by `evaluator`, solution test at
    extraction, no re-expansions. With `prune`, a node whose state was
    already extracted is skipped."""
    return _best_first(
        problem, evaluator, budget, batch_size, guide, "plain" if prune else None, record_trace
    )


def bfs_search_safe_pruning(
    problem: Problem,
    evaluator: Evaluator,
    budget: Optional[SearchBudget] = None,
    batch_size: int = 32,
    guide: Optional[Guide] = None,
    record_trace: bool = False,
) -> SearchResult:
    """Best-first search that prunes a node only when its state was seen
    with a φ no larger and a π no smaller. Needs a policy-based evaluator
    and a problem whose ℓ, π(·|·), η and solutions depend on the state
    alone."""
    if not evaluator.uses_policy:
        raise ConfigError(f"Evaluator {evaluator} exposes no (phi, pi) pair for safe pruning")
    return _best_first(problem, evaluator, budget, batch_size, guide, "safe", record_trace)


def is_valid_solution(problem: Problem, result: SearchResult) -> bool:
    if not result.solved:
        return False
    try:
        return problem.is_solution(replay(problem, result.solution_path))
    except ValueError:
        return False
