"""Exact checks of the search-loss bounds on explicit trees.

Every quantity is obtained by enumerating the whole tree with the same
arithmetic as the search engine (the evaluator key of each node, computed
from the same `EvalContext`), so a measured run and its bound are always
comparable. Policy-based keys are logarithms; comparisons happen in
log-space.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from domains.synth_tree import SynthTree, chain_tree
from search.core import SearchBudget, SearchResult, bfs_search, bfs_search_safe_pruning
from search.evaluators import PHS_H, EvalContext, Evaluator, log_phs_h, safe_exp, safe_log
from search.guides import ProblemGuide
from utils.exceptions import ConfigError, InadmissibleEtaError, NoSolutionError


EPSILON = 1e-9
# slack when collecting nodes of equal phi+
KEY_TOLERANCE = 1e-12

PASS, FAIL, PRECONDITION_FAILED = "pass", "fail", "precondition_failed"


@dataclass
class BoundReport:
    instance: str
    check: str
    measured: float
    bound: float
    # margin in the passing direction: bound − measured for upper bounds,
    # measured − bound for lower bounds
    slack: float
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def __bool__(self) -> bool:
        return self.passed

    def to_row(self) -> dict:
        return {
            "instance": self.instance,
            "check": self.check,
            "measured": self.measured,
            "bound": self.bound,
            "slack": self.slack,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class TreeValues:
    g: np.ndarray
    log_pi: np.ndarray
    depth: np.ndarray
    key: np.ndarray
    key_plus: np.ndarray
    eta: np.ndarray
    # log of the linear phi+ (equal to key_plus for log-space evaluators)
    log_phi_plus: np.ndarray


@dataclass
class LeafSetSummary:
    node: int
    phi_plus: float
    leaves: List[int]
    leaf_mass: float
    sigma: float
    j_plus: Dict[int, float] = field(default_factory=dict)
    h_plus: Dict[int, float] = field(default_factory=dict)


def _log_sum(values: Sequence[float]) -> float:
    if len(values) == 0:
        return -math.inf
    return float(np.logaddexp.reduce(np.asarray(values, dtype=np.float64)))


def _upper_report(instance: str, check: str, measured: float, log_bound: float, detail: str = "") -> BoundReport:
    bound = safe_exp(log_bound)
    ok = measured <= 0.0 or math.log(measured) <= log_bound + math.log1p(EPSILON)
    return BoundReport(instance, check, measured, bound, bound - measured, PASS if ok else FAIL, detail)


def _lower_report(instance: str, check: str, measured: float, bound: float, detail: str = "") -> BoundReport:
    ok = measured >= bound * (1.0 - EPSILON)
    return BoundReport(instance, check, measured, bound, measured - bound, PASS if ok else FAIL, detail)


def tree_values(tree: SynthTree, evaluator: Evaluator) -> TreeValues:
    n = len(tree)
    g, log_pi = np.zeros(n), np.zeros(n)
    depth = np.zeros(n, dtype=np.int64)
    key, key_plus, eta = np.zeros(n), np.zeros(n), np.ones(n)
    for node in tree.topological_order():
        parent = tree.parent[node]
        if parent < 0:
            g[node], log_pi[node], parent_plus = tree.root_loss(), 0.0, -math.inf
        else:
            g[node] = g[parent] + tree.loss[node]
            log_pi[node] = log_pi[parent] + safe_log(tree.cond[node])
            parent_plus = key_plus[parent]
        depth[node] = tree.depth[node]
        ctx = EvalContext(
            float(g[node]), int(depth[node]), float(log_pi[node]),
            max(tree.heuristic(node), 0.0), parent_plus, tree.eta(node),
        )
        key[node] = evaluator.key(ctx)
        key_plus[node] = max(parent_plus, key[node])
        eta[node] = evaluator.eta(ctx) if evaluator.uses_policy else 1.0
    if evaluator.log_space:
        log_phi_plus = key_plus.copy()
    else:
        with np.errstate(divide="ignore"):
            log_phi_plus = np.log(np.maximum(key_plus, 0.0))
    return TreeValues(g, log_pi, depth, key, key_plus, eta, log_phi_plus)


def oracle_min_phi_plus(tree: SynthTree, evaluator: Evaluator) -> Tuple[int, float]:
    """Solution node of minimal phi+ (ties to the lexicographically
    smallest action path) and its evaluator key."""
    solutions = tree.solutions
    if not solutions:
        raise NoSolutionError(f"tree {tree.problem_id!r} has no solution node")
    values = tree_values(tree, evaluator)
    best = min(solutions, key=lambda n: (values.key_plus[n], tree.path_actions(n)))
    return best, float(values.key_plus[best])


def leaf_set(tree: SynthTree, values: TreeValues, node: int) -> Tuple[List[int], np.ndarray]:
    """Leaves of N_φ(node), the nodes with phi+ no larger than node's."""
    threshold = values.key_plus[node]
    inside = values.key_plus <= threshold + KEY_TOLERANCE * max(1.0, abs(threshold))
    leaves = [
        n for n in range(len(tree))
        if inside[n] and not any(inside[c] for c in tree.children[n])
    ]
    return leaves, inside


def _log_leaf_terms(values: TreeValues, leaves: Sequence[int]) -> List[float]:
    """log(π(n)/ĵ⁺(n)) per leaf, with ĵ⁺(n) = φ⁺(n)π(n)/g(n), or η(n) when
    g(n) = 0."""
    terms = []
    for n in leaves:
        if values.g[n] > 0:
            terms.append(math.log(values.g[n]) - values.log_phi_plus[n])
        else:
            terms.append(values.log_pi[n] - safe_log(values.eta[n]))
    return terms


def leaf_set_summary(tree: SynthTree, evaluator: Evaluator, node: int) -> LeafSetSummary:
    values = tree_values(tree, evaluator)
    leaves, _ = leaf_set(tree, values, node)
    terms = _log_leaf_terms(values, leaves)
    j_plus = {}
    for n in leaves:
        if values.g[n] > 0:
            j_plus[n] = safe_exp(values.log_phi_plus[n] + values.log_pi[n] - math.log(values.g[n]))
        else:
            j_plus[n] = float(values.eta[n])
    h_plus = {}
    max_phi_h = {}
    for n in tree.topological_order():
        ctx = EvalContext(float(values.g[n]), int(values.depth[n]), float(values.log_pi[n]), tree.heuristic(n))
        parent = tree.parent[n]
        max_phi_h[n] = max(log_phs_h(ctx), max_phi_h[parent] if parent >= 0 else -math.inf)
    for n in leaves:
        h_plus[n] = safe_exp(values.log_pi[n] + max_phi_h[n]) - values.g[n]
    return LeafSetSummary(
        node=node,
        phi_plus=safe_exp(values.log_phi_plus[node]),
        leaves=leaves,
        leaf_mass=safe_exp(_log_sum([values.log_pi[n] for n in leaves])),
        sigma=safe_exp(_log_sum(terms)),
        j_plus=j_plus,
        h_plus=h_plus,
    )


def _solution_index(result: SearchResult) -> int:
    if not result.solved:
        raise NoSolutionError("the run did not return a solution")
    return int(result.solution_node.state)


def run_on_tree(
    tree: SynthTree,
    evaluator: Evaluator,
    safe_pruning: bool = False,
    budget: Optional[SearchBudget] = None,
    record_trace: bool = False,
) -> SearchResult:
    """Exact best-first order: batch size 1 and no pruning on plain trees."""
    if safe_pruning:
        return bfs_search_safe_pruning(
            tree, evaluator, budget, batch_size=1, guide=ProblemGuide(), record_trace=record_trace
        )
    return bfs_search(
        tree, evaluator, budget, batch_size=1, guide=ProblemGuide(), prune=False, record_trace=record_trace
    )


def check_theorem1(tree: SynthTree, result: SearchResult, evaluator: Evaluator) -> BoundReport:
    """L ≤ φ⁺(n*) · Σ_{n ∈ L_φ(n*)} π(n)/ĵ⁺(n)."""
    star = _solution_index(result)
    values = tree_values(tree, evaluator)
    if values.g[star] <= 0:
        log_bound = -math.inf
    else:
        leaves, _ = leaf_set(tree, values, star)
        log_bound = values.log_phi_plus[star] + _log_sum(_log_leaf_terms(values, leaves))
    return _upper_report(tree.problem_id, "theorem1", result.search_loss, float(log_bound))


def check_oracle(tree: SynthTree, result: SearchResult, evaluator: Evaluator) -> BoundReport:
    """The returned solution has minimal phi+."""
    star = _solution_index(result)
    _, best = oracle_min_phi_plus(tree, evaluator)
    found = float(tree_values(tree, evaluator).key_plus[star])
    ok = found <= best + KEY_TOLERANCE * max(1.0, abs(best))
    return BoundReport(tree.problem_id, "oracle_min_phi_plus", found, best, best - found, PASS if ok else FAIL)


def _require_unit_eta(tree: SynthTree, evaluator: Evaluator) -> None:
    if evaluator.kind == "phs" and any(e != 1.0 for e in tree.eta_values):
        raise ConfigError("the corollary needs eta = 1 on every node")
    if evaluator.kind == "levints" and any(l != 1.0 for l in tree.loss):
        raise ConfigError("LevinTS matches PHS with eta = 1 only for unit losses")
    if evaluator.kind not in ("phs", "levints"):
        raise ConfigError(f"Evaluator {evaluator} does not have eta = 1")


def check_corollary1(tree: SynthTree, result: SearchResult, evaluator: Evaluator) -> BoundReport:
    """L ≤ g(n*)/π(n*) when η ≡ 1."""
    _require_unit_eta(tree, evaluator)
    star = _solution_index(result)
    values = tree_values(tree, evaluator)
    log_bound = safe_log(values.g[star]) - values.log_pi[star]
    return _upper_report(tree.problem_id, "corollary1", result.search_loss, float(log_bound))


def phs_admissibility_violation(tree: SynthTree, evaluator: Evaluator) -> Optional[str]:
    """None if φ(n) ≤ φ(n*) for every node and descendant solution, with
    φ(n*) = g(n*)/π(n*) at solutions; else a description of a violation."""
    if not evaluator.uses_policy:
        raise ConfigError(f"Evaluator {evaluator} is not policy-based")
    values = tree_values(tree, evaluator)
    best_below = np.full(len(tree), math.inf)
    for n in reversed(tree.topological_order()):
        if tree.solution[n]:
            expected = safe_log(values.g[n]) - values.log_pi[n]
            if abs(values.eta[n] - 1.0) > EPSILON or abs(values.key[n] - expected) > EPSILON * max(1.0, abs(expected)):
                return f"solution node {n} has eta {values.eta[n]:g}"
            best_below[n] = values.key[n]
        for c in tree.children[n]:
            best_below[n] = min(best_below[n], best_below[c])
        if values.key[n] > best_below[n] + EPSILON * max(1.0, abs(best_below[n])):
            return f"node {n} has phi above a descendant solution"
    return None


def check_corollary2_3(
    tree: SynthTree, result: SearchResult, evaluator: Evaluator
) -> Tuple[BoundReport, Optional[BoundReport]]:
    """Refined bounds for a PHS-admissible η: L ≤ (g*/π*)·Σ, with Σ ≤ 1.
    The second report uses the h⁺ form and is only produced for the φ_h
    evaluator."""
    violation = phs_admissibility_violation(tree, evaluator)
    if violation is not None:
        raise InadmissibleEtaError(f"tree {tree.problem_id!r}: {violation}")
    star = _solution_index(result)
    values = tree_values(tree, evaluator)
    leaves, _ = leaf_set(tree, values, star)
    log_g_over_pi = safe_log(values.g[star]) - values.log_pi[star]
    log_sigma = _log_sum(_log_leaf_terms(values, leaves))
    cor2 = _upper_report(
        tree.problem_id, "corollary2", result.search_loss, float(log_g_over_pi + log_sigma)
    )
    if log_sigma > math.log1p(EPSILON):
        cor2.status = FAIL
        cor2.detail = f"sigma {safe_exp(log_sigma):g} exceeds 1"
    if evaluator.kind != PHS_H:
        return cor2, None
    summary = leaf_set_summary(tree, evaluator, star)
    terms = []
    for n in leaves:
        if values.g[n] > 0:
            terms.append(values.log_pi[n] - math.log1p(summary.h_plus[n] / values.g[n]))
        else:
            terms.append(values.log_pi[n] - safe_log(values.eta[n]))
    cor3 = _upper_report(
        tree.problem_id, "corollary3", result.search_loss, float(log_g_over_pi + _log_sum(terms))
    )
    return cor2, cor3


def is_astar_admissible(tree: SynthTree) -> bool:
    """h(n) ≤ min path loss from n to a descendant solution, for all n."""
    exact = [math.inf] * len(tree)
    for n in reversed(tree.topological_order()):
        if tree.solution[n]:
            exact[n] = 0.0
        for c in tree.children[n]:
            exact[n] = min(exact[n], tree.loss[c] + exact[c])
    return all(tree.h[n] <= exact[n] + EPSILON for n in range(len(tree)))


def check_admissibility_conversion(tree: SynthTree) -> bool:
    """Whether η_h from the tree's heuristic is PHS-admissible."""
    return phs_admissibility_violation(tree, Evaluator(PHS_H)) is None


def check_safe_pruning(tree: SynthTree, evaluator: Evaluator) -> BoundReport:
    """Safe pruning returns a solution of minimal phi+, as the unpruned
    search does, and the first bound still holds for the pruned run."""
    unpruned = run_on_tree(tree, evaluator)
    pruned = run_on_tree(tree, evaluator, safe_pruning=True)
    _, best = oracle_min_phi_plus(tree, evaluator)
    if not pruned.solved:
        return BoundReport(tree.problem_id, "safe_pruning", math.inf, best, -math.inf, FAIL, "pruned run found no solution")
    values = tree_values(tree, evaluator)
    found = float(values.key_plus[_solution_index(pruned)])
    reference = float(values.key_plus[_solution_index(unpruned)])
    tolerance = KEY_TOLERANCE * max(1.0, abs(best))
    bound = check_theorem1(tree, pruned, evaluator)
    ok = abs(found - best) <= tolerance and abs(reference - best) <= tolerance and bound.passed
    detail = f"{pruned.expansions} expansions pruned, {unpruned.expansions} unpruned"
    if not bound.passed:
        detail += "; bound violated"
    return BoundReport(tree.problem_id, "safe_pruning", found, best, best - found, PASS if ok else FAIL, detail)


def lower_bound_tree(branch_probs: Sequence[float], steps: int, seed: Optional[int] = None) -> SynthTree:
    """The chain tree a lower-bound run of `steps` expansions searches."""
    tree = chain_tree(branch_probs, steps + 2, loss=1.0, root_loss=0.0, seed=seed)
    tree.problem_id = f"{tree.problem_id}-T{steps}"
    return tree


def lower_bound_experiment(
    branch_probs: Sequence[float],
    evaluator: Evaluator,
    steps: int,
    seed: Optional[int] = None,
) -> BoundReport:
    """Adversarial chains: after `steps` expansions, a solution two levels
    below the best last-expanded chain node costs at least g(n̂)/π(n*).

    Solutions are tested at generation in this construction, so the
    grandchild of n̂ has not been tested yet when the run stops.
    """
    if abs(sum(branch_probs) - 1.0) > 1e-9:
        raise ConfigError(f"branch probabilities {list(branch_probs)} are not a proper policy")
    tree = lower_bound_tree(branch_probs, steps, seed)
    instance = tree.problem_id
    result = run_on_tree(tree, evaluator, budget=SearchBudget(max_expansions=steps), record_trace=True)
    branch_of = {}
    for i, head in enumerate(tree.children[0]):
        branch_of[head] = i
    last: Dict[int, int] = {}
    for node in result.trace:
        n = int(node.state)
        if n == 0:
            continue
        head = tree.ancestors(n)[1]
        last[branch_of[head]] = n
    positive = [i for i, p in enumerate(branch_probs) if p > 0]
    if any(i not in last for i in positive):
        return _lower_report(instance, f"lower_bound:{evaluator}", result.search_loss, 0.0, "a branch was never expanded")
    ratios = {i: tree.path_loss(last[i]) / branch_probs[i] for i in positive}
    best = min(positive, key=lambda i: (ratios[i], i))
    # π(n*) = π(n̂*): chain conditionals are 1
    bound = ratios[best]
    return _lower_report(instance, f"lower_bound:{evaluator}", result.search_loss, bound)
