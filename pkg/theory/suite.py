"""Randomized certification suite run by `verify`.

Every instance is seeded from the suite seed, so a failing row can be
rebuilt from its id. Failing trees are also kept so that `verify` can
write them as a synth problem file.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from domains.sliding_tile import generate_stp_random, generate_stp_walks, stp_distance_table
from domains.synth_tree import SynthTree, SynthTreeSpec, build_synth_tree, example_one_tree, unroll_problem
from search.core import bfs_search
from search.evaluators import ASTAR, GBFS, LEVINTS, PHS, PHS_H, PHS_STAR, Evaluator, parse_evaluator
from search.guides import HeuristicGuide
from theory.lab import (
    FAIL,
    PASS,
    PRECONDITION_FAILED,
    BoundReport,
    check_admissibility_conversion,
    check_corollary1,
    check_corollary2_3,
    check_oracle,
    check_safe_pruning,
    check_theorem1,
    is_astar_admissible,
    leaf_set_summary,
    lower_bound_experiment,
    lower_bound_tree,
    run_on_tree,
)
from utils.exceptions import ConfigError, InadmissibleEtaError
from utils.model_utils import progress_bar

logger = logging.getLogger(__name__)

LOWER_BOUND_SOLVERS = (ASTAR, "wastar:1.5", GBFS, LEVINTS, PHS_H, PHS_STAR)
BRANCH_COUNTS = (1, 2, 4, 8)


@dataclass(frozen=True)
class SuiteSizes:
    theorem1: int
    corollary1: int
    example_depths: int
    corollary2: int
    lower_bound_seeds: int
    unrolled: int
    astar_instances: int
    safe_pruning: int


SUITE_SIZES = {
    "full": SuiteSizes(1000, 1000, 12, 500, 50, 20, 200, 200),
    "quick": SuiteSizes(40, 40, 8, 20, 5, 3, 20, 20),
}


@dataclass
class SuiteOutcome:
    reports: List[BoundReport] = field(default_factory=list)
    trees: Dict[str, SynthTree] = field(default_factory=dict)

    @property
    def failures(self) -> List[BoundReport]:
        return [r for r in self.reports if r.status == FAIL]

    def failing_trees(self) -> List[SynthTree]:
        """Failing instances that can be written back as a synth file."""
        ids = {r.instance for r in self.failures}
        return [tree for name, tree in self.trees.items() if name in ids]

    def add(self, report: BoundReport, tree: Optional[SynthTree] = None) -> None:
        self.reports.append(report)
        if tree is not None:
            self.trees[report.instance] = tree


def _random_spec(rng: np.random.Generator, **overrides) -> SynthTreeSpec:
    fields = dict(
        depth=int(rng.integers(3, 8)),
        branching=(1, 3),
        loss_range=(0.0, 2.0),
        eta="random",
        eta_range=(1.0, 4.0),
        solution_rate=0.1,
        max_nodes=10_000,
    )
    fields.update(overrides)
    return SynthTreeSpec(**fields)


def _leaf_mass_report(tree: SynthTree, evaluator: Evaluator, node: int) -> BoundReport:
    mass = leaf_set_summary(tree, evaluator, node).leaf_mass
    ok = mass <= 1.0 + 1e-9
    return BoundReport(tree.problem_id, "leaf_mass", mass, 1.0, 1.0 - mass, PASS if ok else FAIL)


def theorem1_suite(outcome: SuiteOutcome, seed: int, count: int, show_progress: bool = False) -> None:
    rng = np.random.default_rng(seed)
    evaluator = Evaluator(PHS)
    for i in progress_bar(range(count), "Loss bound", disable=not show_progress):
        tree = build_synth_tree(_random_spec(rng), seed * 100_003 + i, f"thm1-{seed}-{i}")
        result = run_on_tree(tree, evaluator)
        outcome.add(check_theorem1(tree, result, evaluator), tree)
        outcome.add(check_oracle(tree, result, evaluator), tree)
        outcome.add(_leaf_mass_report(tree, evaluator, int(result.solution_node.state)), tree)


def corollary1_suite(outcome: SuiteOutcome, seed: int, count: int, show_progress: bool = False) -> None:
    """Unit losses and η ≡ 1: PHS and LevinTS expand the same nodes in the
    same order, and both stay under d0(n*)/π(n*)."""
    rng = np.random.default_rng(seed + 1)
    phs, levin = Evaluator(PHS), Evaluator(LEVINTS)
    for i in progress_bar(range(count), "Unit eta", disable=not show_progress):
        spec = _random_spec(rng, loss_range=(1.0, 1.0), root_loss=1.0, eta="ones")
        tree = build_synth_tree(spec, seed * 100_019 + i, f"cor1-{seed}-{i}")
        levin_run = run_on_tree(tree, levin, record_trace=True)
        phs_run = run_on_tree(tree, phs, record_trace=True)
        outcome.add(check_corollary1(tree, levin_run, levin), tree)
        outcome.add(check_corollary1(tree, phs_run, phs), tree)
        levin_order = [n.state for n in levin_run.trace]
        phs_order = [n.state for n in phs_run.trace]
        mismatches = sum(a != b for a, b in zip(levin_order, phs_order)) + abs(len(levin_order) - len(phs_order))
        outcome.add(
            BoundReport(
                tree.problem_id, "levints_equivalence", float(mismatches), 0.0, -float(mismatches),
                PASS if mismatches == 0 else FAIL,
            ),
            tree,
        )


def example_one_suite(outcome: SuiteOutcome, seed: int, max_depth: int) -> None:
    """Uniform binary trees with a single solution at depth d: PHS with η
    infinite off the solution path expands exactly d+1 nodes, and the
    η ≡ 1 bound is (d+1)·2^d."""
    phs, levin = Evaluator(PHS), Evaluator(LEVINTS)
    for d in range(1, max_depth + 1):
        tree = example_one_tree(d, seed + d)
        run = run_on_tree(tree, phs)
        outcome.add(check_theorem1(tree, run, phs), tree)
        outcome.add(
            BoundReport(
                tree.problem_id, "example1_expansions", float(run.expansions), float(d + 1),
                float(d + 1 - run.expansions), PASS if run.expansions == d + 1 else FAIL,
            ),
            tree,
        )
        levin_run = run_on_tree(tree, levin)
        report = check_corollary1(tree, levin_run, levin)
        outcome.add(report, tree)
        closed_form = float((d + 1) * 2**d)
        ok = math.isclose(report.bound, closed_form, rel_tol=1e-9)
        outcome.add(
            BoundReport(
                tree.problem_id, "corollary1_closed_form", report.bound, closed_form,
                closed_form - report.bound, PASS if ok else FAIL,
            ),
            tree,
        )


def _corollary2_reports(outcome: SuiteOutcome, tree: SynthTree, evaluator: Evaluator) -> None:
    run = run_on_tree(tree, evaluator)
    try:
        cor2, cor3 = check_corollary2_3(tree, run, evaluator)
    except InadmissibleEtaError as e:
        outcome.add(BoundReport(tree.problem_id, "corollary2", run.search_loss, math.nan, math.nan,
                                PRECONDITION_FAILED, str(e)), tree)
        return
    outcome.add(cor2, tree)
    if cor3 is not None:
        outcome.add(cor3, tree)


def corollary2_suite(
    outcome: SuiteOutcome, seed: int, count: int, inject_inadmissible: bool = False, show_progress: bool = False
) -> None:
    """Admissible η from the tree for PHS, and η_h from an exact heuristic
    for PHS-h."""
    rng = np.random.default_rng(seed + 2)
    for i in progress_bar(range(count), "Admissible eta", disable=not show_progress):
        spec = _random_spec(rng, eta="admissible", loss_range=(0.1, 2.0))
        _corollary2_reports(outcome, build_synth_tree(spec, seed * 100_043 + i, f"cor2-{seed}-{i}"), Evaluator(PHS))
        spec = _random_spec(rng, eta="ones", heuristic="exact", loss_range=(0.1, 2.0))
        _corollary2_reports(outcome, build_synth_tree(spec, seed * 100_049 + i, f"cor3-{seed}-{i}"), Evaluator(PHS_H))
    if inject_inadmissible:
        spec = _random_spec(rng, eta="random", eta_range=(50.0, 100.0), solution_rate=0.3)
        _corollary2_reports(outcome, build_synth_tree(spec, seed, f"inadmissible-{seed}"), Evaluator(PHS))


def lower_bound_suite(outcome: SuiteOutcome, seed: int, seeds: int, show_progress: bool = False) -> None:
    rng = np.random.default_rng(seed + 3)
    runs = [(m, s) for m in BRANCH_COUNTS for s in range(seeds)]
    for m, s in progress_bar(runs, "Lower bound", disable=not show_progress):
        probs = rng.dirichlet(np.ones(m))
        probs = probs / probs.sum()
        steps = int(rng.integers(m, 4 * m + 11))
        tree = lower_bound_tree(list(probs), steps, seed * 1_000 + s)
        for name in LOWER_BOUND_SOLVERS:
            outcome.add(lower_bound_experiment(list(probs), parse_evaluator(name), steps, seed * 1_000 + s), tree)


def _negative_control() -> SynthTree:
    tree = SynthTree.from_children([[1], [2], []], solutions=[2], problem_id="inflated-chain")
    tree.set_exact_heuristic(2.0)
    return tree


def admissibility_suite(
    outcome: SuiteOutcome, seed: int, unrolled: int, astar_instances: int, show_progress: bool = False
) -> None:
    """Exact distances on the 3×3 sliding-tile puzzle: η_h is PHS-admissible
    on truncated search trees, and A* with the same h is optimal."""
    table = stp_distance_table(3)

    def distance(tiles) -> float:
        return float(table[tiles])

    for problem in progress_bar(
        generate_stp_walks(unrolled, 3, seed, min_length=6, max_length=14), "Admissibility", disable=not show_progress
    ):
        tree = unroll_problem(problem, 14, heuristic=distance)
        tree.problem_id = f"stp-unrolled-{seed}-{problem.problem_id}"
        admissible = is_astar_admissible(tree)
        converted = check_admissibility_conversion(tree)
        status = PASS if admissible and converted else FAIL
        outcome.add(BoundReport(tree.problem_id, "admissibility_conversion", float(converted), 1.0,
                                float(converted) - 1.0, status, f"{len(tree)} nodes"), tree)

    control = _negative_control()
    detected = not check_admissibility_conversion(control) and not is_astar_admissible(control)
    outcome.add(BoundReport(control.problem_id, "admissibility_negative_control", float(detected), 1.0,
                            float(detected) - 1.0, PASS if detected else FAIL), control)

    guide = HeuristicGuide(distance)
    for problem in generate_stp_random(astar_instances, 3, seed):
        result = bfs_search(problem, Evaluator(ASTAR), batch_size=1, guide=guide)
        optimal = table[problem.tiles]
        ok = result.solved and result.solution_length == optimal
        outcome.add(BoundReport(f"stp-{seed}-{problem.problem_id}", "astar_optimal", float(result.solution_length),
                                float(optimal), float(optimal - result.solution_length), PASS if ok else FAIL))


def safe_pruning_suite(outcome: SuiteOutcome, seed: int, count: int, show_progress: bool = False) -> None:
    rng = np.random.default_rng(seed + 4)
    evaluator = Evaluator(PHS)
    for i in progress_bar(range(count), "Safe pruning", disable=not show_progress):
        spec = _random_spec(rng, depth=int(rng.integers(3, 7)), num_states=int(rng.integers(2, 5)), solution_rate=0.15)
        tree = build_synth_tree(spec, seed * 100_057 + i, f"aliased-{seed}-{i}")
        outcome.add(check_safe_pruning(tree, evaluator), tree)


SUITES: Dict[str, Callable] = {
    "theorem1": lambda o, seed, sizes, progress: theorem1_suite(o, seed, sizes.theorem1, progress),
    "corollary1": lambda o, seed, sizes, progress: corollary1_suite(o, seed, sizes.corollary1, progress),
    "example1": lambda o, seed, sizes, progress: example_one_suite(o, seed, sizes.example_depths),
    "corollary2": lambda o, seed, sizes, progress: corollary2_suite(o, seed, sizes.corollary2, show_progress=progress),
    "lower_bound": lambda o, seed, sizes, progress: lower_bound_suite(o, seed, sizes.lower_bound_seeds, progress),
    "admissibility": lambda o, seed, sizes, progress: admissibility_suite(
        o, seed, sizes.unrolled, sizes.astar_instances, progress
    ),
    "safe_pruning": lambda o, seed, sizes, progress: safe_pruning_suite(o, seed, sizes.safe_pruning, progress),
}


def run_suite(
    seed: int = 0,
    quick: bool = False,
    only: Optional[List[str]] = None,
    inject_inadmissible: bool = False,
    show_progress: bool = False,
) -> SuiteOutcome:
    sizes = SUITE_SIZES["quick" if quick else "full"]
    outcome = SuiteOutcome()
    for name in only or list(SUITES):
        if name not in SUITES:
            raise ConfigError(f"Suite {name} not available. Choose from {list(SUITES)}")
        before = len(outcome.reports)
        SUITES[name](outcome, seed, sizes, show_progress)
        added = outcome.reports[before:]
        failed = sum(r.status == FAIL for r in added)
        logger.info(f"{name}: {len(added)} checks, {failed} failed")
    if inject_inadmissible:
        corollary2_suite(outcome, seed, 0, inject_inadmissible=True)
    return outcome
