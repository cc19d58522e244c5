import math

import pytest
from hypothesis import given, settings, strategies as st

from domains.sliding_tile import generate_stp_walks, stp_distance_table
from domains.synth_tree import SynthTree, SynthTreeSpec, build_synth_tree, chain_tree, example_one_tree, unroll_problem
from search.evaluators import ASTAR, LEVINTS, PHS, PHS_H, PHS_STAR, Evaluator, parse_evaluator
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
    oracle_min_phi_plus,
    phs_admissibility_violation,
    run_on_tree,
)
from theory.suite import LOWER_BOUND_SOLVERS, SUITES, run_suite
from utils.exceptions import ConfigError, InadmissibleEtaError, NoSolutionError

random_trees = st.builds(
    lambda depth, eta, seed: build_synth_tree(
        SynthTreeSpec(depth=depth, loss_range=(0.0, 2.0), eta=eta, eta_range=(1.0, 4.0)), seed
    ),
    depth=st.integers(2, 6),
    eta=st.sampled_from(["ones", "random"]),
    seed=st.integers(0, 100_000),
)


@settings(max_examples=40, deadline=None)
@given(tree=random_trees)
def test_first_bound_holds_and_phi_plus_is_minimal(tree):
    evaluator = Evaluator(PHS)
    result = run_on_tree(tree, evaluator)
    assert result.solved
    assert check_theorem1(tree, result, evaluator)
    assert check_oracle(tree, result, evaluator)


@settings(max_examples=30, deadline=None)
@given(tree=random_trees, data=st.data())
def test_leaf_mass_is_at_most_one(tree, data):
    node = data.draw(st.integers(0, len(tree) - 1))
    assert leaf_set_summary(tree, Evaluator(PHS), node).leaf_mass <= 1.0 + 1e-9


@settings(max_examples=30, deadline=None)
@given(depth=st.integers(2, 6), seed=st.integers(0, 100_000))
def test_levints_is_phs_with_unit_eta(depth, seed):
    spec = SynthTreeSpec(depth=depth, loss_range=(1.0, 1.0), root_loss=1.0, eta="ones")
    tree = build_synth_tree(spec, seed)
    levin = Evaluator(LEVINTS)
    phs = Evaluator(PHS)
    levin_run = run_on_tree(tree, levin, record_trace=True)
    phs_run = run_on_tree(tree, phs, record_trace=True)
    assert [n.state for n in levin_run.trace] == [n.state for n in phs_run.trace]
    assert check_corollary1(tree, levin_run, levin)
    assert check_corollary1(tree, phs_run, phs)


@pytest.mark.parametrize("depth", [1, 4, 8])
def test_single_path_eta_expands_only_the_path(depth):
    tree = example_one_tree(depth, seed=depth)
    run = run_on_tree(tree, Evaluator(PHS))
    assert run.expansions == depth + 1
    report = check_theorem1(tree, run, Evaluator(PHS))
    assert report and report.bound == pytest.approx(depth + 1)
    levin_run = run_on_tree(tree, Evaluator(LEVINTS))
    bound = check_corollary1(tree, levin_run, Evaluator(LEVINTS)).bound
    assert bound == pytest.approx((depth + 1) * 2**depth)


def test_corollary1_needs_unit_eta():
    tree = example_one_tree(3, seed=0)
    run = run_on_tree(tree, Evaluator(PHS_STAR))
    with pytest.raises(ConfigError):
        check_corollary1(tree, run, Evaluator(PHS_STAR))
    with pytest.raises(ConfigError):
        check_corollary1(tree, run, Evaluator(PHS))


@settings(max_examples=30, deadline=None)
@given(depth=st.integers(2, 6), seed=st.integers(0, 100_000))
def test_refined_bound_with_admissible_eta(depth, seed):
    spec = SynthTreeSpec(depth=depth, loss_range=(0.1, 2.0), eta="admissible")
    tree = build_synth_tree(spec, seed)
    evaluator = Evaluator(PHS)
    assert phs_admissibility_violation(tree, evaluator) is None
    result = run_on_tree(tree, evaluator)
    cor2, cor3 = check_corollary2_3(tree, result, evaluator)
    assert cor2 and cor3 is None
    assert cor2.measured <= cor2.bound * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(depth=st.integers(2, 6), seed=st.integers(0, 100_000))
def test_heuristic_bound_with_exact_distances(depth, seed):
    spec = SynthTreeSpec(depth=depth, loss_range=(0.1, 2.0), heuristic="exact")
    tree = build_synth_tree(spec, seed)
    assert is_astar_admissible(tree)
    evaluator = Evaluator(PHS_H)
    result = run_on_tree(tree, evaluator)
    cor2, cor3 = check_corollary2_3(tree, result, evaluator)
    assert cor2 and cor3


def test_inflated_eta_is_rejected():
    tree = SynthTree.from_children([[1], [2], []], eta=[1.0, 50.0, 1.0], solutions=[2])
    result = run_on_tree(tree, Evaluator(PHS))
    assert phs_admissibility_violation(tree, Evaluator(PHS)) == "node 1 has phi above a descendant solution"
    with pytest.raises(InadmissibleEtaError):
        check_corollary2_3(tree, result, Evaluator(PHS))


def test_solution_with_eta_above_one_is_inadmissible():
    tree = SynthTree.from_children([[1], []], eta=[1.0, 2.0], solutions=[1])
    assert "solution node 1" in phs_admissibility_violation(tree, Evaluator(PHS))
    with pytest.raises(ConfigError):
        phs_admissibility_violation(tree, Evaluator(ASTAR))


@pytest.mark.parametrize("solver", LOWER_BOUND_SOLVERS)
@pytest.mark.parametrize("probs", [[1.0], [0.5, 0.5], [0.6, 0.3, 0.1], [0.4, 0.3, 0.2, 0.1]])
def test_lower_bound_on_adversarial_chains(solver, probs):
    for steps in (len(probs), 7, 20):
        report = lower_bound_experiment(probs, parse_evaluator(solver), steps, seed=steps)
        assert report, report.to_row()
        # the root costs nothing
        assert report.measured == steps - 1


def test_lower_bound_needs_a_proper_policy():
    with pytest.raises(ConfigError):
        lower_bound_experiment([0.5, 0.4], Evaluator(LEVINTS), 5)


def test_lower_bound_is_tight_for_levints():
    # uniform branches are expanded round-robin
    report = lower_bound_experiment([0.5, 0.5], Evaluator(LEVINTS), 9)
    assert report.bound == pytest.approx(8.0)
    assert report.slack == pytest.approx(0.0)


def test_exact_distances_convert_to_admissible_eta():
    table = stp_distance_table(3)
    for problem in generate_stp_walks(2, 3, seed=1, min_length=3, max_length=5):
        tree = unroll_problem(problem, 8, heuristic=lambda tiles: float(table[tiles]))
        assert tree.solutions
        assert is_astar_admissible(tree)
        assert check_admissibility_conversion(tree)


def test_inflated_heuristic_is_caught():
    tree = SynthTree.from_children([[1], [2], []], solutions=[2])
    tree.set_exact_heuristic(2.0)
    assert not is_astar_admissible(tree)
    assert not check_admissibility_conversion(tree)


@pytest.mark.parametrize("seed", range(15))
def test_safe_pruning_keeps_the_best_solution(seed):
    spec = SynthTreeSpec(depth=5, loss_range=(0.0, 2.0), eta="random", num_states=3, solution_rate=0.15)
    tree = build_synth_tree(spec, seed)
    report = check_safe_pruning(tree, Evaluator(PHS))
    assert report, report.to_row()


def test_no_solution():
    tree = chain_tree([0.5, 0.5], 3)
    with pytest.raises(NoSolutionError):
        oracle_min_phi_plus(tree, Evaluator(PHS))
    result = run_on_tree(tree, Evaluator(PHS))
    with pytest.raises(NoSolutionError):
        check_theorem1(tree, result, Evaluator(PHS))


def test_bound_report():
    report = BoundReport("t", "theorem1", 3.0, 5.0, 2.0, PASS)
    assert report and report.passed
    assert report.to_row() == {"instance": "t", "check": "theorem1", "measured": 3.0, "bound": 5.0,
                               "slack": 2.0, "status": PASS, "detail": ""}
    assert not BoundReport("t", "theorem1", 6.0, 5.0, -1.0, FAIL)
    assert not BoundReport("t", "corollary2", 1.0, math.nan, math.nan, PRECONDITION_FAILED)


@pytest.mark.parametrize("name", ["example1", "corollary1", "lower_bound", "safe_pruning"])
def test_quick_suites_pass(name):
    outcome = run_suite(seed=3, quick=True, only=[name])
    assert outcome.reports
    assert outcome.failures == []


def test_unknown_suite():
    with pytest.raises(ConfigError, match="theorem2"):
        run_suite(quick=True, only=["theorem2"])


def test_injected_inadmissible_tree_is_a_precondition_failure():
    outcome = run_suite(seed=0, quick=True, only=["example1"], inject_inadmissible=True)
    statuses = [r.status for r in outcome.reports]
    assert PRECONDITION_FAILED in statuses
    assert outcome.failures == []
    assert outcome.failing_trees() == []


@pytest.mark.slow
def test_full_quick_suite():
    outcome = run_suite(seed=0, quick=True)
    assert {r.check for r in outcome.reports} >= {"theorem1", "corollary1", "corollary2", "corollary3",
                                                  "astar_optimal", "safe_pruning"}
    assert outcome.failures == []
    assert set(SUITES) == {"theorem1", "corollary1", "example1", "corollary2", "lower_bound",
                           "admissibility", "safe_pruning"}


def test_every_tree_instance_is_kept_for_replay():
    outcome = run_suite(seed=3, quick=True, only=["example1", "lower_bound"])
    assert {r.instance for r in outcome.reports} <= set(outcome.trees)
    chain = outcome.trees[outcome.reports[-1].instance]
    assert chain.spec is None and not chain.solutions
