import argparse
import math
import pickle

import numpy as np
import pytest
import torch

import training.bootstrap as bootstrap
from domains.sliding_tile import generate_stp_walks
from domains.synth_tree import SynthTree, SynthTreeSpec, build_synth_tree
from models.network import PolicyHeuristicNet
from search.configurations import parse_solver
from search.core import SearchResult, SearchStatus
from training.bootstrap import (
    BootstrapConfig,
    IterationLog,
    TrainRun,
    make_sample,
    select_best_model,
    solve_all,
    summarize,
    update_pass,
)
from utils.exceptions import ConfigError


def stp_problems(num, seed=0):
    return generate_stp_walks(num, 3, seed, min_length=5, max_length=30)


def stp_net(losses=("levin", "mse")):
    return PolicyHeuristicNet((3, 3, 9), architecture="dense", losses=losses)


class ScriptedAttempts:
    """Problem i is solved iff the budget reaches thresholds[i]."""

    def __init__(self, thresholds):
        self.thresholds = thresholds
        self.calls = []

    def __call__(self, problem, solver, budget, model, config):
        i = int(problem.problem_id)
        self.calls.append((i, budget))
        solved = budget >= self.thresholds[i]
        status = SearchStatus.SOLVED if solved else SearchStatus.EXHAUSTED
        return SearchResult(status, expansions=min(budget, self.thresholds[i]), elapsed=0.01)


@pytest.fixture
def scripted(monkeypatch):
    def install(thresholds):
        attempts = ScriptedAttempts(thresholds)
        monkeypatch.setattr(bootstrap, "attempt", attempts)
        monkeypatch.setattr(bootstrap, "make_sample", lambda problem, result: problem.problem_id)
        return attempts

    return install


def test_train_doubles_only_after_an_iteration_without_new_solutions(scripted, monkeypatch):
    attempts = scripted([100, 100, 400, 1600])
    updates = []
    monkeypatch.setattr(bootstrap, "update_pass", lambda model, opt, samples, steps=1: updates.append(list(samples)))
    config = BootstrapConfig(initial_budget=100, batch_problems=2, max_iterations=6)
    _, logs = bootstrap.train(stp_problems(4), parse_solver("phs-star"), stp_net(), config)
    assert [log.budget for log in logs] == [100, 100, 200, 400, 400, 800]
    assert [log.new_solved for log in logs] == [2, 0, 0, 1, 0, 0]
    assert [log.total_solved for log in logs] == [2, 2, 2, 3, 3, 3]
    # every iteration sweeps all problems in file order
    assert [i for i, _ in attempts.calls[:8]] == [0, 1, 2, 3] * 2
    # one update pass per batch of two attempts, on that batch's solutions
    assert len(updates) == 12
    assert updates[0] == ["0", "1"] and updates[1] == []
    assert updates[6] == ["0", "1"] and updates[7] == ["2"]
    assert logs[0].cum_expansions == 100 + 100 + 100 + 100


def test_test_doubles_every_iteration_and_skips_solved_problems(scripted):
    attempts = scripted([2000, 9000, 4000])
    config = BootstrapConfig(initial_budget=2000, batch_problems=32, max_iterations=3)
    rows, logs = bootstrap.test(stp_problems(3), parse_solver("levints"), None, config)
    assert [log.budget for log in logs] == [2000, 4000, 8000]
    assert [log.new_solved for log in logs] == [1, 1, 0]
    assert attempts.calls == [(0, 2000), (1, 2000), (2, 2000), (1, 4000), (2, 4000), (1, 8000)]
    assert rows[0]["solved"] and rows[0]["iteration"] == 1 and rows[0]["budget"] == 2000
    assert rows[2]["iteration"] == 2 and rows[2]["budget"] == 4000
    assert not rows[1]["solved"] and rows[1]["expansions"] is None


def test_test_stops_when_everything_is_solved(scripted):
    scripted([10, 10])
    config = BootstrapConfig(initial_budget=10, max_iterations=50)
    rows, logs = bootstrap.test(stp_problems(2), parse_solver("levints"), None, config)
    assert len(logs) == 1
    assert all(row["solved"] for row in rows)


def test_spent_wall_time_runs_no_iteration(scripted):
    attempts = scripted([1])
    config = BootstrapConfig(initial_budget=10, wall_time_budget=0.0)
    _, logs = bootstrap.train(stp_problems(1), parse_solver("phs-star"), stp_net(), config)
    assert logs == [] and attempts.calls == []


def test_config_validation():
    with pytest.raises(ConfigError, match="wall-time budget or a maximum"):
        BootstrapConfig().validate()
    for bad in (dict(initial_budget=0), dict(batch_problems=0), dict(workers=0), dict(update_steps=0)):
        with pytest.raises(ConfigError):
            BootstrapConfig(max_iterations=1, **bad).validate()
    with pytest.raises(ConfigError):
        bootstrap.train([], parse_solver("phs-star"), stp_net(), BootstrapConfig(max_iterations=1))


def test_config_from_namespace():
    args = argparse.Namespace(budget=None, batch_problems=8, time_budget=60.0, workers=2, seed=3,
                              batch_size=16, time_limit=None, puct_backup="min", safe_pruning=True)
    config = BootstrapConfig.from_namespace(args, 7000, max_iterations=1)
    assert config.initial_budget == 7000
    assert config.search_batch_size == 16
    assert config.wall_time_budget == 60.0
    assert config.update_steps == 1
    assert config.max_iterations == 1
    args.budget = 512
    assert BootstrapConfig.from_namespace(args, 7000).initial_budget == 512


def test_time_limit_replaces_the_expansion_budget():
    config = BootstrapConfig(time_limit_per_problem=1.5)
    budget = bootstrap.search_budget(2000, config)
    assert budget.max_seconds == 1.5 and budget.max_expansions is None
    assert bootstrap.search_budget(2000, BootstrapConfig()).max_expansions == 2000


def test_make_sample_follows_the_solution_path():
    (problem,) = stp_problems(1, seed=4)
    result = parse_solver("levints").search(problem, batch_size=1)
    sample = make_sample(problem, result)
    assert sample.length == result.solution_length
    assert sample.features.shape == (sample.length + 1, 3, 3, 9)
    assert sample.masks.shape == (sample.length + 1, 4)
    assert all(sample.masks[t, a] for t, a in enumerate(sample.actions))


def test_update_pass():
    torch.manual_seed(0)
    net = stp_net()
    optimizer = net.configure_optimizers()
    assert update_pass(net, optimizer, []) is None
    problems = stp_problems(3, seed=1)
    samples = [make_sample(p, parse_solver("levints").search(p)) for p in problems]
    before = [p.detach().clone() for p in net.parameters()]
    loss = update_pass(net, optimizer, samples, steps=2)
    assert isinstance(loss, float) and math.isfinite(loss)
    assert any(not torch.equal(a, b) for a, b in zip(before, net.parameters()))
    assert not net.training


def test_solve_all_keeps_input_order():
    trees = [build_synth_tree(SynthTreeSpec(depth=4), seed, f"t{seed}") for seed in range(4)]
    config = BootstrapConfig(initial_budget=10_000, max_iterations=1)
    results = solve_all(trees, parse_solver("phs"), None, config)
    assert [r.solved for r in results] == [True] * 4
    assert [r.solution_node.state for r in results] == [
        parse_solver("phs").search(t).solution_node.state for t in trees
    ]


def test_parallel_attempts_match_serial_ones():
    trees = [build_synth_tree(SynthTreeSpec(depth=4), seed, f"t{seed}") for seed in range(4)]
    serial = solve_all(trees, parse_solver("levints"), None, BootstrapConfig(initial_budget=500, max_iterations=1))
    parallel = solve_all(
        trees, parse_solver("levints"), None, BootstrapConfig(initial_budget=500, max_iterations=1, workers=2)
    )
    assert [(r.status, r.expansions) for r in serial] == [(r.status, r.expansions) for r in parallel]


def test_summarize_averages_solved_problems_only():
    rows = [
        {"id": "0", "solved": True, "length": 10, "expansions": 100, "time_s": 1.0, "iteration": 1, "budget": 8},
        {"id": "1", "solved": True, "length": 20, "expansions": 300, "time_s": 3.0, "iteration": 2, "budget": 16},
        {"id": "2", "solved": False, "length": None, "expansions": None, "time_s": None, "iteration": None, "budget": None},
    ]
    summary = summarize(rows, "phs-star")
    assert summary == {"solver": "phs-star", "solved": 2, "mean_length": 15.0,
                       "mean_expansions": 200.0, "mean_time_s": 2.0}
    assert math.isnan(summarize(rows[2:], "phs-star")["mean_length"])


def test_select_best_model():
    def run(solved):
        return TrainRun(model=None, logs=[IterationLog(1, 8, solved, solved, 0, 0.0)])

    assert select_best_model([run(3), run(5), run(5)])[0] == 1
    assert select_best_model([run(0)])[0] == 0
    with pytest.raises(ConfigError):
        select_best_model([])


def solved_at(problems, model, budget):
    config = BootstrapConfig(initial_budget=budget, max_iterations=1)
    return sum(r.solved for r in solve_all(problems, parse_solver("phs-star"), model, config))


@pytest.mark.slow
def test_learning_improves_the_search():
    problems = stp_problems(200, seed=0)
    improved = 0
    for seed in range(5):
        torch.manual_seed(seed)
        np.random.seed(seed)
        net = stp_net()
        before = solved_at(problems, net, 512)
        config = BootstrapConfig(initial_budget=512, wall_time_budget=600.0, max_iterations=4, seed=seed)
        net, _ = bootstrap.train(problems, parse_solver("phs-star"), net, config)
        improved += solved_at(problems, net, 512) > before
    assert improved >= 4


def long_chain(depth):
    return SynthTree.from_children([[i + 1] for i in range(depth)] + [[]], solutions=[depth])


def test_worker_results_pickle_at_any_solution_depth():
    tree = long_chain(1500)
    config = BootstrapConfig(initial_budget=5000, max_iterations=1)
    result = bootstrap._attempt_in_worker((tree, parse_solver("levints"), 5000, config))
    assert result.solved and result.solution_node is None and result.trace is None
    again = pickle.loads(pickle.dumps(result))
    assert again.solution_path == [0] * 1500
    assert again.solution_length == 1500


def test_parallel_attempts_return_long_solutions():
    trees = [long_chain(1200), long_chain(900)]
    results = solve_all(trees, parse_solver("levints"), None, BootstrapConfig(initial_budget=5000, max_iterations=1, workers=2))
    assert [r.solution_length for r in results] == [1200, 900]
