import os

import pandas as pd
import pytest
import yaml

import bench
import evaluate
import generate
import phs
import solve
import theory.suite as suite
import train
import verify
from domains.synth_tree import SynthTreeSpec, build_synth_tree, example_one_tree, parse_synth_file, serialize_synth
from theory.lab import FAIL, BoundReport


def gen_stp(out, num=4, min_length=2, max_length=4):
    argv = ["--domain", "stp", "--split", "train", "--size", "3", "--num", str(num),
            "--min_length", str(min_length), "--max_length", str(max_length), "--out", str(out)]
    assert generate.run(argv) == 0
    return str(out / "stp_train.txt")


@pytest.fixture
def synth_file(tmp_path):
    trees = [build_synth_tree(SynthTreeSpec(depth=4), seed, f"tree-{seed}") for seed in range(3)]
    path = tmp_path / "trees.yaml"
    path.write_text(serialize_synth(trees), encoding="utf-8")
    return str(path)


def test_gen_writes_problems_and_manifest(tmp_path):
    gen_stp(tmp_path)
    manifest = yaml.safe_load((tmp_path / "stp_train.yaml").read_text())
    assert manifest == {"domain": "stp", "split": "train", "seed": 0, "count": 4,
                        "size": 3, "min_length": 2, "max_length": 4}
    argv = ["--domain", "witness", "--num", "2", "--rows", "2", "--cols", "2", "--out", str(tmp_path)]
    assert generate.run(argv) == 0
    assert os.path.isfile(tmp_path / "witness_train.txt")


def test_gen_rejects_bad_input(tmp_path):
    assert generate.run(["--domain", "sokoban", "--out", str(tmp_path)]) == 2
    assert generate.run(["--domain", "stp", "--num", "0", "--out", str(tmp_path)]) == 2
    assert generate.run(["--domain", "stp", "--split", "valid", "--out", str(tmp_path)]) == 2
    assert generate.run(["--domain", "stp", "--min_length", "9", "--max_length", "3", "--out", str(tmp_path)]) == 2


def test_solve_synth_file(tmp_path, synth_file):
    out = tmp_path / "out"
    assert solve.run(["--domain", "synth", "--problems", synth_file, "--solver", "phs", "--out", str(out)]) == 0
    frame = pd.read_csv(out / "solve.csv")
    assert list(frame.columns) == solve.SOLVE_COLUMNS
    assert list(frame["id"]) == ["tree-0", "tree-1", "tree-2"]
    assert frame["solved"].all()


def test_solve_exits_1_when_something_is_unsolved(tmp_path):
    problems = gen_stp(tmp_path, num=3, min_length=20, max_length=30)
    argv = ["--domain", "stp", "--problems", problems, "--solver", "levints", "--budget", "1",
            "--out", str(tmp_path / "out")]
    code = solve.run(argv)
    solved = pd.read_csv(tmp_path / "out" / "solve.csv")["solved"]
    assert not solved.all()
    assert code == 1


def test_bad_input_exits_2(tmp_path, synth_file):
    out = str(tmp_path / "out")
    assert solve.run(["--domain", "chess", "--problems", synth_file, "--out", out]) == 2
    assert solve.run(["--domain", "synth", "--problems", str(tmp_path / "missing.txt"), "--out", out]) == 2
    assert solve.run(["--domain", "synth", "--problems", synth_file, "--solver", "dfs", "--out", out]) == 2
    assert solve.run(["--domain", "synth", "--problems", synth_file, "--log_level", "LOUD", "--out", out]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n", encoding="utf-8")
    assert solve.run(["--domain", "stp", "--problems", str(bad), "--out", out]) == 2


def test_config_file_supplies_flags(tmp_path, synth_file):
    config = tmp_path / "solve.yaml"
    config.write_text(yaml.safe_dump({"domain": "synth", "problems": synth_file, "solver": "levints",
                                      "out": str(tmp_path / "from_config")}))
    assert solve.run(["--config", str(config)]) == 0
    assert os.path.isfile(tmp_path / "from_config" / "solve.csv")
    # explicit flags win over the file
    assert solve.run(["--config", str(config), "--out", str(tmp_path / "explicit")]) == 0
    assert os.path.isfile(tmp_path / "explicit" / "solve.csv")


def test_unknown_config_key_exits_2(tmp_path, synth_file):
    config = tmp_path / "solve.yaml"
    config.write_text(yaml.safe_dump({"domain": "synth", "problems": synth_file, "temperature": 0.5}))
    assert solve.run(["--config", str(config)]) == 2
    assert solve.run(["--config", str(tmp_path / "missing.yaml")]) == 2


def test_train_then_test(tmp_path):
    problems = gen_stp(tmp_path, num=4, min_length=2, max_length=5)
    out = tmp_path / "train"
    argv = ["--domain", "stp", "--problems", problems, "--solver", "phs-star", "--architecture", "dense",
            "--budget", "200", "--max_iterations", "2", "--batch_problems", "2", "--out", str(out)]
    assert train.run(argv) == 0
    assert (out / "best_run.txt").read_text() == "run_0\n"
    iterations = pd.read_csv(out / "run_0" / "iterations.csv")
    assert list(iterations["iteration"]) == [1, 2]

    resumed = tmp_path / "resumed"
    argv = ["--domain", "stp", "--problems", problems, "--solver", "phs-star", "--resume",
            str(out / "best_model.ckpt"), "--budget", "200", "--max_iterations", "1", "--out", str(resumed)]
    assert train.run(argv) == 0
    assert os.path.isfile(resumed / "best_model.ckpt")

    test_out = tmp_path / "test"
    argv = ["--domain", "stp", "--problems", problems, "--solver", "phs-star", "--model",
            str(out / "best_model.ckpt"), "--budget", "200", "--max_iterations", "3", "--out", str(test_out)]
    assert evaluate.run(argv) == 0
    results = pd.read_csv(test_out / "test_results.csv")
    assert len(results) == 4
    summary = pd.read_csv(test_out / "summary.csv")
    assert summary.loc[0, "solver"] == "phs-star"


def test_train_needs_a_learnable_domain(tmp_path, synth_file):
    argv = ["--domain", "synth", "--problems", synth_file, "--max_iterations", "1", "--out", str(tmp_path)]
    assert train.run(argv) == 2


def test_model_of_another_domain_is_rejected(tmp_path, synth_file):
    problems = gen_stp(tmp_path)
    out = tmp_path / "train"
    argv = ["--domain", "stp", "--problems", problems, "--architecture", "dense", "--budget", "50",
            "--max_iterations", "1", "--out", str(out)]
    assert train.run(argv) == 0
    argv = ["--domain", "synth", "--problems", synth_file, "--model", str(out / "best_model.ckpt"),
            "--out", str(tmp_path / "solve")]
    assert solve.run(argv) == 2


def test_verify_quick_suite(tmp_path):
    assert verify.run(["--quick", "--suites", "example1", "--out", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "verify.csv")
    assert set(frame["status"]) == {"pass"}
    assert not os.path.exists(tmp_path / "failing_instances.yaml")


def test_verify_reports_injected_tree_without_failing(tmp_path):
    argv = ["--quick", "--suites", "example1", "--inject_inadmissible", "--out", str(tmp_path)]
    assert verify.run(argv) == 0
    assert "precondition_failed" in set(pd.read_csv(tmp_path / "verify.csv")["status"])


def test_verify_unknown_suite(tmp_path):
    assert verify.run(["--suites", "theorem9", "--out", str(tmp_path)]) == 2


def test_bench_writes_one_file_per_solver(tmp_path, synth_file):
    argv = ["--domain", "synth", "--problems", synth_file, "--solvers", "phs", "levints", "puct:1.5",
            "--out", str(tmp_path)]
    assert bench.run(argv) == 0
    summary = pd.read_csv(tmp_path / "bench_summary.csv")
    assert list(summary["solver"]) == ["phs", "levints", "puct:1.5"]
    assert os.path.isfile(tmp_path / "bench_puct_1.5.csv")
    assert (summary["solved"] == 3).all()


def test_bench_default_solver_list():
    names = bench.default_solvers()
    assert {"astar", "gbfs", "levints", "phs", "phs-h", "phs-star"} <= set(names)
    assert "wastar:1.5" in names and "puct:2" in names


def test_dispatcher(tmp_path):
    assert phs.main([]) == 2
    assert phs.main(["fly"]) == 2
    assert phs.main(["verify", "--quick", "--suites", "example1", "--out", str(tmp_path)]) == 0


def test_verify_writes_failing_trees_without_a_spec(tmp_path, monkeypatch):
    def always_fails(tree, result, evaluator):
        return BoundReport(tree.problem_id, "theorem1", 2.0, 1.0, -1.0, FAIL)

    monkeypatch.setattr(suite, "check_theorem1", always_fails)
    assert verify.run(["--quick", "--suites", "example1", "--out", str(tmp_path)]) == 1
    path = tmp_path / "failing_instances.yaml"
    trees = parse_synth_file(path.read_text(encoding="utf-8"))
    assert len(trees) == 8
    assert trees[0].children == example_one_tree(1, 1).children
    assert trees[0].eta_values == example_one_tree(1, 1).eta_values
    argv = ["--domain", "synth", "--problems", str(path), "--solver", "phs", "--out", str(tmp_path / "replay")]
    assert solve.run(argv) == 0


def test_resume_rejects_a_solver_with_other_losses(tmp_path):
    problems = gen_stp(tmp_path)
    out = tmp_path / "train"
    argv = ["--domain", "stp", "--problems", problems, "--solver", "phs-star", "--architecture", "dense",
            "--budget", "50", "--max_iterations", "1", "--out", str(out)]
    assert train.run(argv) == 0
    argv = ["--domain", "stp", "--problems", problems, "--solver", "levints", "--resume", str(out / "best_model.ckpt"),
            "--max_iterations", "1", "--out", str(tmp_path / "resumed")]
    assert train.run(argv) == 2
