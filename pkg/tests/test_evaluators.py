import math

import pytest
from hypothesis import given, strategies as st

from search.configurations import LEVIN, MSE, CROSS_ENTROPY, parse_solver
from search.evaluators import (
    ASTAR,
    GBFS,
    LEVINTS,
    PHS,
    PHS_H,
    PHS_STAR,
    POLICY_KINDS,
    WASTAR,
    EvalContext,
    Evaluator,
    eval_levints,
    eval_phs,
    eval_phs_h,
    eval_phs_star,
    monotone_plus,
    parse_evaluator,
)
from utils.exceptions import ConfigError


def test_negative_and_nan_heuristics_are_clipped():
    assert EvalContext(1.0, 0, h=-3.0).h == 0.0
    assert EvalContext(1.0, 0, h=float("nan")).h == 0.0


def test_linear_evaluators():
    ctx = EvalContext(g=3.0, depth=2, h=4.0)
    assert Evaluator(ASTAR).key(ctx) == 7.0
    assert Evaluator(WASTAR, 1.5).key(ctx) == 9.0
    assert Evaluator(GBFS).key(ctx) == 4.0
    assert not Evaluator(ASTAR).log_space


def test_policy_evaluators_by_hand():
    ctx = EvalContext(g=2.0, depth=3, log_pi=math.log(0.5), h=2.0, eta=3.0)
    assert eval_levints(ctx) == pytest.approx(4 / 0.5)
    assert eval_phs(ctx) == pytest.approx(3.0 * 2.0 / 0.5)
    assert eval_phs_h(ctx) == pytest.approx(4.0 / 0.5)
    assert eval_phs_star(ctx) == pytest.approx(4.0 / 0.5 ** 2)
    assert Evaluator(PHS_STAR).key(ctx) == pytest.approx(math.log(16.0))
    assert Evaluator(PHS_STAR).value(ctx) == pytest.approx(16.0)


def test_phs_star_at_zero_loss_falls_back_to_phs_h():
    ctx = EvalContext(g=0.0, depth=0, log_pi=math.log(0.25), h=1.0)
    assert Evaluator(PHS_STAR).key(ctx) == Evaluator(PHS_H).key(ctx)


@pytest.mark.parametrize("kind", POLICY_KINDS)
def test_zero_probability_is_infinite(kind):
    ctx = EvalContext(g=1.0, depth=1, log_pi=-math.inf, h=1.0)
    assert Evaluator(kind).key(ctx) == math.inf


def test_infinite_eta_is_infinite():
    assert Evaluator(PHS).key(EvalContext(1.0, 1, eta=math.inf)) == math.inf


@given(
    g=st.floats(1.0, 50.0),
    h=st.floats(0.0, 20.0),
    log_pi=st.floats(-10.0, 0.0),
    kind=st.sampled_from(POLICY_KINDS),
    eta=st.floats(1.0, 5.0),
)
def test_phi_is_eta_times_g_over_pi(g, h, log_pi, kind, eta):
    # with g = d + 1, LevinTS is PHS with eta = 1
    depth = int(g) - 1 if kind == LEVINTS else 4
    g = float(depth + 1) if kind == LEVINTS else g
    ctx = EvalContext(g, depth, log_pi, h, eta=eta)
    evaluator = Evaluator(kind)
    expected = math.log(evaluator.eta(ctx)) + math.log(g) - log_pi
    assert evaluator.key(ctx) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@given(g=st.floats(0.5, 50.0), log_pi=st.floats(-10.0, 0.0))
def test_heuristic_free_variants_agree(g, log_pi):
    ctx = EvalContext(g, 3, log_pi)
    assert Evaluator(PHS_H).key(ctx) == pytest.approx(Evaluator(PHS).key(ctx))
    assert Evaluator(PHS_STAR).key(ctx) == pytest.approx(Evaluator(PHS).key(ctx))


@given(h=st.floats(0.0, 20.0), log_pi=st.floats(-10.0, 0.0))
def test_phs_star_eta_at_least_phs_h_eta(h, log_pi):
    ctx = EvalContext(2.0, 2, log_pi, h)
    assert Evaluator(PHS_STAR).eta(ctx) >= Evaluator(PHS_H).eta(ctx) * (1 - 1e-12)


def test_monotone_plus():
    ctx = EvalContext(1.0, 1, parent_eval_plus=5.0)
    assert monotone_plus(ctx, 3.0) == 5.0
    assert monotone_plus(ctx, 7.0) == 7.0
    assert monotone_plus(EvalContext(1.0, 0), -2.0) == -2.0


def test_phi_pi_pair():
    ctx = EvalContext(2.0, 1, math.log(0.5))
    assert Evaluator(LEVINTS).phi_pi(ctx) == (pytest.approx(math.log(4.0)), math.log(0.5))
    with pytest.raises(ConfigError):
        Evaluator(ASTAR).phi_pi(ctx)


def test_parse_evaluator():
    assert parse_evaluator("wastar:2.5") == Evaluator(WASTAR, 2.5)
    assert str(parse_evaluator(" PHS-Star ")) == PHS_STAR
    assert str(parse_evaluator("wastar:1.5")) == "wastar:1.5"


@pytest.mark.parametrize("text", ["wastar", "wastar:abc", "wastar:0.5", "phs:2", "bfs"])
def test_bad_evaluators(text):
    with pytest.raises(ConfigError):
        parse_evaluator(text)


def test_solver_registry():
    assert parse_solver("phs-star").losses == (LEVIN, MSE)
    assert parse_solver("levints").losses == (LEVIN,)
    assert parse_solver("astar").uses_heuristic and not parse_solver("astar").uses_policy
    puct = parse_solver("puct:1.5")
    assert puct.evaluator is None and puct.c == 1.5 and puct.name == "puct:1.5"
    assert puct.losses == (CROSS_ENTROPY, MSE)
    assert parse_solver("puct").c == 1.0


@pytest.mark.parametrize("text", ["dfs", "puct:-1", "puct:x", "wastar"])
def test_bad_solvers(text):
    with pytest.raises(ConfigError):
        parse_solver(text)


@given(
    g=st.floats(0.5, 50.0),
    depth=st.integers(0, 50),
    h=st.floats(0.0, 20.0),
    log_pi=st.floats(-10.0, 0.0),
    eta=st.floats(0.1, 10.0),
    evaluator=st.sampled_from([Evaluator(kind) for kind in (ASTAR, GBFS, LEVINTS, PHS, PHS_H, PHS_STAR)] + [Evaluator(WASTAR, 2.0)]),
)
def test_lower_key_bounds_the_key_before_the_guide_runs(g, depth, h, log_pi, eta, evaluator):
    generated = EvalContext(g, depth, log_pi=log_pi)
    evaluated = EvalContext(g, depth, log_pi=log_pi, h=h, eta=eta)
    assert evaluator.lower_key(generated) <= evaluator.key(evaluated) + 1e-9


def test_lower_key_of_an_impossible_node():
    assert Evaluator(PHS_STAR).lower_key(EvalContext(1.0, 1, log_pi=-math.inf)) == math.inf
    assert Evaluator(PHS).lower_key(EvalContext(1.0, 1)) == -math.inf
