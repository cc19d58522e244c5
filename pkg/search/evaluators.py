"""Priority functions for the best-first search family.

Policy-based evaluators (LevinTS and the PHS variants) are computed in
log-space: their search key is log φ. A*, WA* and GBFS keys are the plain
linear values. All functions are pure in their `EvalContext`.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from utils.exceptions import ConfigError


ASTAR, WASTAR, GBFS = "astar", "wastar", "gbfs"
LEVINTS, PHS, PHS_H, PHS_STAR = "levints", "phs", "phs-h", "phs-star"

EVALUATOR_KINDS = (ASTAR, WASTAR, GBFS, LEVINTS, PHS, PHS_H, PHS_STAR)
POLICY_KINDS = (LEVINTS, PHS, PHS_H, PHS_STAR)
HEURISTIC_KINDS = (ASTAR, WASTAR, GBFS, PHS_H, PHS_STAR)


def safe_exp(x: float) -> float:
    if x > 709.0:
        return math.inf
    return math.exp(x)


def safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class EvalContext:
    g: float
    depth: int
    log_pi: float = 0.0
    # clipped at 0 on construction
    h: float = 0.0
    # phi+ (log) or f+ of the parent, -inf at the root
    parent_eval_plus: float = -math.inf
    # heuristic factor supplied by the problem, used by the generic PHS kind
    eta: Optional[float] = None

    def __post_init__(self):
        if not self.h > 0.0:
            object.__setattr__(self, "h", 0.0)

    @property
    def pi(self) -> float:
        return safe_exp(self.log_pi)


def eval_astar(ctx: EvalContext) -> float:
    return ctx.g + ctx.h


def eval_wastar(ctx: EvalContext, w: float) -> float:
    if w < 1.0:
        raise ConfigError(f"WA* weight must be at least 1, got {w}")
    return ctx.g + w * ctx.h


def eval_gbfs(ctx: EvalContext) -> float:
    return ctx.h


def log_levints(ctx: EvalContext) -> float:
    if ctx.log_pi == -math.inf:
        return math.inf
    return math.log(ctx.depth + 1) - ctx.log_pi


def log_phs(ctx: EvalContext) -> float:
    """log(η·g/π) with η taken from the context (1 when absent)."""
    eta = 1.0 if ctx.eta is None else ctx.eta
    if ctx.log_pi == -math.inf or eta == math.inf:
        return math.inf
    return safe_log(eta) + safe_log(ctx.g) - ctx.log_pi


def log_phs_h(ctx: EvalContext) -> float:
    if ctx.log_pi == -math.inf:
        return math.inf
    return safe_log(ctx.g + ctx.h) - ctx.log_pi


def log_phs_star(ctx: EvalContext) -> float:
    if ctx.log_pi == -math.inf:
        return math.inf
    if ctx.g <= 0.0:
        # the exponent h/g is undefined at g = 0; fall back to (g+h)/π
        return log_phs_h(ctx)
    return safe_log(ctx.g + ctx.h) - (1.0 + ctx.h / ctx.g) * ctx.log_pi


def eval_levints(ctx: EvalContext) -> float:
    return safe_exp(log_levints(ctx))


def eval_phs(ctx: EvalContext) -> float:
    return safe_exp(log_phs(ctx))


def eval_phs_h(ctx: EvalContext) -> float:
    return safe_exp(log_phs_h(ctx))


def eval_phs_star(ctx: EvalContext) -> float:
    return safe_exp(log_phs_star(ctx))


def monotone_plus(ctx: EvalContext, value: float) -> float:
    return max(ctx.parent_eval_plus, value)


def eta_of(ctx: EvalContext, kind: str) -> float:
    """Heuristic factor η implied by a policy-based evaluator kind."""
    if kind == LEVINTS:
        return 1.0
    if kind == PHS:
        return 1.0 if ctx.eta is None else ctx.eta
    if kind == PHS_H:
        if ctx.g <= 0.0:
            return 1.0 + ctx.h
        return (ctx.g + ctx.h) / ctx.g
    if kind == PHS_STAR:
        if ctx.g <= 0.0:
            return 1.0 + ctx.h
        if ctx.h == 0.0:
            return 1.0
        ratio = ctx.h / ctx.g
        return safe_exp(math.log1p(ratio) - ratio * ctx.log_pi)
    raise ConfigError(f"Evaluator {kind} has no heuristic factor. Choose from {list(POLICY_KINDS)}")


_LOG_FUNCTIONS = {
    LEVINTS: log_levints,
    PHS: log_phs,
    PHS_H: log_phs_h,
    PHS_STAR: log_phs_star,
}


@dataclass(frozen=True)
class Evaluator:
    kind: str
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in EVALUATOR_KINDS:
            raise ConfigError(
                f"Evaluator {self.kind} not available. Choose from {list(EVALUATOR_KINDS)}"
            )
        if self.kind == WASTAR and self.weight < 1.0:
            raise ConfigError(f"WA* weight must be at least 1, got {self.weight}")

    @property
    def uses_policy(self) -> bool:
        return self.kind in POLICY_KINDS

    @property
    def uses_heuristic(self) -> bool:
        return self.kind in HEURISTIC_KINDS

    @property
    def log_space(self) -> bool:
        return self.kind in POLICY_KINDS

    def key(self, ctx: EvalContext) -> float:
        """Frontier priority: log φ for policy-based kinds, f otherwise."""
        if self.kind in _LOG_FUNCTIONS:
            return _LOG_FUNCTIONS[self.kind](ctx)
        if self.kind == ASTAR:
            return eval_astar(ctx)
        if self.kind == WASTAR:
            return eval_wastar(ctx, self.weight)
        return eval_gbfs(ctx)

    def lower_key(self, ctx: EvalContext) -> float:
        """Smallest key a node can reach once its guide output is known, from
        the g, depth and π it has at generation. η is unbounded below for the
        generic PHS kind, so its floor is -inf."""
        if self.kind == LEVINTS:
            return log_levints(ctx)
        if self.kind in (PHS_H, PHS_STAR):
            # h >= 0 and log π <= 0
            if ctx.log_pi == -math.inf:
                return math.inf
            return safe_log(ctx.g) - ctx.log_pi
        if self.kind in (ASTAR, WASTAR):
            return ctx.g
        if self.kind == GBFS:
            return 0.0
        return -math.inf

    def value(self, ctx: EvalContext) -> float:
        """The evaluation in linear space."""
        key = self.key(ctx)
        return safe_exp(key) if self.log_space else key

    def eta(self, ctx: EvalContext) -> float:
        return eta_of(ctx, self.kind)

    def phi_pi(self, ctx: EvalContext) -> Tuple[float, float]:
        """(log φ, log π), the pair compared by safe state pruning."""
        if not self.uses_policy:
            raise ConfigError(f"Evaluator {self.kind} exposes no (phi, pi) pair")
        return self.key(ctx), ctx.log_pi

    def __str__(self) -> str:
        return f"{WASTAR}:{self.weight:g}" if self.kind == WASTAR else self.kind


def parse_evaluator(text: str) -> Evaluator:
    """Parse "astar", "wastar:W", "gbfs", "levints", "phs", "phs-h" or
    "phs-star"."""
    name, _, argument = text.strip().lower().partition(":")
    if name == WASTAR:
        if not argument:
            raise ConfigError("wastar needs a weight, e.g. wastar:1.5")
        try:
            weight = float(argument)
        except ValueError:
            raise ConfigError(f"WA* weight {argument!r} is not a number")
        return Evaluator(WASTAR, weight)
    if argument:
        raise ConfigError(f"Evaluator {name} takes no parameter")
    return Evaluator(name)
