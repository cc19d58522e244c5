"""Sources of policy, heuristic and heuristic-factor values for the search
engines.

A guide maps a batch of states to `GuideOutput`s. `log_probs` is a vector
over the problem's action space (None means: use the transition priors, or
a uniform distribution over the generated children).
"""
from abc import ABC, abstractmethod
from typing import Any, Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from domains.base import Problem


class GuideOutput(NamedTuple):
    log_probs: Optional[np.ndarray]
    h: float
    eta: Optional[float] = None


class Guide(ABC):
    # outputs depend only on the state and may be cached by state key
    cacheable: bool = False

    @abstractmethod
    def evaluate(self, problem: Problem, states: Sequence[Any]) -> List[GuideOutput]:
        ...


class UniformGuide(Guide):
    def evaluate(self, problem, states):
        return [GuideOutput(None, 0.0) for _ in states]


class ProblemGuide(Guide):
    """Heuristic and η stored in the problem itself (synthetic trees);
    conditionals come from the transitions."""

    def evaluate(self, problem, states):
        return [GuideOutput(None, problem.heuristic(s), problem.eta(s)) for s in states]


class HeuristicGuide(Guide):
    def __init__(self, heuristic: Callable[[Any], float]):
        self.heuristic = heuristic

    def evaluate(self, problem, states):
        return [GuideOutput(None, float(self.heuristic(s))) for s in states]


class NetworkGuide(Guide):
    cacheable = True

    def __init__(self, model, use_policy: bool = True, use_heuristic: bool = True):
        self.model = model
        self.use_policy = use_policy
        self.use_heuristic = use_heuristic

    def evaluate(self, problem, states):
        features = np.stack([problem.encode(s) for s in states])
        log_probs, h = self.model.predict(features)
        return [
            GuideOutput(
                log_probs[i] if self.use_policy else None,
                float(h[i]) if self.use_heuristic else 0.0,
            )
            for i in range(len(states))
        ]


def default_guide(model=None, use_policy: bool = True, use_heuristic: bool = True) -> Guide:
    if model is not None:
        return NetworkGuide(model, use_policy, use_heuristic)
    return ProblemGuide()
