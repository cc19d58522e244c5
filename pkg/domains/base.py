from abc import ABC, abstractmethod
from typing import Any, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np


UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTIONS = ("up", "down", "left", "right")
# (row, col) offsets, row 0 at the top
OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class Transition(NamedTuple):
    action: int
    state: Any
    loss: float = 1.0
    # fixed conditional probability pi(child | parent); None means the
    # guidance (network or uniform) provides it
    prior: Optional[float] = None


class Problem(ABC):
    """A deterministic single-agent task.

    Instances are immutable after construction and can be shared by any
    number of searches.
    """

    problem_id: str = ""
    num_actions: int = len(ACTIONS)

    @property
    @abstractmethod
    def feature_shape(self) -> Tuple[int, int, int]:
        ...

    @abstractmethod
    def initial_state(self) -> Any:
        ...

    @abstractmethod
    def expand(self, state: Any) -> List[Transition]:
        """Children of `state` in fixed action order."""

    @abstractmethod
    def is_solution(self, state: Any) -> bool:
        ...

    @abstractmethod
    def state_key(self, state: Any) -> bytes:
        ...

    @abstractmethod
    def encode(self, state: Any) -> np.ndarray:
        ...

    def root_loss(self) -> float:
        return 1.0

    def heuristic(self, state: Any) -> float:
        return 0.0

    def eta(self, state: Any) -> Optional[float]:
        return None

    def legal_actions(self, state: Any) -> List[int]:
        return [t.action for t in self.expand(state)]

    def legal_mask(self, state: Any) -> np.ndarray:
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[self.legal_actions(state)] = True
        return mask

    def apply(self, state: Any, action: int) -> Any:
        for transition in self.expand(state):
            if transition.action == action:
                return transition.state
        raise ValueError(f"Action {action} is not legal in problem {self.problem_id}")


def replay(problem: Problem, actions: Sequence[int]) -> Any:
    state = problem.initial_state()
    for action in actions:
        state = problem.apply(state, action)
    return state
