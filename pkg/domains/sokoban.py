from typing import FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from domains.base import OFFSETS, Problem, Transition
from utils.exceptions import ParseError


WALL, AVATAR, BOX, GOAL = "#", "@", "$", "."
BOX_ON_GOAL, AVATAR_ON_GOAL, FLOOR = "*", "+", " "
SYMBOLS = {WALL, AVATAR, BOX, GOAL, BOX_ON_GOAL, AVATAR_ON_GOAL, FLOOR}


class SokobanState(NamedTuple):
    avatar: int
    # sorted, so that box permutations share one state
    boxes: Tuple[int, ...]


class SokobanLevel(Problem):
    """A Boxoban level: the static grid (walls and goals) plus the initial
    avatar and box positions. Cells are indexed row-major."""

    def __init__(
        self,
        height: int,
        width: int,
        walls: FrozenSet[int],
        goals: FrozenSet[int],
        avatar: int,
        boxes: Sequence[int],
        problem_id: str = "",
    ):
        self.height = height
        self.width = width
        self.walls = frozenset(walls)
        self.goals = frozenset(goals)
        self.problem_id = problem_id
        self._initial = SokobanState(avatar, tuple(sorted(boxes)))

    @property
    def feature_shape(self) -> Tuple[int, int, int]:
        return (self.height, self.width, 4)

    def initial_state(self) -> SokobanState:
        return self._initial

    def _neighbour(self, cell: int, action: int) -> Optional[int]:
        row, col = divmod(cell, self.width)
        dr, dc = OFFSETS[action]
        r, c = row + dr, col + dc
        if not (0 <= r < self.height and 0 <= c < self.width):
            return None
        target = r * self.width + c
        return None if target in self.walls else target

    def _move(self, state: SokobanState, action: int) -> SokobanState:
        target = self._neighbour(state.avatar, action)
        if target is None:
            return state
        if target not in state.boxes:
            return SokobanState(target, state.boxes)
        beyond = self._neighbour(target, action)
        if beyond is None or beyond in state.boxes:
            return state
        boxes = tuple(sorted(b if b != target else beyond for b in state.boxes))
        return SokobanState(target, boxes)

    def expand(self, state: SokobanState) -> List[Transition]:
        # blocked moves are kept as self-transitions
        return [Transition(action, self._move(state, action)) for action in range(4)]

    def is_solution(self, state: SokobanState) -> bool:
        return all(box in self.goals for box in state.boxes)

    def state_key(self, state: SokobanState) -> bytes:
        return np.array((state.avatar,) + state.boxes, dtype=np.uint16).tobytes()

    def encode(self, state: SokobanState) -> np.ndarray:
        features = np.zeros(self.feature_shape, dtype=np.float32)
        for plane, cells in enumerate((self.walls, (state.avatar,), state.boxes, self.goals)):
            for cell in cells:
                features[cell // self.width, cell % self.width, plane] = 1.0
        return features

    def render(self, state: Optional[SokobanState] = None) -> List[str]:
        state = self._initial if state is None else state
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                cell = r * self.width + c
                if cell in self.walls:
                    row.append(WALL)
                elif cell == state.avatar:
                    row.append(AVATAR_ON_GOAL if cell in self.goals else AVATAR)
                elif cell in state.boxes:
                    row.append(BOX_ON_GOAL if cell in self.goals else BOX)
                else:
                    row.append(GOAL if cell in self.goals else FLOOR)
            rows.append("".join(row).rstrip())
        return rows


def _build_level(rows: List[str], problem_id: str, first_line: int) -> SokobanLevel:
    height = len(rows)
    width = max(len(row) for row in rows)
    walls, goals, boxes, avatars = set(), set(), [], []
    for r, row in enumerate(rows):
        for c, symbol in enumerate(row.ljust(width)):
            cell = r * width + c
            if symbol not in SYMBOLS:
                raise ParseError(f"unknown symbol {symbol!r}", first_line + r)
            if symbol == WALL:
                walls.add(cell)
            if symbol in (GOAL, BOX_ON_GOAL, AVATAR_ON_GOAL):
                goals.add(cell)
            if symbol in (BOX, BOX_ON_GOAL):
                boxes.append(cell)
            if symbol in (AVATAR, AVATAR_ON_GOAL):
                avatars.append(cell)
    if len(avatars) != 1:
        raise ParseError(f"level {problem_id!r} has {len(avatars)} avatars", first_line)
    if len(boxes) != len(goals):
        raise ParseError(
            f"level {problem_id!r} has {len(boxes)} boxes and {len(goals)} goals",
            first_line,
        )
    return SokobanLevel(height, width, walls, goals, avatars[0], boxes, problem_id)


def parse_boxoban_file(text: str) -> List[SokobanLevel]:
    """Levels are introduced by `; <id>` lines and end at a blank line."""
    levels: List[SokobanLevel] = []
    rows: List[str] = []
    problem_id: Optional[str] = None
    first_line = 0

    def flush():
        if rows:
            level_id = problem_id if problem_id else str(len(levels))
            levels.append(_build_level(rows, level_id, first_line))
        rows.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r\n")
        if line.startswith(";"):
            flush()
            problem_id = line[1:].strip()
        elif not line.strip():
            flush()
            problem_id = None
        else:
            if not rows:
                first_line = lineno
            rows.append(line.rstrip())
    flush()
    return levels


def serialize_boxoban(levels: Sequence[SokobanLevel]) -> str:
    blocks = []
    for level in levels:
        blocks.append(f"; {level.problem_id}\n" + "\n".join(level.render()) + "\n")
    return "\n".join(blocks)
