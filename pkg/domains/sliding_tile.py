from collections import deque
from functools import lru_cache
from math import isqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from domains.base import OFFSETS, UP, DOWN, LEFT, RIGHT, Problem, Transition
from utils.exceptions import ParseError


Tiles = Tuple[int, ...]

# undoing a move is the opposite blank direction
INVERSE = {UP: DOWN, DOWN: UP, LEFT: RIGHT, RIGHT: LEFT}


def goal_tiles(size: int) -> Tiles:
    """Blank in the top-left corner, then 1..N²-1 row by row."""
    return tuple(range(size * size))


def blank_moves(tiles: Tiles, size: int) -> List[Tuple[int, Tiles]]:
    """(action, child) pairs, action being the direction the blank moves."""
    blank = tiles.index(0)
    row, col = divmod(blank, size)
    children = []
    for action, (dr, dc) in enumerate(OFFSETS):
        r, c = row + dr, col + dc
        if 0 <= r < size and 0 <= c < size:
            target = r * size + c
            child = list(tiles)
            child[blank], child[target] = child[target], child[blank]
            children.append((action, tuple(child)))
    return children


def permutation_parity(tiles: Sequence[int]) -> int:
    seen = [False] * len(tiles)
    parity = 0
    for start in range(len(tiles)):
        if seen[start]:
            continue
        length = 0
        i = start
        while not seen[i]:
            seen[i] = True
            i = tiles[i]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def is_solvable(tiles: Sequence[int], size: int) -> bool:
    """Every move is a transposition and shifts the blank by one cell, so the
    permutation parity must match the parity of the blank's distance to its
    goal cell."""
    row, col = divmod(list(tiles).index(0), size)
    return permutation_parity(tiles) == (row + col) & 1


class SlidingTilePuzzle(Problem):
    def __init__(self, tiles: Sequence[int], problem_id: str = ""):
        size = isqrt(len(tiles))
        if size * size != len(tiles) or sorted(tiles) != list(range(len(tiles))):
            raise ValueError(f"Not a sliding-tile permutation: {list(tiles)}")
        self.size = size
        self.tiles: Tiles = tuple(int(t) for t in tiles)
        self.problem_id = problem_id
        self._goal = goal_tiles(size)

    @property
    def feature_shape(self) -> Tuple[int, int, int]:
        return (self.size, self.size, self.size * self.size)

    def initial_state(self) -> Tiles:
        return self.tiles

    def expand(self, state: Tiles) -> List[Transition]:
        return [Transition(a, child) for a, child in blank_moves(state, self.size)]

    def is_solution(self, state: Tiles) -> bool:
        return state == self._goal

    def state_key(self, state: Tiles) -> bytes:
        return np.asarray(state, dtype=np.int32).tobytes()

    def encode(self, state: Tiles) -> np.ndarray:
        features = np.zeros(self.feature_shape, dtype=np.float32)
        for position, tile in enumerate(state):
            features[position // self.size, position % self.size, tile] = 1.0
        return features

    def __repr__(self) -> str:
        return f"SlidingTilePuzzle(id={self.problem_id!r}, tiles={self.tiles})"


def parse_stp_file(text: str) -> List[SlidingTilePuzzle]:
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            tiles = [int(token) for token in line.split()]
        except ValueError:
            raise ParseError(f"non-integer token in {line!r}", lineno)
        try:
            problems.append(SlidingTilePuzzle(tiles, problem_id=str(len(problems))))
        except ValueError as e:
            raise ParseError(str(e), lineno)
    return problems


def serialize_stp(problems: Sequence[SlidingTilePuzzle]) -> str:
    return "".join(" ".join(str(t) for t in p.tiles) + "\n" for p in problems)


def random_walk(
    size: int, length: int, rng: np.random.Generator, start: Optional[Tiles] = None
) -> Tiles:
    """Walk the blank `length` steps from `start` (the goal by default)
    without immediately undoing the previous move."""
    tiles = goal_tiles(size) if start is None else start
    previous = None
    for _ in range(length):
        moves = [
            (a, child)
            for a, child in blank_moves(tiles, size)
            if previous is None or a != INVERSE[previous]
        ]
        previous, tiles = moves[rng.integers(len(moves))]
    return tiles


def generate_stp_walks(
    num_problems: int, size: int, seed: int, min_length: int = 50, max_length: int = 1000
) -> List[SlidingTilePuzzle]:
    rng = np.random.default_rng(seed)
    problems = []
    for i in range(num_problems):
        length = int(rng.integers(min_length, max_length + 1))
        problems.append(SlidingTilePuzzle(random_walk(size, length, rng), str(i)))
    return problems


def generate_stp_random(num_problems: int, size: int, seed: int) -> List[SlidingTilePuzzle]:
    """Uniform permutations, unsolvable ones rejected."""
    rng = np.random.default_rng(seed)
    problems = []
    while len(problems) < num_problems:
        tiles = tuple(int(t) for t in rng.permutation(size * size))
        if is_solvable(tiles, size):
            problems.append(SlidingTilePuzzle(tiles, str(len(problems))))
    return problems


def manhattan_distance(tiles: Sequence[int], size: int) -> int:
    """Sum over tiles of the grid distance to the goal cell; the blank is
    not counted."""
    total = 0
    for position, tile in enumerate(tiles):
        if tile:
            row, col = divmod(position, size)
            goal_row, goal_col = divmod(tile, size)
            total += abs(row - goal_row) + abs(col - goal_col)
    return total


@lru_cache(maxsize=2)
def stp_distance_table(size: int = 3) -> Dict[Tiles, int]:
    """Exact distance to the goal for every reachable configuration.

    Only sensible for size 3 (181 440 states).
    """
    goal = goal_tiles(size)
    distances = {goal: 0}
    queue = deque([goal])
    while queue:
        tiles = queue.popleft()
        d = distances[tiles] + 1
        for _, child in blank_moves(tiles, size):
            if child not in distances:
                distances[child] = d
                queue.append(child)
    return distances
