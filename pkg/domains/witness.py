from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from domains.base import OFFSETS, Problem, Transition
from utils.exceptions import ParseError


NUM_COLORS = 4
NUM_FEATURES = 9
# feature planes after the four colour planes
ENTRANCE, EXIT, LINE, EMPTY, TIP = 4, 5, 6, 7, 8

Path = Tuple[int, ...]


class WitnessPuzzle(Problem):
    """Colour-separation puzzle on a rows × cols board of cells.

    The line runs on the (rows+1) × (cols+1) lattice of cell corners, from
    the bottom-left corner to the exit vertex, and never visits a vertex
    twice. A state is the vertex sequence of the line; vertices are indexed
    row-major with row 0 at the top.
    """

    def __init__(
        self,
        colors: Sequence[Sequence[int]],
        exit_vertex: Optional[Tuple[int, int]] = None,
        problem_id: str = "",
    ):
        self.colors = tuple(tuple(int(c) for c in row) for row in colors)
        self.rows = len(self.colors)
        self.cols = len(self.colors[0])
        if any(len(row) != self.cols for row in self.colors):
            raise ValueError("ragged colour grid")
        if any(not 0 <= c <= NUM_COLORS for row in self.colors for c in row):
            raise ValueError(f"colours must be in 0..{NUM_COLORS}")
        if exit_vertex is None:
            exit_vertex = (self.rows // 2, self.cols)
        if not (0 <= exit_vertex[0] <= self.rows and 0 <= exit_vertex[1] <= self.cols):
            raise ValueError(f"exit {exit_vertex} is off the lattice")
        self.exit_vertex = tuple(exit_vertex)
        self.problem_id = problem_id
        self.start = self.vertex(self.rows, 0)
        self.exit = self.vertex(*self.exit_vertex)

    def vertex(self, row: int, col: int) -> int:
        return row * (self.cols + 1) + col

    def vertex_coords(self, vertex: int) -> Tuple[int, int]:
        return divmod(vertex, self.cols + 1)

    @property
    def feature_shape(self) -> Tuple[int, int, int]:
        return (2 * self.rows, 2 * self.cols, NUM_FEATURES)

    def initial_state(self) -> Path:
        return (self.start,)

    def expand(self, state: Path) -> List[Transition]:
        row, col = self.vertex_coords(state[-1])
        visited = set(state)
        children = []
        for action, (dr, dc) in enumerate(OFFSETS):
            r, c = row + dr, col + dc
            if 0 <= r <= self.rows and 0 <= c <= self.cols:
                v = self.vertex(r, c)
                if v not in visited:
                    children.append(Transition(action, state + (v,)))
        return children

    def regions(self, path: Path) -> List[List[Tuple[int, int]]]:
        """Connected cell regions with the line's segments as barriers."""
        segments = {frozenset(pair) for pair in zip(path, path[1:])}

        def separated(a: int, b: int) -> bool:
            return frozenset((a, b)) in segments

        region_of: Dict[Tuple[int, int], int] = {}
        regions = []
        for start in ((r, c) for r in range(self.rows) for c in range(self.cols)):
            if start in region_of:
                continue
            region_of[start] = len(regions)
            stack, region = [start], []
            while stack:
                r, c = stack.pop()
                region.append((r, c))
                neighbours = []
                # the edge shared with each neighbouring cell, as a vertex pair
                if c + 1 < self.cols:
                    neighbours.append(((r, c + 1), self.vertex(r, c + 1), self.vertex(r + 1, c + 1)))
                if c > 0:
                    neighbours.append(((r, c - 1), self.vertex(r, c), self.vertex(r + 1, c)))
                if r + 1 < self.rows:
                    neighbours.append(((r + 1, c), self.vertex(r + 1, c), self.vertex(r + 1, c + 1)))
                if r > 0:
                    neighbours.append(((r - 1, c), self.vertex(r, c), self.vertex(r, c + 1)))
                for cell, a, b in neighbours:
                    if cell not in region_of and not separated(a, b):
                        region_of[cell] = len(regions)
                        stack.append(cell)
            regions.append(region)
        return regions

    def separates_colors(self, path: Path) -> bool:
        for region in self.regions(path):
            colors = {self.colors[r][c] for r, c in region} - {0}
            if len(colors) > 1:
                return False
        return True

    def is_solution(self, state: Path) -> bool:
        return state[-1] == self.exit and self.separates_colors(state)

    def state_key(self, state: Path) -> bytes:
        return np.asarray(state, dtype=np.int32).tobytes()

    def _vertex_pixel(self, vertex: int) -> Tuple[int, int]:
        row, col = self.vertex_coords(vertex)
        return min(2 * row, 2 * self.rows - 1), min(2 * col, 2 * self.cols - 1)

    def _segment_pixel(self, a: int, b: int) -> Tuple[int, int]:
        (r1, c1), (r2, c2) = sorted((self.vertex_coords(a), self.vertex_coords(b)))
        if r1 == r2:
            return min(2 * r1, 2 * self.rows - 1), 2 * c1 + 1
        return 2 * r1 + 1, min(2 * c1, 2 * self.cols - 1)

    def encode(self, state: Path) -> np.ndarray:
        # cells sit on odd pixels, lattice vertices on even ones; the last
        # lattice row and column share the border pixels
        features = np.zeros(self.feature_shape, dtype=np.float32)
        for r, row in enumerate(self.colors):
            for c, color in enumerate(row):
                plane = color - 1 if color else EMPTY
                features[2 * r + 1, 2 * c + 1, plane] = 1.0
        features[self._vertex_pixel(self.start) + (ENTRANCE,)] = 1.0
        features[self._vertex_pixel(self.exit) + (EXIT,)] = 1.0
        for vertex in state:
            features[self._vertex_pixel(vertex) + (LINE,)] = 1.0
        for a, b in zip(state, state[1:]):
            features[self._segment_pixel(a, b) + (LINE,)] = 1.0
        features[self._vertex_pixel(state[-1]) + (TIP,)] = 1.0
        return features


def parse_witness_file(text: str) -> List[WitnessPuzzle]:
    """Grammar in docs/witness_format.md."""
    puzzles: List[WitnessPuzzle] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith(";"):
            raise ParseError("expected '; <id>' header", i + 1)
        header_line = i + 1
        problem_id = line[1:].strip() or str(len(puzzles))
        try:
            size = lines[i + 1].split()
            exit_spec = lines[i + 2].split()
        except IndexError:
            raise ParseError(f"puzzle {problem_id!r} is truncated", header_line)
        if len(size) != 3 or size[0] != "size":
            raise ParseError("expected 'size <rows> <cols>'", i + 2)
        if len(exit_spec) != 3 or exit_spec[0] != "exit":
            raise ParseError("expected 'exit <row> <col>'", i + 3)
        try:
            rows, cols = int(size[1]), int(size[2])
            exit_vertex = (int(exit_spec[1]), int(exit_spec[2]))
        except ValueError:
            raise ParseError("non-integer size or exit", header_line)
        grid = []
        for r in range(rows):
            lineno = i + 4 + r
            if lineno > len(lines):
                raise ParseError(f"puzzle {problem_id!r} is truncated", header_line)
            try:
                row = [int(token) for token in lines[lineno - 1].split()]
            except ValueError:
                raise ParseError("non-integer colour", lineno)
            if len(row) != cols:
                raise ParseError(f"expected {cols} colours, found {len(row)}", lineno)
            grid.append(row)
        try:
            puzzles.append(WitnessPuzzle(grid, exit_vertex, problem_id))
        except ValueError as e:
            raise ParseError(str(e), header_line)
        i += 3 + rows
    return puzzles


def serialize_witness(puzzles: Sequence[WitnessPuzzle]) -> str:
    blocks = []
    for p in puzzles:
        lines = [f"; {p.problem_id}", f"size {p.rows} {p.cols}"]
        lines.append(f"exit {p.exit_vertex[0]} {p.exit_vertex[1]}")
        lines += [" ".join(str(c) for c in row) for row in p.colors]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def random_line(
    puzzle: WitnessPuzzle, rng: np.random.Generator, max_tries: int = 10_000
) -> Optional[Path]:
    """A random self-avoiding line from the entrance to the exit, found by
    depth-first search with shuffled move order."""
    stack = [puzzle.initial_state()]
    tries = 0
    while stack and tries < max_tries:
        path = stack.pop()
        tries += 1
        if path[-1] == puzzle.exit:
            return path
        children = puzzle.expand(path)
        for k in rng.permutation(len(children)):
            stack.append(children[k].state)
    return None


def generate_witness(
    num_problems: int,
    seed: int,
    rows: int = 4,
    cols: int = 4,
    fill: float = 0.6,
    num_colors: int = NUM_COLORS,
) -> List[WitnessPuzzle]:
    """Colour each region cut by a random line with one colour, then clear a
    random subset of cells. The random line stays a solution."""
    rng = np.random.default_rng(seed)
    blank = WitnessPuzzle([[0] * cols for _ in range(rows)])
    puzzles = []
    while len(puzzles) < num_problems:
        line = random_line(blank, rng)
        if line is None:
            continue
        regions = blank.regions(line)
        if len(regions) < 2:
            continue
        grid = [[0] * cols for _ in range(rows)]
        for region in regions:
            color = int(rng.integers(1, num_colors + 1))
            for r, c in region:
                if rng.random() < fill:
                    grid[r][c] = color
        puzzles.append(WitnessPuzzle(grid, blank.exit_vertex, str(len(puzzles))))
    return puzzles
