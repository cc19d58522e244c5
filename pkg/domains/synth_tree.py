import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from domains.base import Problem, Transition
from utils.exceptions import ConfigError, ParseError


@dataclass(frozen=True)
class SynthTreeSpec:
    depth: int = 6
    branching: Tuple[int, int] = (1, 3)
    proper: bool = True
    # "random" draws conditionals from a flat Dirichlet, "uniform" splits evenly
    policy: str = "random"
    conditionals: Optional[Tuple[float, ...]] = None
    loss_range: Tuple[float, float] = (1.0, 1.0)
    root_loss: Optional[float] = None
    # "ones", "random" (uniform in eta_range) or "admissible"
    eta: str = "ones"
    eta_range: Tuple[float, float] = (1.0, 4.0)
    # "none", "random" or "exact" (min path loss to a descendant solution)
    heuristic: str = "none"
    heuristic_scale: float = 1.0
    solution_rate: float = 0.1
    # states per layer; set to alias nodes onto a layered state graph
    num_states: Optional[int] = None
    max_nodes: int = 100_000


class SynthTree(Problem):
    """An explicit finite tree with stored conditionals, losses, heuristic
    factors, heuristic values and solution flags. A search state is a node
    index; `state_of` maps nodes onto (possibly shared) state ids."""

    feature_shape = (1, 1, 1)

    def __init__(self, problem_id: str = ""):
        self.problem_id = problem_id
        self.parent: List[int] = []
        self.action: List[int] = []
        self.depth: List[int] = []
        self.children: List[List[int]] = []
        self.cond: List[float] = []
        self.loss: List[float] = []
        self.eta_values: List[float] = []
        self.h: List[float] = []
        self.solution: List[bool] = []
        self.state_of: List[int] = []
        self.spec: Optional[SynthTreeSpec] = None
        self.seed: Optional[int] = None
        # original problem states, kept by unroll_problem
        self.states: Optional[List[Any]] = None

    def add_node(
        self,
        parent: int = -1,
        cond: float = 1.0,
        loss: float = 1.0,
        eta: float = 1.0,
        h: float = 0.0,
        solution: bool = False,
        state: Optional[int] = None,
    ) -> int:
        node = len(self.parent)
        self.parent.append(parent)
        self.action.append(len(self.children[parent]) if parent >= 0 else -1)
        self.depth.append(self.depth[parent] + 1 if parent >= 0 else 0)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(node)
        self.cond.append(float(cond))
        self.loss.append(float(loss))
        self.eta_values.append(float(eta))
        self.h.append(float(h))
        self.solution.append(bool(solution))
        self.state_of.append(node if state is None else int(state))
        return node

    @classmethod
    def from_children(
        cls,
        children: Sequence[Sequence[int]],
        cond: Optional[Sequence[float]] = None,
        loss: Optional[Sequence[float]] = None,
        eta: Optional[Sequence[float]] = None,
        h: Optional[Sequence[float]] = None,
        solutions: Sequence[int] = (),
        states: Optional[Sequence[int]] = None,
        problem_id: str = "",
    ) -> "SynthTree":
        """Build from an adjacency list indexed by node id, node 0 being the
        root. Conditionals default to uniform, losses and eta to 1."""
        n = len(children)
        if sorted(kid for kids in children for kid in kids) != list(range(1, n)):
            raise ConfigError("every node but the root must be the child of exactly one node")
        tree = cls(problem_id)
        tree.parent, tree.action = [-1] * n, [-1] * n
        tree.children = [list(kids) for kids in children]
        for node, kids in enumerate(children):
            for i, kid in enumerate(kids):
                tree.parent[kid], tree.action[kid] = node, i
        tree.depth = [0] * n
        reached, queue = 1, deque([0])
        while queue:
            node = queue.popleft()
            for kid in children[node]:
                tree.depth[kid] = tree.depth[node] + 1
                reached += 1
                queue.append(kid)
        if reached != n:
            raise ConfigError("children lists do not describe a tree over 0..n-1")
        tree.cond = [
            float(cond[v]) if cond is not None else (1.0 / len(children[p]) if p >= 0 else 1.0)
            for v, p in enumerate(tree.parent)
        ]
        tree.loss = [float(x) for x in loss] if loss is not None else [1.0] * n
        tree.eta_values = [float(x) for x in eta] if eta is not None else [1.0] * n
        tree.h = [float(x) for x in h] if h is not None else [0.0] * n
        tree.solution = [v in set(solutions) for v in range(n)]
        tree.state_of = [int(s) for s in states] if states is not None else list(range(n))
        return tree

    def topological_order(self) -> List[int]:
        """Parents before children."""
        return sorted(range(len(self)), key=lambda node: self.depth[node])

    def __len__(self) -> int:
        return len(self.parent)

    def initial_state(self) -> int:
        return 0

    def root_loss(self) -> float:
        return self.loss[0]

    def expand(self, state: int) -> List[Transition]:
        return [
            Transition(i, child, self.loss[child], self.cond[child])
            for i, child in enumerate(self.children[state])
        ]

    def is_solution(self, state: int) -> bool:
        return self.solution[state]

    def state_key(self, state: int) -> bytes:
        return self.state_of[state].to_bytes(4, "little")

    def encode(self, state: int) -> np.ndarray:
        raise NotImplementedError("synthetic trees carry their own policy and heuristic")

    def heuristic(self, state: int) -> float:
        return self.h[state]

    def eta(self, state: int) -> float:
        return self.eta_values[state]

    def path_actions(self, node: int) -> List[int]:
        actions = []
        while self.parent[node] >= 0:
            actions.append(self.action[node])
            node = self.parent[node]
        return actions[::-1]

    def ancestors(self, node: int) -> List[int]:
        """Root first, `node` last."""
        chain = []
        while node >= 0:
            chain.append(node)
            node = self.parent[node]
        return chain[::-1]

    @property
    def solutions(self) -> List[int]:
        return [n for n, s in enumerate(self.solution) if s]

    def path_loss(self, node: int) -> float:
        return sum(self.loss[n] for n in self.ancestors(node))

    def path_probability(self, node: int) -> float:
        return math.prod(self.cond[n] for n in self.ancestors(node)[1:])

    def set_exact_heuristic(self, scale: float = 1.0) -> None:
        """h(n) = scale · min path loss from n to a descendant solution."""
        exact = [math.inf] * len(self)
        for node in reversed(self.topological_order()):
            if self.solution[node]:
                exact[node] = 0.0
            else:
                for child in self.children[node]:
                    exact[node] = min(exact[node], self.loss[child] + exact[child])
        self.h = [scale * value if value < math.inf else math.inf for value in exact]


def _conditionals(spec: SynthTreeSpec, branching: int, rng: np.random.Generator) -> np.ndarray:
    if spec.conditionals is not None:
        if len(spec.conditionals) != branching:
            raise ConfigError(
                f"{len(spec.conditionals)} conditionals given for branching {branching}"
            )
        probs = np.asarray(spec.conditionals, dtype=float)
        if spec.proper and abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(f"conditionals {spec.conditionals} do not sum to 1")
        return probs
    if spec.policy == "uniform":
        probs = np.full(branching, 1.0 / branching)
    elif spec.policy == "random":
        probs = rng.dirichlet(np.ones(branching))
    else:
        raise ConfigError(f"Policy {spec.policy} not available. Choose from ['random', 'uniform']")
    if not spec.proper:
        probs = probs * rng.uniform(0.5, 1.0)
    return probs


def _node_attributes(spec: SynthTreeSpec, rng: np.random.Generator) -> Tuple[float, float, float, bool]:
    loss = rng.uniform(*spec.loss_range)
    eta = rng.uniform(*spec.eta_range) if spec.eta == "random" else 1.0
    h = rng.uniform(0.0, spec.depth) * spec.heuristic_scale if spec.heuristic == "random" else 0.0
    solution = rng.random() < spec.solution_rate
    return loss, eta, h, solution


def _sample_tree(spec: SynthTreeSpec, rng: np.random.Generator, problem_id: str) -> SynthTree:
    tree = SynthTree(problem_id)
    loss, eta, h, solution = _node_attributes(spec, rng)
    root_loss = spec.root_loss if spec.root_loss is not None else loss
    queue = deque([tree.add_node(loss=root_loss, eta=eta, h=h, solution=solution)])
    while queue:
        node = queue.popleft()
        if tree.depth[node] >= spec.depth:
            continue
        branching = int(rng.integers(spec.branching[0], spec.branching[1] + 1))
        if branching == 0:
            continue
        for cond in _conditionals(spec, branching, rng):
            loss, eta, h, solution = _node_attributes(spec, rng)
            queue.append(tree.add_node(node, cond, loss, eta, h, solution))
            if len(tree) > spec.max_nodes:
                raise ConfigError(f"tree exceeds {spec.max_nodes} nodes")
    return tree


def _sample_aliased_tree(spec: SynthTreeSpec, rng: np.random.Generator, problem_id: str) -> SynthTree:
    """Unroll a layered state graph: every quantity but the path loss is a
    function of the state."""
    k = spec.num_states
    layers = [[0]] + [[1 + (d - 1) * k + i for i in range(k)] for d in range(1, spec.depth + 1)]
    attributes = {}
    successors = {}
    for d, layer in enumerate(layers):
        for state in layer:
            attributes[state] = _node_attributes(spec, rng)
            if d == spec.depth:
                continue
            branching = min(int(rng.integers(spec.branching[0], spec.branching[1] + 1)), k)
            if branching == 0:
                continue
            picks = rng.choice(k, size=branching, replace=False)
            conds = _conditionals(spec, branching, rng)
            successors[state] = [(layers[d + 1][i], c) for i, c in zip(picks, conds)]

    tree = SynthTree(problem_id)
    loss, eta, h, solution = attributes[0]
    root_loss = spec.root_loss if spec.root_loss is not None else loss
    queue = deque([tree.add_node(loss=root_loss, eta=eta, h=h, solution=solution, state=0)])
    while queue:
        node = queue.popleft()
        for state, cond in successors.get(tree.state_of[node], []):
            loss, eta, h, solution = attributes[state]
            queue.append(tree.add_node(node, cond, loss, eta, h, solution, state))
            if len(tree) > spec.max_nodes:
                raise ConfigError(f"tree exceeds {spec.max_nodes} nodes")
    return tree


def _admissible_eta(tree: SynthTree, rng: np.random.Generator, eta_range: Tuple[float, float]) -> None:
    """Blend between 1 and the ideal factor min over descendant solutions of
    (g*/pi*) / (g/pi); solutions themselves get 1."""
    n = len(tree)
    g, log_pi = [0.0] * n, [0.0] * n
    order = tree.topological_order()
    for node in order:
        p = tree.parent[node]
        if p >= 0:
            g[node] = g[p] + tree.loss[node]
            log_pi[node] = log_pi[p] + (math.log(tree.cond[node]) if tree.cond[node] > 0 else -math.inf)
        else:
            g[node] = tree.loss[node]
    # best log(g*/pi*) below each node
    best = [math.inf] * n
    for node in reversed(order):
        if tree.solution[node] and g[node] > 0:
            best[node] = math.log(g[node]) - log_pi[node]
        elif tree.solution[node]:
            best[node] = -math.inf
        for child in tree.children[node]:
            best[node] = min(best[node], best[child])
    for node in range(n):
        if tree.solution[node] or g[node] == 0:
            tree.eta_values[node] = 1.0
        elif best[node] == math.inf:
            tree.eta_values[node] = rng.uniform(*eta_range)
        else:
            ideal = math.exp(best[node] - (math.log(g[node]) - log_pi[node]))
            tree.eta_values[node] = 1.0 + rng.uniform(0.0, 0.999) * max(ideal - 1.0, 0.0)


def build_synth_tree(spec: SynthTreeSpec, seed: int, problem_id: str = "") -> SynthTree:
    if spec.depth < 0:
        raise ConfigError("tree depth must be finite and nonnegative")
    if spec.num_states is not None and spec.eta == "admissible":
        raise ConfigError("admissible eta depends on the path; not available for aliased trees")
    rng = np.random.default_rng(seed)
    problem_id = problem_id or f"tree-{seed}"
    if spec.num_states is None:
        tree = _sample_tree(spec, rng, problem_id)
    else:
        tree = _sample_aliased_tree(spec, rng, problem_id)
    if not tree.solutions:
        deepest = max(range(len(tree)), key=lambda n: (tree.depth[n], -n))
        candidates = [n for n in range(len(tree)) if tree.depth[n] == tree.depth[deepest]]
        tree.solution[candidates[int(rng.integers(len(candidates)))]] = True
        if spec.num_states is not None:
            # keep solution flags a function of the state
            marked = {tree.state_of[n] for n in tree.solutions}
            tree.solution = [s in marked for s in tree.state_of]
    if spec.heuristic == "exact":
        tree.set_exact_heuristic(spec.heuristic_scale)
    if spec.eta == "admissible":
        _admissible_eta(tree, rng, spec.eta_range)
    tree.spec, tree.seed = spec, seed
    return tree


def example_one_tree(depth: int, seed: int) -> SynthTree:
    """Full binary tree with uniform conditionals, one solution at `depth`,
    eta = 1 on the root-to-solution path and infinite elsewhere."""
    rng = np.random.default_rng(seed)
    tree = SynthTree(problem_id=f"example1-d{depth}-{seed}")
    tree.add_node()
    frontier = [0]
    for _ in range(depth):
        next_frontier = []
        for node in frontier:
            next_frontier += [tree.add_node(node, 0.5), tree.add_node(node, 0.5)]
        frontier = next_frontier
    target = frontier[int(rng.integers(len(frontier)))]
    tree.solution[target] = True
    on_path = set(tree.ancestors(target))
    tree.eta_values = [1.0 if n in on_path else math.inf for n in range(len(tree))]
    return tree


def chain_tree(
    branch_probs: Sequence[float],
    length: int,
    loss: float = 1.0,
    root_loss: float = 0.0,
    seed: Optional[int] = None,
) -> SynthTree:
    """Root with one chain per branch; chain nodes have a single child with
    conditional 1. No solutions. With a seed, nodes get random h in
    [0, length]."""
    rng = np.random.default_rng(seed)

    def h() -> float:
        return float(rng.uniform(0.0, length)) if seed is not None else 0.0

    tree = SynthTree(problem_id=f"chains-{len(branch_probs)}-{seed}")
    tree.add_node(loss=root_loss, h=h())
    for prob in branch_probs:
        node = tree.add_node(0, prob, loss, h=h())
        for _ in range(length - 1):
            node = tree.add_node(node, 1.0, loss, h=h())
    return tree


def unroll_problem(
    problem: Problem,
    max_depth: int,
    heuristic: Optional[Callable[[Any], float]] = None,
    skip_grandparent: bool = True,
    max_nodes: int = 100_000,
) -> SynthTree:
    """Explicit search tree of `problem` down to `max_depth`, uniform
    conditionals over the generated children, aliased by state key.

    With `skip_grandparent`, a child whose state equals its grandparent's
    is dropped (immediate move reversal).
    """
    tree = SynthTree(problem_id=f"unrolled-{problem.problem_id}")
    state_ids: Dict[bytes, int] = {}
    states: List[Any] = []

    def state_id(state: Any) -> int:
        return state_ids.setdefault(problem.state_key(state), len(state_ids))

    def add(state: Any, parent: int, cond: float, loss: float) -> int:
        states.append(state)
        return tree.add_node(
            parent,
            cond,
            loss,
            h=heuristic(state) if heuristic else 0.0,
            solution=problem.is_solution(state),
            state=state_id(state),
        )

    add(problem.initial_state(), -1, 1.0, problem.root_loss())
    queue = deque([0])
    while queue:
        node = queue.popleft()
        if tree.depth[node] >= max_depth:
            continue
        transitions = problem.expand(states[node])
        if skip_grandparent and tree.parent[node] >= 0:
            grandparent = tree.state_of[tree.parent[node]]
            transitions = [t for t in transitions if state_id(t.state) != grandparent]
        for t in transitions:
            queue.append(add(t.state, node, 1.0 / len(transitions), t.loss))
            if len(tree) > max_nodes:
                raise ConfigError(f"unrolled tree exceeds {max_nodes} nodes")
    tree.states = states
    return tree


def _tree_entry(tree: SynthTree) -> dict:
    """Node arrays, for trees that no spec describes."""
    return {
        "id": tree.problem_id,
        "children": [list(kids) for kids in tree.children],
        "cond": list(tree.cond),
        "loss": list(tree.loss),
        "eta": list(tree.eta_values),
        "h": list(tree.h),
        "solutions": tree.solutions,
        "states": list(tree.state_of),
    }


def _entry_tree(entry: dict, i: int) -> SynthTree:
    if "children" in entry:
        return SynthTree.from_children(
            entry["children"],
            cond=entry.get("cond"),
            loss=entry.get("loss"),
            eta=entry.get("eta"),
            h=entry.get("h"),
            solutions=entry.get("solutions") or (),
            states=entry.get("states"),
            problem_id=str(entry.get("id", i)),
        )
    fields = {
        key: tuple(value) if isinstance(value, list) else value
        for key, value in (entry.get("spec") or {}).items()
    }
    return build_synth_tree(SynthTreeSpec(**fields), int(entry["seed"]), str(entry.get("id", i)))


def parse_synth_file(text: str) -> List[SynthTree]:
    """YAML list of {id, seed, spec} entries, or {id, children, cond, loss,
    eta, h, solutions, states} entries holding the node arrays."""
    try:
        entries = yaml.safe_load(text) or []
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError(str(e), mark.line + 1 if mark else None)
    trees = []
    for i, entry in enumerate(entries):
        try:
            trees.append(_entry_tree(entry, i))
        except (TypeError, KeyError, AttributeError, IndexError, ValueError, ConfigError) as e:
            raise ParseError(f"entry {i}: {e}")
    return trees


def serialize_synth(trees: Sequence[SynthTree]) -> str:
    entries = []
    for tree in trees:
        if tree.spec is None:
            entries.append(_tree_entry(tree))
            continue
        spec = {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(tree.spec).items()}
        entries.append({"id": tree.problem_id, "seed": tree.seed, "spec": spec})
    return yaml.safe_dump(entries, sort_keys=False)
