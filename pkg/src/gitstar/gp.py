"""Expression trees over the planning primitive set and the genetic operators.

Trees are stored in prefix order as a flat tuple of nodes, in the style of
gplearn programs: a node is a function name, a terminal name or a float
(an ephemeral constant).  Evaluation works on scalars and on numpy arrays
alike, so the planner can key every edge out of a vertex in one call.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path as FsPath
from typing import Callable, Mapping, Sequence, Union

import numpy as np

Node = Union[str, float]
Value = Union[float, np.ndarray]

FUNCTIONS: dict[str, int] = {
    "ADD": 2,
    "SUB": 2,
    "MUL": 2,
    "PDIV": 2,
    "PLOG1P": 1,
    "PSQRT": 1,
    "ABS": 1,
    "MIN": 2,
    "MAX": 2,
}

VARIABLES = (
    "G_HAT_T",
    "H_HAT_T",
    "C_HAT",
    "E_BAR_S",
    "E_BAR_EDGE",
    "D_BAR_T",
    "DIM",
    "U_S",
    "U_T",
    "W_DYN",
    "N_SAMPLES",
)
CONSTANTS = {"CONST_PI": math.pi, "CONST_ONE": 1.0}
TERMINALS = VARIABLES + tuple(CONSTANTS)
EPHEMERAL_RANGE = (0.0, 10.0)

MAX_DEPTH = 4
# node outputs are clipped here so products of clipped values stay finite
VALUE_BOUND = 1e150
PDIV_EPS = 1e-12


class StructureError(ValueError):
    """Malformed expression tree or S-expression text."""


def _arity(node: Node) -> int:
    return FUNCTIONS.get(node, 0) if isinstance(node, str) else 0


def _pdiv(a: Value, b: Value) -> Value:
    ok = np.abs(b) > PDIV_EPS
    return np.where(ok, a / np.where(ok, b, 1.0), 1.0)


_OPS: dict[str, Callable[..., Value]] = {
    "ADD": np.add,
    "SUB": np.subtract,
    "MUL": np.multiply,
    "PDIV": _pdiv,
    "PLOG1P": lambda a: np.log1p(np.abs(a)),
    "PSQRT": lambda a: np.sqrt(np.abs(a)),
    "ABS": np.abs,
    "MIN": np.minimum,
    "MAX": np.maximum,
}


def _bound(x: Value) -> Value:
    return np.clip(x, -VALUE_BOUND, VALUE_BOUND)


@dataclass(frozen=True)
class EdgeContext:
    """Terminal values for one (x_s, x_t) edge query."""

    g_hat_t: float = 0.0
    h_hat_t: float = 0.0
    c_hat: float = 0.0
    e_bar_s: float = 0.0
    e_bar_edge: float = 0.0
    d_bar_t: float = 0.0
    dim: float = 2.0
    u_s: float = 0.0
    u_t: float = 0.0
    w_dyn: float = 0.0
    n_samples: float = 0.0

    def as_mapping(self) -> dict[str, float]:
        return {f.name.upper(): float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class ExprTree:
    nodes: tuple[Node, ...]

    def __post_init__(self) -> None:
        nodes = tuple(n if isinstance(n, str) else float(n) for n in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes:
            raise StructureError("empty tree")
        need = 1
        for i, node in enumerate(nodes):
            if need == 0:
                raise StructureError(f"trailing nodes after position {i}")
            if isinstance(node, str) and node not in FUNCTIONS and node not in TERMINALS:
                raise StructureError(f"unknown primitive {node!r}")
            need += _arity(node) - 1
        if need != 0:
            raise StructureError("tree is missing operands")

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        """Depth of the deepest node, the root being at depth 0."""
        deepest = 0
        stack: list[int] = []  # remaining operands for each open function
        for node in self.nodes:
            deepest = max(deepest, len(stack))
            a = _arity(node)
            if a:
                stack.append(a)
            else:
                while stack:
                    stack[-1] -= 1
                    if stack[-1]:
                        break
                    stack.pop()
        return deepest

    def subtree_end(self, start: int) -> int:
        need = 1
        i = start
        while need:
            need += _arity(self.nodes[i]) - 1
            i += 1
        return i

    @property
    def node_depths(self) -> list[int]:
        depths = []
        stack: list[int] = []
        for node in self.nodes:
            depths.append(len(stack))
            a = _arity(node)
            if a:
                stack.append(a)
            else:
                while stack:
                    stack[-1] -= 1
                    if stack[-1]:
                        break
                    stack.pop()
        return depths

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(_arity(n) for n in self.nodes)

    def compile(self) -> Callable[[Mapping[str, Value]], Value]:
        fn, end = _compile(self.nodes, 0)
        return fn

    def evaluate(self, ctx: Mapping[str, Value] | EdgeContext) -> Value:
        if isinstance(ctx, EdgeContext):
            ctx = ctx.as_mapping()
        out = _compiled(self)(ctx)
        return float(out) if np.ndim(out) == 0 else out

    def to_sexpr(self) -> str:
        out, _ = _render(self.nodes, 0)
        return out

    @classmethod
    def parse(cls, text: str) -> "ExprTree":
        tokens = re.findall(r"\(|\)|[^\s()]+", text)
        if not tokens:
            raise StructureError("empty expression")
        nodes: list[Node] = []
        pos = _parse(tokens, 0, nodes)
        if pos != len(tokens):
            raise StructureError(f"unexpected trailing tokens in {text!r}")
        return cls(tuple(nodes))

    def __str__(self) -> str:
        return self.to_sexpr()


def _compile(nodes: Sequence[Node], i: int) -> tuple[Callable[[Mapping[str, Value]], Value], int]:
    node = nodes[i]
    if not isinstance(node, str):
        value = float(node)
        return (lambda ctx: value), i + 1
    if node in CONSTANTS:
        value = CONSTANTS[node]
        return (lambda ctx: value), i + 1
    if node not in FUNCTIONS:
        return (lambda ctx: _bound(ctx[node])), i + 1
    op = _OPS[node]
    args = []
    j = i + 1
    for _ in range(FUNCTIONS[node]):
        fn, j = _compile(nodes, j)
        args.append(fn)
    if len(args) == 1:
        (a,) = args
        return (lambda ctx: _bound(op(a(ctx)))), j
    a, b = args
    return (lambda ctx: _bound(op(a(ctx), b(ctx)))), j


_COMPILE_CACHE: dict[tuple[Node, ...], Callable[[Mapping[str, Value]], Value]] = {}


def _compiled(tree: ExprTree) -> Callable[[Mapping[str, Value]], Value]:
    fn = _COMPILE_CACHE.get(tree.nodes)
    if fn is None:
        if len(_COMPILE_CACHE) > 20_000:
            _COMPILE_CACHE.clear()
        fn = _COMPILE_CACHE[tree.nodes] = tree.compile()
    return fn


def _render(nodes: Sequence[Node], i: int) -> tuple[str, int]:
    node = nodes[i]
    if not isinstance(node, str):
        return repr(float(node)), i + 1
    if node not in FUNCTIONS:
        return node, i + 1
    parts = [node]
    j = i + 1
    for _ in range(FUNCTIONS[node]):
        s, j = _render(nodes, j)
        parts.append(s)
    return "(" + " ".join(parts) + ")", j


def _parse(tokens: list[str], pos: int, out: list[Node]) -> int:
    tok = tokens[pos]
    if tok == "(":
        name = tokens[pos + 1] if pos + 1 < len(tokens) else ""
        if name not in FUNCTIONS:
            raise StructureError(f"expected a function name, got {name!r}")
        out.append(name)
        pos += 2
        for _ in range(FUNCTIONS[name]):
            if pos >= len(tokens):
                raise StructureError("unbalanced expression")
            pos = _parse(tokens, pos, out)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise StructureError(f"{name} takes {FUNCTIONS[name]} arguments")
        return pos + 1
    if tok == ")":
        raise StructureError("unexpected ')'")
    if tok in TERMINALS:
        out.append(tok)
    else:
        try:
            out.append(float(tok))
        except ValueError:
            raise StructureError(f"unknown terminal {tok!r}") from None
    return pos + 1


@dataclass(frozen=True)
class ExprIndividual:
    """A G-heuristic: two trees producing a lexicographic (primary, tiebreak) key."""

    primary: ExprTree
    tiebreak: ExprTree
    fitness: float | None = field(default=None, compare=False)

    @property
    def size(self) -> int:
        return self.primary.size + self.tiebreak.size

    @property
    def depth(self) -> int:
        return max(self.primary.depth, self.tiebreak.depth)

    def key(self, ctx: Mapping[str, Value] | EdgeContext) -> tuple[Value, Value]:
        return self.primary.evaluate(ctx), self.tiebreak.evaluate(ctx)

    def with_fitness(self, rho: float) -> "ExprIndividual":
        return replace(self, fitness=float(rho))

    def to_text(self) -> str:
        return f"{self.primary.to_sexpr()}\n{self.tiebreak.to_sexpr()}\n"

    @property
    def signature(self) -> str:
        return self.primary.to_sexpr() + " | " + self.tiebreak.to_sexpr()

    @classmethod
    def from_text(cls, text: str) -> "ExprIndividual":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if len(lines) != 2:
            raise StructureError(f"a heuristic file holds exactly two expressions, found {len(lines)}")
        return cls(ExprTree.parse(lines[0]), ExprTree.parse(lines[1]))

    @classmethod
    def parse(cls, primary: str, tiebreak: str) -> "ExprIndividual":
        return cls(ExprTree.parse(primary), ExprTree.parse(tiebreak))


def save_heuristic(ind: ExprIndividual, path: str | FsPath) -> None:
    FsPath(path).write_text(ind.to_text())


def load_heuristic(path: str | FsPath) -> ExprIndividual:
    return ExprIndividual.from_text(FsPath(path).read_text())


# The evolved winner key.  PLOG1P already takes |.|, so no ABS is needed and the
# primary tree fits the depth cap; log(max(d, 1)) is written as log1p(max(d, 1) - 1).
WINNER = ExprIndividual.parse(
    "(MUL (SUB G_HAT_T CONST_PI) (PDIV (PLOG1P (SUB U_T U_S)) (ADD CONST_ONE W_DYN)))",
    "(MUL (PSQRT (ADD E_BAR_S E_BAR_EDGE)) (PLOG1P (SUB (MAX D_BAR_T CONST_ONE) CONST_ONE)))",
)
BASELINE = ExprIndividual.parse("(ADD (ADD G_HAT_T C_HAT) H_HAT_T)", "(ADD E_BAR_S E_BAR_EDGE)")
CONSTANT = ExprIndividual.parse("CONST_ONE", "CONST_ONE")


# --------------------------------------------------------------------------- operators


def _random_terminal(rng: np.random.Generator) -> Node:
    k = int(rng.integers(len(TERMINALS) + 1))
    if k == len(TERMINALS):
        return float(rng.uniform(*EPHEMERAL_RANGE))
    return TERMINALS[k]


_FUNCTION_NAMES = tuple(FUNCTIONS)
_BY_ARITY = {a: tuple(f for f, k in FUNCTIONS.items() if k == a) for a in set(FUNCTIONS.values())}


def random_tree(rng: np.random.Generator, depth: int, method: str = "grow") -> ExprTree:
    """A tree no deeper than ``depth``; "full" puts every leaf at exactly ``depth``."""
    if method not in ("full", "grow"):
        raise ValueError(f"unknown init method {method!r}")
    nodes: list[Node] = []
    n_prims = len(_FUNCTION_NAMES) + len(TERMINALS) + 1

    def build(level: int) -> None:
        if level == depth:
            nodes.append(_random_terminal(rng))
            return
        if method == "full" or level == 0:
            use_function = True
        else:
            use_function = rng.integers(n_prims) < len(_FUNCTION_NAMES)
        if not use_function:
            nodes.append(_random_terminal(rng))
            return
        name = _FUNCTION_NAMES[int(rng.integers(len(_FUNCTION_NAMES)))]
        nodes.append(name)
        for _ in range(FUNCTIONS[name]):
            build(level + 1)

    build(0)
    return ExprTree(tuple(nodes))


def init_population(
    size: int, rng: np.random.Generator, min_depth: int = 2, max_depth: int = MAX_DEPTH
) -> list[ExprIndividual]:
    """Ramped half-and-half over depths ``min_depth..max_depth``."""
    if size < 2:
        raise ValueError("population size must be at least 2")
    depths = list(range(min_depth, max_depth + 1))
    population = []
    for i in range(size):
        depth = depths[i % len(depths)]
        method = "full" if (i // len(depths)) % 2 == 0 else "grow"
        population.append(
            ExprIndividual(random_tree(rng, depth, method), random_tree(rng, depth, method))
        )
    return population


def tournament_select(
    population: Sequence[ExprIndividual], k: int, rng: np.random.Generator
) -> ExprIndividual:
    """Lowest fitness among ``k`` draws with replacement; ties go to the smaller, then earlier draw."""
    draws = rng.integers(len(population), size=k)
    best = None
    for idx in draws:
        ind = population[int(idx)]
        if ind.fitness is None:
            raise ValueError("tournament over an unevaluated individual")
        if best is None or (ind.fitness, ind.size) < (best.fitness, best.size):
            best = ind
    return best


def _swap(a: ExprTree, b: ExprTree, rng: np.random.Generator, max_depth: int, attempts: int) -> ExprTree:
    for _ in range(attempts):
        i = int(rng.integers(len(a)))
        j = int(rng.integers(len(b)))
        nodes = a.nodes[:i] + b.nodes[j : b.subtree_end(j)] + a.nodes[a.subtree_end(i) :]
        child = ExprTree(nodes)
        if child.depth <= max_depth:
            return child
    return a


def subtree_crossover(
    p1: ExprIndividual,
    p2: ExprIndividual,
    p_c: float,
    rng: np.random.Generator,
    max_depth: int = MAX_DEPTH,
    attempts: int = 10,
) -> ExprIndividual:
    primary, tiebreak = p1.primary, p1.tiebreak
    if rng.random() < p_c:
        primary = _swap(primary, p2.primary, rng, max_depth, attempts)
    if rng.random() < p_c:
        tiebreak = _swap(tiebreak, p2.tiebreak, rng, max_depth, attempts)
    return ExprIndividual(primary, tiebreak)


def _point_mutate_tree(tree: ExprTree, p_m: float, rng: np.random.Generator) -> ExprTree:
    hits = rng.random(len(tree)) < p_m
    if not hits.any():
        return tree
    nodes = list(tree.nodes)
    for i in np.flatnonzero(hits):
        a = _arity(nodes[i])
        if a:
            choices = _BY_ARITY[a]
            nodes[i] = choices[int(rng.integers(len(choices)))]
        else:
            nodes[i] = _random_terminal(rng)
    return ExprTree(tuple(nodes))


def point_mutate(ind: ExprIndividual, p_m: float, rng: np.random.Generator) -> ExprIndividual:
    """Replace each node with probability ``p_m`` by a primitive of the same arity."""
    if p_m <= 0:
        return ind
    return ExprIndividual(
        _point_mutate_tree(ind.primary, p_m, rng), _point_mutate_tree(ind.tiebreak, p_m, rng)
    )
