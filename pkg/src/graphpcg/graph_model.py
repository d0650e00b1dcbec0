"""Extended adjacency matrices and the flat action <-> cell index mapping.

A graph of at most ``n`` nodes is stored as an ``n x n`` matrix whose
diagonal carries node-type codes and whose strict lower triangle carries
undirected edge indicators.  Unused rows are padded with the empty type.
The upper triangle is never used.

Cells of the strict lower triangle are enumerated in row-major order and
addressed by 1-based action indices::

    a = 1 -> (1, 0)
    a = 2 -> (2, 0)
    a = 3 -> (2, 1)
    a = 4 -> (3, 0)
    ...
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError

EMPTY_NAME = "_empty"

# observation symbols: off-diagonal cells use NO_EDGE/EDGE, diagonal cells
# use TYPE_OFFSET + type code
NO_EDGE = 0
EDGE = 1
TYPE_OFFSET = 2


@dataclass(frozen=True)
class NodeType:
    code: int
    name: str
    is_empty: bool = False

    def __str__(self) -> str:
        return self.name


class Alphabet:
    """Dense, ordered set of node types with exactly one empty type.

    Real types get codes ``0..k-1`` in declaration order; the empty
    padding type gets code ``k``.  ``aliases`` maps display names
    (``"Source"``) onto symbolic type names (``"U"``).
    """

    def __init__(self, names: Sequence[str], aliases: Mapping[str, str] | None = None):
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate type names in {list(names)}")
        if EMPTY_NAME in names:
            raise ValueError(f"{EMPTY_NAME!r} is reserved for the empty type")
        real = tuple(NodeType(i, name) for i, name in enumerate(names))
        self.real: tuple[NodeType, ...] = real
        self.empty = NodeType(len(real), EMPTY_NAME, is_empty=True)
        self.types: tuple[NodeType, ...] = real + (self.empty,)
        self.aliases: dict[str, str] = dict(aliases or {})
        self._display = {sym: disp for disp, sym in self.aliases.items()}
        self._by_name = {t.name: t for t in self.types}
        for disp, sym in self.aliases.items():
            if sym not in self._by_name:
                raise ValueError(f"alias {disp!r} points at unknown type {sym!r}")
            self._by_name.setdefault(disp, self._by_name[sym])

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, key: str | int) -> NodeType:
        if isinstance(key, (int, np.integer)):
            return self.types[int(key)]
        try:
            return self._by_name[key]
        except KeyError:
            raise KeyError(f"unknown node type {key!r}") from None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Alphabet)
            and self.types == other.types
            and self.aliases == other.aliases
        )

    def __hash__(self) -> int:
        return hash((self.types, tuple(sorted(self.aliases.items()))))

    def __repr__(self) -> str:
        return f"Alphabet({[t.name for t in self.real]!r})"

    @property
    def n_symbols(self) -> int:
        """One-hot depth: no-edge, edge, each real type, empty."""
        return TYPE_OFFSET + len(self.types)

    def display(self, t: NodeType | int) -> str:
        if not isinstance(t, NodeType):
            t = self.types[int(t)]
        return self._display.get(t.name, t.name)


class CellIndex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GraphConfig:
    """Target node counts per real type.

    ``counts`` is indexed by type code and has one entry per real type of
    the alphabet; zero entries are allowed.
    """

    alphabet: Alphabet
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != len(self.alphabet.real):
            raise ConfigurationError(
                f"expected {len(self.alphabet.real)} counts, got {len(counts)}"
            )
        if any(c < 0 for c in counts):
            raise ConfigurationError(f"negative node count in {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, alphabet: Alphabet, counts: Mapping[str | NodeType, int]):
        values = [0] * len(alphabet.real)
        for key, count in counts.items():
            try:
                t = key if isinstance(key, NodeType) else alphabet[key]
            except KeyError as exc:
                raise ConfigurationError(str(exc)) from None
            if t.is_empty:
                raise ConfigurationError("the empty type cannot be configured")
            values[t.code] += int(count)
        return cls(alphabet, tuple(values))

    @classmethod
    def parse(cls, alphabet: Alphabet, text: str) -> "GraphConfig":
        """Parse ``"U=2,V=2,W=1"`` (display names are accepted too)."""
        counts: dict[str, int] = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            name, sep, value = part.partition("=")
            if not sep:
                raise ConfigurationError(f"expected Type=count, got {part!r}")
            try:
                n = int(value)
            except ValueError:
                raise ConfigurationError(f"count for {name!r} is not an integer") from None
            counts[name.strip()] = counts.get(name.strip(), 0) + n
        if not counts:
            raise ConfigurationError("empty configuration")
        return cls.from_mapping(alphabet, counts)

    @property
    def size(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, int]:
        return {self.alphabet.display(t): c for t, c in zip(self.alphabet.real, self.counts)}

    def __str__(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.as_dict().items())


class GraphState:
    """Immutable extended adjacency matrix.

    Parameters
    ----------
    diagonal : array_like of int
        Node-type code per row; ``empty_code`` marks padding.
    edges : array_like, shape (n, n)
        Edge indicators; only the strict lower triangle is read.
    empty_code : int
        Code of the empty type.
    """

    __slots__ = ("diagonal", "edges", "empty_code", "_key")

    def __init__(self, diagonal, edges, empty_code: int):
        diag = np.array(diagonal, dtype=np.int64).reshape(-1)
        n = diag.shape[0]
        e = np.array(edges, dtype=np.uint8)
        if e.shape != (n, n):
            raise ValueError(f"edge matrix shape {e.shape} does not match {n} nodes")
        e = np.tril(e, -1)
        if e.max(initial=0) > 1:
            raise ValueError("edge cells must be 0 or 1")
        diag.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "empty_code", int(empty_code))
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("GraphState is immutable")

    @classmethod
    def from_edge_list(cls, diagonal, edge_list: Iterable[tuple[int, int]], empty_code: int):
        diag = list(diagonal)
        m = np.zeros((len(diag), len(diag)), dtype=np.uint8)
        for a, b in edge_list:
            r, c = max(a, b), min(a, b)
            if r == c:
                raise ValueError(f"self-loop at node {r}")
            m[r, c] = 1
        return cls(diag, m, empty_code)

    @property
    def n(self) -> int:
        return self.diagonal.shape[0]

    def __len__(self) -> int:
        return self.n

    def _keybytes(self):
        if self._key is None:
            key = (self.empty_code, self.diagonal.tobytes(), self.edges.tobytes())
            object.__setattr__(self, "_key", key)
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphState):
            return NotImplemented
        return self._keybytes() == other._keybytes()

    def __hash__(self) -> int:
        return hash(self._keybytes())

    def __repr__(self) -> str:
        return f"GraphState(diagonal={self.diagonal.tolist()}, edges={self.edge_list()})"

    def adjacency(self) -> np.ndarray:
        """Symmetric boolean adjacency matrix (zero diagonal)."""
        e = self.edges.astype(bool)
        return e | e.T

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        return bool(self.edges[max(i, j), min(i, j)])

    def edge_list(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.edges)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def is_empty_node(self, i: int) -> bool:
        return int(self.diagonal[i]) == self.empty_code

    def real_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.diagonal != self.empty_code)

    def eligible_cells(self) -> list[CellIndex]:
        """Lower-triangle cells between two non-empty nodes, row-major."""
        real = self.diagonal != self.empty_code
        return [
            CellIndex(r, c)
            for r in range(1, self.n)
            if real[r]
            for c in range(r)
            if real[c]
        ]

    def symbols(self) -> np.ndarray:
        """Symbol matrix used for one-hot encoding (upper triangle = no edge)."""
        s = self.edges.astype(np.int64)
        s[np.diag_indices(self.n)] = self.diagonal + TYPE_OFFSET
        return s

    def with_edges(self, edges) -> "GraphState":
        return GraphState(self.diagonal, edges, self.empty_code)


def triang(n: int) -> int:
    """n-th triangular number n(n+1)/2."""
    if n < 0:
        raise ValueError(f"triang undefined for negative n={n}")
    return n * (n + 1) // 2


def n_cells(n: int) -> int:
    """Number of strict lower-triangle cells of an ``n x n`` matrix."""
    return triang(n - 1) if n > 0 else 0


def action_to_cell(a: int, n: int) -> CellIndex:
    """Map a 1-based action index onto its lower-triangle cell.

    The row is the triangular root ``ceil((-1 + sqrt(1 + 8a)) / 2)``,
    computed with integer arithmetic so it stays exact for large ``a``.
    """
    a = int(a)
    if not 1 <= a <= n_cells(n):
        raise ValueError(f"action {a} outside [1, {n_cells(n)}] for n={n}")
    row = (math.isqrt(8 * a + 1) - 1) // 2
    if triang(row) < a:
        row += 1
    return CellIndex(row, a - triang(row - 1) - 1)


def cell_to_action(cell: tuple[int, int]) -> int:
    row, col = int(cell[0]), int(cell[1])
    if not 0 <= col < row:
        raise ValueError(f"cell {(row, col)} is not strictly lower triangular")
    return triang(row - 1) + col + 1


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_random(config: GraphConfig, max_size: int, edge_prob: float = 0.5, seed=None) -> GraphState:
    """Random starting graph for ``config`` padded to ``max_size``.

    Type codes are placed in uniformly shuffled order followed by empty
    padding; each cell between two real nodes is an edge with probability
    ``edge_prob``.  ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if config.size < 1:
        raise ConfigurationError("configuration has no nodes")
    if config.size > max_size:
        raise ConfigurationError(f"configuration size {config.size} exceeds max size {max_size}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must be a probability, got {edge_prob}")
    rng = _rng(seed)
    codes = np.repeat(np.arange(len(config.counts)), config.counts)
    codes = rng.permutation(codes)
    empty = config.alphabet.empty.code
    diagonal = np.concatenate([codes, np.full(max_size - config.size, empty)])
    noise = rng.random((max_size, max_size)) < edge_prob
    real = diagonal != empty
    edges = np.tril(noise & real[:, None] & real[None, :], -1)
    return GraphState(diagonal, edges.astype(np.uint8), empty)


def toggle_edge(state: GraphState, cell: tuple[int, int]) -> GraphState:
    row, col = int(cell[0]), int(cell[1])
    if not (0 <= col < row < state.n):
        raise ValueError(f"cell {(row, col)} is not a lower-triangle cell of a size-{state.n} matrix")
    edges = state.edges.copy()
    edges[row, col] ^= 1
    return state.with_edges(edges)


def graph_to_dict(state: GraphState, alphabet: Alphabet) -> dict:
    """JSON-ready dict; empty nodes are omitted, edges are [row, col] pairs."""
    nodes = [
        {"id": int(i), "type": alphabet.display(int(state.diagonal[i]))}
        for i in state.real_nodes()
    ]
    edges = [[r, c] for r, c in state.edge_list()]
    return {"nodes": nodes, "edges": edges}


def graph_from_dict(data: Mapping, alphabet: Alphabet, max_size: int | None = None) -> GraphState:
    try:
        nodes = data["nodes"]
        edges = data.get("edges", [])
    except (KeyError, AttributeError, TypeError):
        raise ValueError("graph JSON needs a 'nodes' list") from None
    ids = [int(nd["id"]) for nd in nodes]
    if len(set(ids)) != len(ids) or min(ids, default=0) < 0:
        raise ValueError("node ids must be unique")
    n = max(ids, default=-1) + 1
    if max_size is not None:
        if n > max_size:
            raise ConfigurationError(f"graph has {n} nodes, more than max size {max_size}")
        n = max_size
    diagonal = [alphabet.empty.code] * n
    for nd in nodes:
        t = alphabet[nd["type"]]
        diagonal[int(nd["id"])] = t.code
    edge_list = []
    for pair in edges:
        a, b = int(pair[0]), int(pair[1])
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"edge {pair} references a missing node")
        edge_list.append((a, b))
    return GraphState.from_edge_list(diagonal, edge_list, alphabet.empty.code)
