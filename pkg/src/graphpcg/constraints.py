"""Constraint sets: required neighbour types per node type.

A constraint file is a JSON object mapping each node type to the list of
types it must be directly connected to (at least one neighbour of each).
The same lists define which type pairs may share an edge at all: a pair is
allowed when either side lists the other.  The empty padding type requires
nothing and may not be connected to anything.

Violations are counted per node as

* one per required type without an adjacent node of that type, plus
* one per incident edge whose type pair is not allowed,

so a single disallowed edge adds 2 to the total (once per endpoint).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ConstraintParseError
from .graph_model import Alphabet, GraphConfig, GraphState, NodeType

ALIASES_KEY = "_aliases"
BUILTIN_SETS = ("set1", "set2", "set3", "set4", "set5", "economy", "skilltree")


class ConstraintSet:
    """Parsed, immutable constraint set.

    Attributes
    ----------
    alphabet : Alphabet
        Declared types plus the empty type.
    requires : dict[NodeType, tuple[NodeType, ...]]
        Required neighbour types, in file order.
    required : ndarray of bool, shape (k+1, k+1)
        ``required[a, b]`` is true when type ``a`` needs a ``b`` neighbour.
    allowed : ndarray of bool, shape (k+1, k+1)
        Symmetric allowance matrix; the empty row/column is all false.
    """

    def __init__(self, requires: Mapping[str, Sequence[str]], aliases: Mapping[str, str] | None = None,
                 source: str | None = None):
        names = list(requires)
        if not names:
            raise ConstraintParseError("constraint set declares no node types")
        try:
            alphabet = Alphabet(names, aliases)
        except ValueError as exc:
            raise ConstraintParseError(str(exc)) from None
        k = len(alphabet)
        required = np.zeros((k, k), dtype=bool)
        req: dict[NodeType, tuple[NodeType, ...]] = {}
        for name, targets in requires.items():
            if isinstance(targets, str) or not isinstance(targets, Sequence):
                raise ConstraintParseError(f"requirements of {name!r} must be a list of type names")
            listed = []
            for target in targets:
                if not isinstance(target, str) or target not in names:
                    raise ConstraintParseError(f"type {name!r} requires undeclared type {target!r}")
                t = alphabet[target]
                if t in listed:
                    raise ConstraintParseError(f"type {name!r} lists {target!r} twice")
                listed.append(t)
                required[alphabet[name].code, t.code] = True
            req[alphabet[name]] = tuple(listed)
        req[alphabet.empty] = ()
        self.alphabet = alphabet
        self.requires = req
        self.required = required
        self.allowed = required | required.T
        self.source = source
        for arr in (self.required, self.allowed):
            arr.flags.writeable = False
        asym = [
            (a.name, b.name)
            for a in alphabet.real
            for b in alphabet.real
            if required[a.code, b.code] and not required[b.code, a.code]
        ]
        if asym:
            warnings.warn(
                f"asymmetric constraint set, allowance closed symmetrically for pairs {asym}",
                stacklevel=2,
            )

    def __repr__(self) -> str:
        body = ", ".join(f"{t.name}: {[r.name for r in rs]}" for t, rs in self.requires.items() if not t.is_empty)
        return f"ConstraintSet({{{body}}})"

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstraintSet) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    @property
    def n_rules(self) -> int:
        return int(self.required.sum())

    @property
    def types(self) -> tuple[NodeType, ...]:
        return self.alphabet.real

    def to_dict(self) -> dict:
        out: dict = {}
        if self.alphabet.aliases:
            out[ALIASES_KEY] = dict(self.alphabet.aliases)
        for t in self.alphabet.real:
            out[t.name] = [r.name for r in self.requires[t]]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def type(self, name: str | int) -> NodeType:
        return self.alphabet[name]

    def config(self, counts: Mapping[str, int] | str | None = None, **kw: int) -> GraphConfig:
        """Build a configuration: ``cs.config(U=2, V=1)`` or ``cs.config("U=2,V=1")``."""
        if isinstance(counts, str):
            cfg = GraphConfig.parse(self.alphabet, counts)
        else:
            merged = dict(counts or {})
            merged.update(kw)
            cfg = GraphConfig.from_mapping(self.alphabet, merged)
        return cfg

    def min_count(self, t: NodeType) -> int:
        """Smallest count of ``t`` that can be valid: 2 if it requires its own type."""
        return 2 if self.required[t.code, t.code] else 1

    def check_feasible(self, config: GraphConfig, max_size: int | None = None) -> None:
        """Raise ConfigurationError unless a valid graph with these counts exists.

        Every declared type must be present (at least twice when it requires
        its own type).  Under that condition connecting every allowed pair
        yields a valid graph.
        """
        if config.alphabet != self.alphabet:
            raise ConfigurationError("configuration belongs to a different alphabet")
        if max_size is not None and config.size > max_size:
            raise ConfigurationError(f"configuration size {config.size} exceeds max size {max_size}")
        short = [
            f"{self.alphabet.display(t)}>={self.min_count(t)}"
            for t, c in zip(self.alphabet.real, config.counts)
            if c < self.min_count(t)
        ]
        if short:
            raise ConfigurationError(f"infeasible configuration {config}: need {', '.join(short)}")

    def min_size(self) -> int:
        return sum(self.min_count(t) for t in self.alphabet.real)


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConstraintParseError(f"duplicate key {key!r}")
        out[key] = value
    return out


def parse_constraint_set(text: str, source: str | None = None) -> ConstraintSet:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConstraintParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConstraintParseError("constraint file must be a JSON object")
    aliases = data.pop(ALIASES_KEY, None)
    if aliases is not None and not (
        isinstance(aliases, dict) and all(isinstance(v, str) for v in aliases.values())
    ):
        raise ConstraintParseError(f"{ALIASES_KEY} must map display names to type names")
    if not data:
        raise ConstraintParseError("constraint set is empty")
    if aliases:
        missing = [v for v in aliases.values() if v not in data]
        if missing:
            raise ConstraintParseError(f"aliases reference undeclared types {missing}")
    return ConstraintSet(data, aliases, source=source)


def load_constraint_set(path_or_name: str | Path) -> ConstraintSet:
    """Load a constraint file, or a bundled set by name (``"set1"`` .. ``"set5"``,
    ``"economy"``, ``"skilltree"``; ``"builtin:set1"`` also works)."""
    name = str(path_or_name)
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    if name in BUILTIN_SETS:
        text = resources.files("graphpcg.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
        return parse_constraint_set(text, source=f"builtin:{name}")
    path = Path(path_or_name)
    return parse_constraint_set(path.read_text(encoding="utf-8"), source=str(path))


def edge_allowed(cs: ConstraintSet, a: NodeType | str, b: NodeType | str) -> bool:
    a = cs.type(a) if isinstance(a, str) else a
    b = cs.type(b) if isinstance(b, str) else b
    return bool(cs.allowed[a.code, b.code])


@dataclass(frozen=True)
class ViolationReport:
    per_node: tuple[int, ...]
    missing_required: int
    disallowed_edges: int

    @property
    def total(self) -> int:
        return self.missing_required + self.disallowed_edges

    @property
    def valid(self) -> bool:
        return self.total == 0


def _violation_parts(cs: ConstraintSet, diagonal: np.ndarray, adj: np.ndarray):
    """Per-node (missing, disallowed) counts for a symmetric boolean adjacency."""
    k = cs.required.shape[0]
    onehot = np.eye(k, dtype=np.int64)[diagonal]
    present = (adj.astype(np.int64) @ onehot) > 0
    missing = (cs.required[diagonal] & ~present).sum(axis=1)
    disallowed = (adj & ~cs.allowed[np.ix_(diagonal, diagonal)]).sum(axis=1)
    return missing, disallowed


def violation_vector(cs: ConstraintSet, g: GraphState) -> np.ndarray:
    missing, disallowed = _violation_parts(cs, g.diagonal, g.adjacency())
    return missing + disallowed


def node_violations(cs: ConstraintSet, g: GraphState, i: int) -> int:
    if not 0 <= i < g.n:
        raise IndexError(f"node {i} outside graph of size {g.n}")
    return int(violation_vector(cs, g)[i])


def total_violations(cs: ConstraintSet, g: GraphState) -> ViolationReport:
    missing, disallowed = _violation_parts(cs, g.diagonal, g.adjacency())
    return ViolationReport(
        per_node=tuple(int(x) for x in missing + disallowed),
        missing_required=int(missing.sum()),
        disallowed_edges=int(disallowed.sum()),
    )


def violation_total(cs: ConstraintSet, g: GraphState) -> int:
    missing, disallowed = _violation_parts(cs, g.diagonal, g.adjacency())
    return int(missing.sum() + disallowed.sum())


def is_valid(cs: ConstraintSet, g: GraphState) -> bool:
    return violation_total(cs, g) == 0


def batch_violation_totals(cs: ConstraintSet, diagonal: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Violation totals for a stack of symmetric adjacencies ``(P, n, n)``
    sharing one diagonal."""
    k = cs.required.shape[0]
    onehot = np.eye(k, dtype=np.int64)[diagonal]
    present = (adj.astype(np.int64) @ onehot) > 0
    missing = (cs.required[diagonal][None] & ~present).sum(axis=(1, 2))
    disallowed = (adj & ~cs.allowed[np.ix_(diagonal, diagonal)][None]).sum(axis=(1, 2))
    return missing + disallowed


class MaskChecker:
    """Incremental violation counter over per-node neighbour bitmasks.

    Used by the search baselines, which toggle one cell at a time and need
    a cheap validity test after every toggle.
    """

    def __init__(self, cs: ConstraintSet, g: GraphState):
        diag = [int(c) for c in g.diagonal]
        self.n = len(diag)
        self.diagonal = diag
        k = len(cs.alphabet)
        type_mask = [0] * k
        for i, c in enumerate(diag):
            type_mask[c] |= 1 << i
        self.required_masks = [
            [type_mask[t] for t in range(k) if cs.required[c, t]] for c in diag
        ]
        self.bad_masks = [
            sum(type_mask[t] for t in range(k) if not cs.allowed[c, t]) for c in diag
        ]
        self.nbr = [0] * self.n
        for r, c in g.edge_list():
            self.nbr[r] |= 1 << c
            self.nbr[c] |= 1 << r

    def toggle(self, row: int, col: int) -> None:
        self.nbr[row] ^= 1 << col
        self.nbr[col] ^= 1 << row

    def node_total(self, i: int) -> int:
        m = self.nbr[i]
        miss = 0
        for tm in self.required_masks[i]:
            if not m & tm:
                miss += 1
        return miss + (m & self.bad_masks[i]).bit_count()

    def total(self) -> int:
        return sum(self.node_total(i) for i in range(self.n))

    def valid(self) -> bool:
        for i in range(self.n):
            m = self.nbr[i]
            if m & self.bad_masks[i]:
                return False
            for tm in self.required_masks[i]:
                if not m & tm:
                    return False
        return True

    def to_state(self, empty_code: int) -> GraphState:
        edges = np.zeros((self.n, self.n), dtype=np.uint8)
        for r in range(self.n):
            m = self.nbr[r]
            for c in range(r):
                if m >> c & 1:
                    edges[r, c] = 1
        return GraphState(self.diagonal, edges, empty_code)
