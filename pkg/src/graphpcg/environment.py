"""Graph editing as a Markov decision process.

Three representations share one episode lifecycle:

``graph_narrow``
    The environment walks a cursor over the lower-triangle cells between
    real nodes in row-major order; the agent answers keep (0) or toggle (1).
    Observation: the two cursor nodes' symmetric rows, each prefixed by
    the node's type.
``graph_wide``
    The agent picks any lower-triangle cell plus a toggle flag.  Flat
    action ``2 * (position - 1) + flag`` with 1-based ``position``.
    Observation: the whole matrix.
``pcgrl_wide``
    Tile-style baseline: the agent writes a value into any cell of the
    full grid.  Flat action ``2 * (row * n + col) + value``.  Writes to
    the diagonal or upper triangle change nothing.

Every step is rewarded with the decrease in total violations, plus
``alpha`` when the resulting graph is valid.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Any

import numpy as np

from .constraints import ConstraintSet, load_constraint_set, parse_constraint_set, violation_total
from .errors import ConfigurationError
from .graph_model import (
    TYPE_OFFSET,
    CellIndex,
    GraphConfig,
    GraphState,
    action_to_cell,
    init_random,
    n_cells,
    toggle_edge,
)


class Representation(str, enum.Enum):
    GRAPH_NARROW = "graph_narrow"
    GRAPH_WIDE = "graph_wide"
    PCGRL_WIDE = "pcgrl_wide"

    def __str__(self) -> str:
        return self.value


DEFAULT_ALPHA = 5.0


@dataclass
class EnvSpec:
    max_size: int
    constraint_set: ConstraintSet
    alpha: float = DEFAULT_ALPHA
    max_changes: int | None = None
    max_iterations: int | None = None
    edge_prob: float = 0.5

    def __post_init__(self):
        cells = n_cells(self.max_size)
        if self.max_changes is None:
            self.max_changes = cells
        if self.max_iterations is None:
            self.max_iterations = 2 * cells
        if self.max_size < self.constraint_set.min_size():
            raise ConfigurationError(
                f"max size {self.max_size} is below the smallest feasible graph "
                f"({self.constraint_set.min_size()} nodes)"
            )
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.max_changes > self.max_iterations:
            raise ValueError("max_changes must not exceed max_iterations")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must be a probability")

    def to_dict(self, representation: Representation | str | None = None) -> dict[str, Any]:
        return {
            "max_size": self.max_size,
            "constraints_path": self.constraint_set.source,
            "alpha": self.alpha,
            "max_changes": self.max_changes,
            "max_iterations": self.max_iterations,
            "edge_prob": self.edge_prob,
            "representation": None if representation is None else str(representation),
        }

    @classmethod
    def from_dict(cls, data: dict, constraint_set: ConstraintSet | None = None) -> "EnvSpec":
        cs = constraint_set or load_constraint_set(data["constraints_path"])
        return cls(
            max_size=int(data["max_size"]),
            constraint_set=cs,
            alpha=float(data["alpha"]),
            max_changes=int(data["max_changes"]),
            max_iterations=int(data["max_iterations"]),
            edge_prob=float(data["edge_prob"]),
        )

    def to_json(self, representation=None) -> str:
        return json.dumps(self.to_dict(representation), sort_keys=True)

    @classmethod
    def from_json(cls, text: str, constraint_set: ConstraintSet | None = None) -> "EnvSpec":
        return cls.from_dict(json.loads(text), constraint_set)


@lru_cache(maxsize=256)
def _compositions(minimums: tuple[int, ...], max_size: int, size: int | None) -> tuple[tuple[int, ...], ...]:
    sizes = range(sum(minimums), max_size + 1) if size is None else [size]
    out = []
    for s in sizes:
        for counts in product(*(range(m, s + 1) for m in minimums)):
            if sum(counts) == s:
                out.append(counts)
    return tuple(out)


def enumerate_configurations(cs: ConstraintSet, max_size: int, size: int | None = None) -> list[GraphConfig]:
    """All feasible configurations up to ``max_size`` (or of exactly ``size``)."""
    minimums = tuple(cs.min_count(t) for t in cs.types)
    return [GraphConfig(cs.alphabet, c) for c in _compositions(minimums, max_size, size)]


def sample_configuration(cs: ConstraintSet, max_size: int, seed=None, size: int | None = None) -> GraphConfig:
    """Uniform draw over feasible (size, counts) pairs with size <= ``max_size``."""
    if max_size < cs.min_size():
        raise ConfigurationError(f"max size {max_size} is below {cs.min_size()} (one node per type)")
    minimums = tuple(cs.min_count(t) for t in cs.types)
    space = _compositions(minimums, max_size, size)
    if not space:
        raise ConfigurationError(f"no feasible configuration of size {size}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return GraphConfig(cs.alphabet, space[int(rng.integers(len(space)))])


def compute_reward(prev: GraphState, nxt: GraphState, cs: ConstraintSet, alpha: float = DEFAULT_ALPHA) -> float:
    after = violation_total(cs, nxt)
    v = violation_total(cs, prev) - after
    return float(v + (alpha if after == 0 else 0.0))


def n_actions(representation: Representation | str, max_size: int) -> int:
    rep = Representation(representation)
    if rep is Representation.GRAPH_NARROW:
        return 2
    if rep is Representation.GRAPH_WIDE:
        return 2 * n_cells(max_size)
    return 2 * max_size * max_size


def observation_shape(representation: Representation | str, max_size: int, n_symbols: int) -> tuple[int, ...]:
    if Representation(representation) is Representation.GRAPH_NARROW:
        return (2, max_size + 1, n_symbols)
    return (max_size, max_size, n_symbols)


def _onehot(symbols: np.ndarray, depth: int) -> np.ndarray:
    return np.eye(depth, dtype=np.float32)[symbols]


def encode_observation(g: GraphState, representation: Representation | str,
                       cursor: tuple[int, int] | None = None) -> np.ndarray:
    """One-hot observation; depth is ``empty_code + 3`` symbols."""
    rep = Representation(representation)
    depth = TYPE_OFFSET + g.empty_code + 1
    if rep is Representation.GRAPH_NARROW:
        if cursor is None:
            raise ValueError("graph_narrow observations need a cursor cell")
        y, x = int(cursor[0]), int(cursor[1])
        e = g.edges.astype(np.int64)
        sym = e + e.T
        sym[np.diag_indices(g.n)] = g.diagonal + TYPE_OFFSET
        rows = [np.concatenate(([g.diagonal[i] + TYPE_OFFSET], sym[i])) for i in (y, x)]
        return _onehot(np.stack(rows), depth)
    if cursor is not None:
        raise ValueError(f"{rep.value} observations take no cursor")
    return _onehot(g.symbols(), depth)


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


@dataclass
class EpisodeTrace:
    config: GraphConfig | None = None
    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    changed: list = field(default_factory=list)
    termination_cause: str | None = None
    valid: bool = False
    iterations: int = 0
    changes: int = 0

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


class GraphEnv:
    """Single-threaded episode runner for one representation.

    >>> env = GraphEnv(EnvSpec(4, load_constraint_set("set2")), "graph_wide", seed=0)
    >>> state, obs = env.reset()
    >>> outcome = env.step(0)
    """

    def __init__(self, spec: EnvSpec, representation: Representation | str, seed=None):
        self.spec = spec
        self.representation = Representation(representation)
        self.cs = spec.constraint_set
        self.rng = np.random.default_rng(seed)
        self.n_actions = n_actions(self.representation, spec.max_size)
        self.n_symbols = self.cs.alphabet.n_symbols
        self.observation_shape = observation_shape(self.representation, spec.max_size, self.n_symbols)
        self.state: GraphState | None = None
        self.config: GraphConfig | None = None
        self.done = True

    def reset(self, config: GraphConfig | None = None, seed=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        if config is None:
            config = sample_configuration(self.cs, self.spec.max_size, self.rng)
        else:
            self.cs.check_feasible(config, self.spec.max_size)
        self.config = config
        self.state = init_random(config, self.spec.max_size, self.spec.edge_prob, self.rng)
        self.total = violation_total(self.cs, self.state)
        self.iterations = 0
        self.changes = 0
        self.episode_return = 0.0
        self.done = False
        self.cells = self.state.eligible_cells() if self.representation is Representation.GRAPH_NARROW else None
        self.cursor_index = 0
        return self.state, self.observe()

    @property
    def cursor(self) -> CellIndex | None:
        if self.representation is not Representation.GRAPH_NARROW:
            return None
        if not self.cells:
            return CellIndex(1, 0)
        return self.cells[min(self.cursor_index, len(self.cells) - 1)]

    @property
    def valid(self) -> bool:
        return self.total == 0

    def observe(self) -> np.ndarray:
        return encode_observation(self.state, self.representation, self.cursor)

    def _apply(self, action) -> GraphState:
        state = self.state
        n = state.n
        rep = self.representation
        if rep is Representation.GRAPH_NARROW:
            flag = int(action)
            if flag not in (0, 1):
                raise ValueError(f"graph_narrow action must be 0 or 1, got {action}")
            if flag and self.cells:
                return toggle_edge(state, self.cursor)
            return state
        if rep is Representation.GRAPH_WIDE:
            if isinstance(action, tuple):
                position, flag = int(action[0]), int(action[1])
                if flag not in (0, 1):
                    raise ValueError(f"toggle flag must be 0 or 1, got {flag}")
            else:
                a = int(action)
                if not 0 <= a < self.n_actions:
                    raise ValueError(f"action {a} outside [0, {self.n_actions})")
                position, flag = a // 2 + 1, a % 2
            cell = action_to_cell(position, n)
            return toggle_edge(state, cell) if flag else state
        if isinstance(action, tuple):
            row, col, value = (int(v) for v in action)
            if not (0 <= row < n and 0 <= col < n and value in (0, 1)):
                raise ValueError(f"pcgrl_wide action {action} out of range")
        else:
            a = int(action)
            if not 0 <= a < self.n_actions:
                raise ValueError(f"action {a} outside [0, {self.n_actions})")
            (row, col), value = divmod(a // 2, n), a % 2
        if col < row and state.edges[row, col] != value:
            return toggle_edge(state, (row, col))
        return state

    def step(self, action) -> StepOutcome:
        if self.state is None or self.done:
            raise RuntimeError("episode is over; call reset()")
        prev_total = self.total
        nxt = self._apply(action)
        changed = nxt is not self.state
        self.iterations += 1
        if changed:
            self.changes += 1
            self.state = nxt
            self.total = violation_total(self.cs, nxt)
        valid = self.total == 0
        reward = float(prev_total - self.total) + (self.spec.alpha if valid else 0.0)
        self.episode_return += reward
        if self.representation is Representation.GRAPH_NARROW:
            self.cursor_index += 1

        cause = None
        if valid:
            cause = "valid"
        elif self.changes > self.spec.max_changes:
            cause = "max_changes"
        elif self.iterations >= self.spec.max_iterations:
            cause = "max_iterations"
        elif self.representation is Representation.GRAPH_NARROW and self.cursor_index >= len(self.cells):
            cause = "sweep_complete"
        self.done = cause is not None
        info = {
            "changed": changed,
            "valid": valid,
            "iterations": self.iterations,
            "changes": self.changes,
            "termination_cause": cause,
        }
        return StepOutcome(self.observe(), reward, self.done, info)


def reset(spec: EnvSpec, representation, config: GraphConfig | None = None, seed=None):
    """Functional form: new environment, reset once; returns ``(env, state, observation)``."""
    env = GraphEnv(spec, representation, seed=seed)
    state, obs = env.reset(config)
    return env, state, obs


def constraint_set_from_spec_dict(data: dict) -> ConstraintSet:
    if "constraints" in data:
        return parse_constraint_set(json.dumps(data["constraints"]), source=data.get("constraints_path"))
    return load_constraint_set(data["constraints_path"])
