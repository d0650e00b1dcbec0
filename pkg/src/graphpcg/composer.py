"""Grow graphs beyond a model's size ceiling by joining generated subgraphs.

Each new subgraph is attached to the graph built so far with junction
edges between a node type of the subgraph and a node type of the base,
e.g. a new Converter feeding an existing Pool.  Nodes are named
``"<subgraph>-<node>"`` (both 1-based).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet, edge_allowed, is_valid
from .errors import CompositionError
from .graph_model import GraphState


@dataclass(frozen=True)
class JunctionRule:
    from_type: str
    to_type: str
    edges_per_subgraph: int = 1

    def __post_init__(self):
        if self.edges_per_subgraph < 1:
            raise ValueError("a junction rule adds at least one edge")


ECONOMY_JUNCTION = JunctionRule("Converter", "Pool")
SKILL_TREE_JUNCTION = JunctionRule("Lv.up", "Skill")

Node = tuple[int, int]  # (subgraph index, node index), both 0-based


@dataclass(frozen=True)
class CompositeGraph:
    subgraphs: tuple[GraphState, ...]
    junctions: tuple[tuple[Node, Node], ...] = field(default=())

    @classmethod
    def from_graph(cls, g: GraphState) -> "CompositeGraph":
        return cls((g,))

    def nodes(self) -> list[Node]:
        return [(s, int(i)) for s, g in enumerate(self.subgraphs) for i in g.real_nodes()]

    @staticmethod
    def name(node: Node) -> str:
        return f"{node[0] + 1}-{node[1] + 1}"

    def node_type(self, node: Node) -> int:
        return int(self.subgraphs[node[0]].diagonal[node[1]])

    def flatten(self) -> tuple[GraphState, list[Node]]:
        """Union graph over all real nodes, in subgraph order, plus the node list."""
        nodes = self.nodes()
        if not nodes:
            raise CompositionError("composite graph has no nodes")
        index = {nd: k for k, nd in enumerate(nodes)}
        empty = self.subgraphs[0].empty_code
        diagonal = [self.node_type(nd) for nd in nodes]
        edges = []
        for s, g in enumerate(self.subgraphs):
            for r, c in g.edge_list():
                a, b = (s, r), (s, c)
                if a in index and b in index:
                    edges.append((index[a], index[b]))
                else:
                    # padding nodes are dropped, so such an edge has no image
                    raise CompositionError(f"subgraph {s + 1} has an edge touching a padding node")
        for a, b in self.junctions:
            edges.append((index[a], index[b]))
        return GraphState.from_edge_list(diagonal, edges, empty), nodes


def concatenate(base: CompositeGraph | GraphState, sub: GraphState, rule: JunctionRule,
                cs: ConstraintSet, seed=None, strict: bool = True) -> CompositeGraph:
    """Append ``sub`` and join it to ``base`` according to ``rule``.

    Junction endpoints are drawn uniformly (without repeating a pair) from
    the ``rule.from_type`` nodes of ``sub`` and the ``rule.to_type`` nodes
    anywhere in ``base``.  With ``strict`` the type pair must be allowed
    and ``sub`` must be valid.
    """
    if isinstance(base, GraphState):
        base = CompositeGraph.from_graph(base)
    if not base.subgraphs:
        raise CompositionError("base composite is empty")
    try:
        t_from, t_to = cs.type(rule.from_type), cs.type(rule.to_type)
    except KeyError as exc:
        raise CompositionError(str(exc)) from None
    if strict:
        if not edge_allowed(cs, t_from, t_to):
            raise CompositionError(
                f"junction {rule.from_type}-{rule.to_type} is not an allowed edge"
            )
        if not is_valid(cs, sub):
            raise CompositionError("subgraph is not valid")
    s_new = len(base.subgraphs)
    sources = [(s_new, int(i)) for i in np.flatnonzero(sub.diagonal == t_from.code)]
    targets = [nd for nd in base.nodes() if base.node_type(nd) == t_to.code]
    if not sources:
        raise CompositionError(f"subgraph has no {rule.from_type} node")
    if not targets:
        raise CompositionError(f"base has no {rule.to_type} node")
    n_pairs = len(sources) * len(targets)
    if rule.edges_per_subgraph > n_pairs:
        raise CompositionError(f"only {n_pairs} distinct junction pairs available")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    picks = rng.choice(n_pairs, size=rule.edges_per_subgraph, replace=False)
    new = tuple((sources[int(p) // len(targets)], targets[int(p) % len(targets)]) for p in picks)
    return CompositeGraph(base.subgraphs + (sub,), base.junctions + new)


def validate_composite(c: CompositeGraph, cs: ConstraintSet) -> bool:
    flat, _ = c.flatten()
    return is_valid(cs, flat)
