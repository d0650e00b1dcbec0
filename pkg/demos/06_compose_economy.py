"""
Composing a large economy
=========================

One model trained on small graphs builds a bigger one: every new subgraph
gets a Converter wired into an existing Pool.  Writes economy.json and
economy.dot (render with ``dot -Tpng economy.dot``).

    python demos/06_compose_economy.py [steps]
"""
import sys
from pathlib import Path

import numpy as np

from graphpcg import CompositeGraph, EnvSpec, TrainSpec, concatenate, generate, load_constraint_set, train
from graphpcg.composer import ECONOMY_JUNCTION, validate_composite
from graphpcg.export import directions_for, dumps_graph, to_dot

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 300_000
cs = load_constraint_set("economy")
model, _ = train(TrainSpec(EnvSpec(6, cs), "graph_narrow", steps))
rng = np.random.default_rng(0)


def valid_subgraph(text):
    for attempt in range(100):
        g, trace = generate(model, cs.config(text), seed=rng)
        if trace.valid:
            return g
    raise SystemExit(f"no valid graph for {text}")


graph = CompositeGraph.from_graph(valid_subgraph("Source=2,Converter=2,Pool=1"))
for text in ("Source=1,Converter=2,Pool=1", "Source=2,Converter=1,Pool=2"):
    graph = concatenate(graph, valid_subgraph(text), ECONOMY_JUNCTION, cs, seed=rng)

flat, nodes = graph.flatten()
print(len(nodes), "nodes,", len(flat.edge_list()), "edges, valid:", validate_composite(graph, cs))
Path("economy.json").write_text(dumps_graph(graph, cs.alphabet))
Path("economy.dot").write_text(to_dot(graph, cs.alphabet, directions_for(cs.alphabet), name="economy"))
