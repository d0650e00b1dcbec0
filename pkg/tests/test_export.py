import json

import pytest

from graphpcg.baselines import random_search
from graphpcg.composer import ECONOMY_JUNCTION, CompositeGraph, concatenate
from graphpcg.export import (
    composite_from_dict,
    composite_to_dict,
    directions_for,
    dumps_graph,
    loads_graph,
    to_dot,
)


@pytest.fixture
def composite(economy):
    def gen(text, seed):
        return random_search(economy, economy.config(text), seed=seed)[0]

    c = CompositeGraph.from_graph(gen("Source=2,Converter=2,Pool=1", 0))
    c = concatenate(c, gen("Source=1,Converter=1,Pool=1", 1), ECONOMY_JUNCTION, economy, seed=0)
    return concatenate(c, gen("Source=1,Converter=2,Pool=1", 2), ECONOMY_JUNCTION, economy, seed=1)


def test_plain_json_round_trip(set1, fig2):
    text = dumps_graph(fig2, set1.alphabet)
    data = json.loads(text)
    assert data["edges"] == [[1, 0], [2, 1], [3, 1]]
    assert loads_graph(text, set1.alphabet, max_size=5) == fig2


def test_composite_json_round_trip(economy, composite):
    data = composite_to_dict(composite, economy.alphabet)
    assert {nd["subgraph"] for nd in data["nodes"]} == {1, 2, 3}
    assert data["nodes"][0]["name"] == "1-1"
    assert data["nodes"][0]["type"] in ("Source", "Converter", "Pool")
    again = composite_from_dict(json.loads(json.dumps(data)), economy.alphabet)
    assert again.flatten()[0] == composite.flatten()[0]
    assert set(again.junctions) == set(composite.junctions)
    assert isinstance(loads_graph(dumps_graph(composite, economy.alphabet), economy.alphabet), CompositeGraph)


def test_dot_undirected(set1, fig2):
    dot = to_dot(fig2, set1.alphabet)
    assert dot.startswith('graph "G" {')
    assert dot.count(" -- ") == 3
    assert "->" not in dot
    assert dot.count("[label=") == 4


def test_dot_economy_directions(economy, composite):
    directions = directions_for(economy.alphabet)
    assert directions == (("Source", "Converter"), ("Converter", "Pool"))
    dot = to_dot(composite, economy.alphabet, directions, name="eco")
    flat, nodes = composite.flatten()
    assert dot.startswith('digraph "eco" {')
    assert dot.count("->") == len(flat.edge_list())
    assert "dir=none" not in dot  # every allowed economy edge has a direction
    colours = {line.split("fillcolor=")[1] for line in dot.splitlines() if "fillcolor" in line}
    assert len(colours) == 3
    assert '"Pool 3-' in dot


def test_directions_for_symbolic(set1, sets):
    assert directions_for(set1.alphabet) == (("U", "V"), ("V", "W"))
    assert directions_for(sets["set2"].alphabet) is None


def test_dot_quotes_names():
    from graphpcg.constraints import parse_constraint_set

    cs = parse_constraint_set('{"A \\"x\\"": ["B"], "B": ["A \\"x\\""]}')
    g = random_search(cs, cs.config({'A "x"': 1, "B": 1}), seed=0)[0]
    assert '\\"x\\"' in to_dot(g, cs.alphabet)
