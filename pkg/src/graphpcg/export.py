"""JSON and Graphviz DOT serialisation for plain and composite graphs."""
from __future__ import annotations

import json
from typing import Iterable, Mapping

from .composer import CompositeGraph
from .errors import CompositionError
from .graph_model import Alphabet, GraphState, graph_from_dict, graph_to_dict

SUBGRAPH_COLORS = ("#4c72b0", "#55a868", "#dd8452", "#c44e52", "#8c8c8c", "#8172b3", "#937860", "#da8bc3")
TYPE_SHAPES = ("ellipse", "box", "diamond", "hexagon", "triangle", "octagon", "house", "parallelogram")

# presentation-only edge directions per domain, keyed by display names
DOMAIN_DIRECTIONS = {
    "economy": (("Source", "Converter"), ("Converter", "Pool")),
    "skilltree": (("Skill", "Lv.up"), ("Lv.up", "Ev.skill")),
    "symbolic": (("U", "V"), ("V", "W")),
}


def composite_to_dict(c: CompositeGraph, alphabet: Alphabet) -> dict:
    flat, nodes = c.flatten()
    out_nodes = [
        {
            "id": k,
            "name": CompositeGraph.name(nd),
            "type": alphabet.display(int(flat.diagonal[k])),
            "subgraph": nd[0] + 1,
        }
        for k, nd in enumerate(nodes)
    ]
    return {"nodes": out_nodes, "edges": [[r, col] for r, col in flat.edge_list()]}


def composite_from_dict(data: Mapping, alphabet: Alphabet) -> CompositeGraph:
    """Rebuild a composite from its JSON form (provenance taken from ``subgraph``)."""
    nodes = sorted(data["nodes"], key=lambda nd: int(nd["id"]))
    if [int(nd["id"]) for nd in nodes] != list(range(len(nodes))):
        raise CompositionError("composite node ids must be 0..n-1")
    members: dict[int, list[int]] = {}
    where = {}
    for nd in nodes:
        s = int(nd.get("subgraph", 1)) - 1
        where[int(nd["id"])] = (s, len(members.setdefault(s, [])))
        members[s].append(int(nd["id"]))
    if sorted(members) != list(range(len(members))):
        raise CompositionError("subgraph indices must be contiguous from 1")
    intra: dict[int, list] = {s: [] for s in members}
    junctions = []
    for a, b in data.get("edges", []):
        (sa, ia), (sb, ib) = where[int(a)], where[int(b)]
        if sa == sb:
            intra[sa].append((ia, ib))
        else:
            # the later subgraph is the one that was attached
            junctions.append(((sa, ia), (sb, ib)) if sa > sb else ((sb, ib), (sa, ia)))
    subgraphs = []
    for s in range(len(members)):
        diag = [alphabet[nodes[i]["type"]].code for i in members[s]]
        subgraphs.append(GraphState.from_edge_list(diag, intra[s], alphabet.empty.code))
    return CompositeGraph(tuple(subgraphs), tuple(junctions))


def _dot_id(k: int) -> str:
    return f"n{k}"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: GraphState | CompositeGraph, alphabet: Alphabet,
           directions: Iterable[tuple[str, str]] | None = None, name: str = "G") -> str:
    """Render as DOT; nodes coloured by subgraph and shaped by type.

    ``directions`` lists (from, to) display-name pairs; matching edges are
    drawn as arrows, all others without arrowheads.  Without it the output
    is an undirected graph.
    """
    composite = graph if isinstance(graph, CompositeGraph) else CompositeGraph.from_graph(graph)
    flat, nodes = composite.flatten()
    directed = directions is not None
    arrows = {(a, b) for a, b in directions} if directed else set()
    lines = [f"{'digraph' if directed else 'graph'} {_quote(name)} {{", "  node [style=filled, fontcolor=white];"]
    for k, nd in enumerate(nodes):
        code = int(flat.diagonal[k])
        label = f"{alphabet.display(code)} {CompositeGraph.name(nd)}"
        color = SUBGRAPH_COLORS[nd[0] % len(SUBGRAPH_COLORS)]
        shape = TYPE_SHAPES[code % len(TYPE_SHAPES)]
        lines.append(f"  {_dot_id(k)} [label={_quote(label)}, shape={shape}, fillcolor={_quote(color)}];")
    for r, c in flat.edge_list():
        tr, tc = alphabet.display(int(flat.diagonal[r])), alphabet.display(int(flat.diagonal[c]))
        if not directed:
            lines.append(f"  {_dot_id(c)} -- {_dot_id(r)};")
        elif (tc, tr) in arrows:
            lines.append(f"  {_dot_id(c)} -> {_dot_id(r)};")
        elif (tr, tc) in arrows:
            lines.append(f"  {_dot_id(r)} -> {_dot_id(c)};")
        else:
            lines.append(f"  {_dot_id(c)} -> {_dot_id(r)} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def directions_for(alphabet: Alphabet) -> tuple[tuple[str, str], ...] | None:
    """Direction table of the first domain whose type names all occur in ``alphabet``."""
    for pairs in DOMAIN_DIRECTIONS.values():
        if all(a in alphabet and b in alphabet for a, b in pairs):
            return tuple((alphabet.display(alphabet[a]), alphabet.display(alphabet[b])) for a, b in pairs)
    return None


def dumps_graph(graph: GraphState | CompositeGraph, alphabet: Alphabet) -> str:
    if isinstance(graph, CompositeGraph):
        data = composite_to_dict(graph, alphabet)
    else:
        data = graph_to_dict(graph, alphabet)
    nodes = ",\n".join("    " + json.dumps(nd) for nd in data["nodes"])
    return '{\n  "nodes": [\n' + nodes + '\n  ],\n  "edges": ' + json.dumps(data["edges"]) + "\n}\n"


def loads_graph(text: str, alphabet: Alphabet, max_size: int | None = None) -> GraphState | CompositeGraph:
    data = json.loads(text)
    if any("subgraph" in nd for nd in data.get("nodes", [])):
        return composite_from_dict(data, alphabet)
    return graph_from_dict(data, alphabet, max_size)
