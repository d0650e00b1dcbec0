"""
Extended adjacency matrices
===========================

A graph with node types is one square matrix: types on the diagonal,
undirected edges in the strict lower triangle.  Agents address cells by a
single 1-based index.
"""
import numpy as np

from graphpcg import GraphState, action_to_cell, cell_to_action, load_constraint_set, triang
from graphpcg.graph_model import init_random, toggle_edge

cs = load_constraint_set("set1")
ab = cs.alphabet

# U - V - W with a second U hanging off V, plus one padding row
g = GraphState.from_edge_list(
    [ab["U"].code, ab["V"].code, ab["W"].code, ab["U"].code, ab.empty.code],
    [(1, 0), (2, 1), (3, 1)],
    ab.empty.code,
)
print(g.symbols())

# a size-5 matrix has triang(4) = 10 editable cells, enumerated row by row
n = g.n
for a in range(1, triang(n - 1) + 1):
    cell = action_to_cell(a, n)
    print(f"action {a:2d} -> cell {tuple(cell)}", "edge" if g.edges[cell] else "")
    assert cell_to_action(cell) == a

# toggling is an involution
h = toggle_edge(g, (2, 1))
print("after removing V-W:", h.edge_list())
assert toggle_edge(h, (2, 1)) == g

# random noise for a requested configuration, padded to the matrix size
start = init_random(cs.config(U=2, V=2, W=1), max_size=6, edge_prob=0.5, seed=7)
print(start)
print("padding rows carry no edges:", not start.edges[np.asarray(start.diagonal) == ab.empty.code].any())
