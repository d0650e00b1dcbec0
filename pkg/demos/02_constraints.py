"""
Constraint sets and violation counts
====================================

Each type lists the neighbour types it needs.  The same lists decide
which pairs may be connected at all.
"""
from graphpcg import GraphState, edge_allowed, is_valid, parse_constraint_set, total_violations

cs = parse_constraint_set('{"U": ["V"], "V": ["U", "W"], "W": ["V"]}')
print(cs, "rules:", cs.n_rules)
print("U-V allowed:", edge_allowed(cs, "U", "V"), " U-W allowed:", edge_allowed(cs, "U", "W"))

ab = cs.alphabet
diag = [ab[t].code for t in "UVWU"] + [ab.empty.code]

# no edges at all: every requirement is missing
bare = GraphState.from_edge_list(diag, [], ab.empty.code)
report = total_violations(cs, bare)
print("edgeless per node:", report.per_node, "total", report.total)

# one edge per requirement repairs everything
good = GraphState.from_edge_list(diag, [(1, 0), (2, 1), (3, 1)], ab.empty.code)
print("repaired:", total_violations(cs, good).per_node, "valid:", is_valid(cs, good))

# a U-W edge is never allowed; both endpoints are charged for it
bad = GraphState.from_edge_list(diag, [(1, 0), (2, 1), (3, 1), (3, 2)], ab.empty.code)
r = total_violations(cs, bad)
print("with U-W edge:", r.per_node, "disallowed edge ends:", r.disallowed_edges)

# domain names map onto the symbolic types
economy = parse_constraint_set(
    '{"_aliases": {"Source": "U", "Converter": "V", "Pool": "W"},'
    ' "U": ["V"], "V": ["U", "W"], "W": ["V"]}'
)
print(economy.config("Source=2,Converter=2,Pool=1"))
