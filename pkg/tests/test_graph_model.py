import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphpcg.errors import ConfigurationError
from graphpcg.graph_model import (
    Alphabet,
    CellIndex,
    GraphConfig,
    GraphState,
    action_to_cell,
    cell_to_action,
    graph_from_dict,
    graph_to_dict,
    init_random,
    n_cells,
    toggle_edge,
    triang,
)

UVW = Alphabet(["U", "V", "W"])


def row_major_cells(n):
    """Reference enumeration of the strict lower triangle."""
    return [(r, c) for r in range(1, n) for c in range(r)]


@pytest.mark.parametrize("n, expected", [(0, 0), (1, 1), (4, 10), (9, 45)])
def test_triang_values(n, expected):
    assert triang(n) == expected


def test_triang_increments():
    for n in range(1, 500):
        assert triang(n) - triang(n - 1) == n


def test_triang_rejects_negative():
    with pytest.raises(ValueError):
        triang(-1)


@pytest.mark.parametrize("a, cell", [(1, (1, 0)), (3, (2, 1)), (10, (4, 3))])
def test_action_to_cell_examples(a, cell):
    assert action_to_cell(a, 5) == cell
    assert cell_to_action(cell) == a


def test_bijection_against_enumeration():
    for n in range(2, 65):
        cells = [tuple(action_to_cell(a, n)) for a in range(1, n_cells(n) + 1)]
        assert cells == row_major_cells(n)
        for a, cell in enumerate(cells, start=1):
            assert cell_to_action(cell) == a


def test_action_to_cell_large_indices_exact():
    # float sqrt would drift here; the integer root must not
    n = 200_001
    for a in (1, n_cells(n) // 2, n_cells(n) - 1, n_cells(n)):
        assert cell_to_action(action_to_cell(a, n)) == a


@pytest.mark.parametrize("a", [0, -1, 11])
def test_action_to_cell_out_of_range(a):
    with pytest.raises(ValueError):
        action_to_cell(a, 5)


@pytest.mark.parametrize("cell", [(0, 0), (1, 1), (1, 2), (2, -1)])
def test_cell_to_action_rejects_non_lower(cell):
    with pytest.raises(ValueError):
        cell_to_action(cell)


def test_alphabet_codes_and_empty():
    a = Alphabet(["U", "V"], aliases={"Source": "U"})
    assert [t.code for t in a.types] == [0, 1, 2]
    assert sum(t.is_empty for t in a.types) == 1
    assert a.empty.code == 2
    assert a["Source"] is a["U"]
    assert a.display(a["U"]) == "Source"
    assert a.n_symbols == 5


def test_config_parse_and_str():
    cfg = GraphConfig.parse(UVW, "U=2, V=2,W=1")
    assert cfg.counts == (2, 2, 1)
    assert cfg.size == 5
    assert str(cfg) == "U=2,V=2,W=1"


@pytest.mark.parametrize("text", ["", "U", "U=x", "X=1"])
def test_config_parse_errors(text):
    with pytest.raises(ConfigurationError):
        GraphConfig.parse(UVW, text)


def test_init_random_forced_full():
    cfg = GraphConfig.parse(Alphabet(["U", "V"]), "U=1,V=1")
    for seed in range(5):
        g = init_random(cfg, 2, edge_prob=1.0, seed=seed)
        assert sorted(g.diagonal.tolist()) == [0, 1]
        assert g.edges[1, 0] == 1


def test_init_random_forced_empty():
    ab = Alphabet(["U", "V"])
    g = init_random(GraphConfig.parse(ab, "U=1,V=1"), 3, edge_prob=0.0, seed=3)
    assert g.diagonal.tolist().count(ab.empty.code) == 1
    assert g.diagonal[-1] == ab.empty.code
    assert not g.edges.any()


def test_init_random_deterministic():
    cfg = GraphConfig.parse(UVW, "U=2,V=2,W=1")
    a = init_random(cfg, 6, 0.5, seed=7)
    b = init_random(cfg, 6, 0.5, seed=7)
    assert a == b
    assert a.diagonal.tobytes() == b.diagonal.tobytes()
    assert a.edges.tobytes() == b.edges.tobytes()


def test_init_random_no_padding_edges():
    cfg = GraphConfig.parse(UVW, "U=1,V=1,W=1")
    for seed in range(50):
        g = init_random(cfg, 6, edge_prob=1.0, seed=seed)
        assert g.edges[3:].sum() == 0
        assert g.edges[:3, :3].sum() == 3


def test_init_random_shuffles_positions():
    cfg = GraphConfig.parse(UVW, "U=1,V=1,W=1")
    orders = {tuple(init_random(cfg, 3, seed=s).diagonal) for s in range(200)}
    assert len(orders) == 6


def test_init_random_edge_density():
    cfg = GraphConfig.parse(UVW, "U=3,V=3,W=4")
    total = sum(init_random(cfg, 10, 0.3, seed=s).edges.sum() for s in range(400))
    assert total / (400 * 45) == pytest.approx(0.3, abs=0.01)


def test_init_random_oversized():
    with pytest.raises(ConfigurationError):
        init_random(GraphConfig.parse(UVW, "U=3,V=2,W=2"), 6)


def test_toggle_examples(fig2):
    g = GraphState(np.zeros(3, int), np.zeros((3, 3)), 3)
    once = toggle_edge(g, (1, 0))
    assert once.edges[1, 0] == 1
    assert toggle_edge(once, (1, 0)) == g
    without = toggle_edge(fig2, (2, 1))
    assert without.edge_list() == [(1, 0), (3, 1)]
    assert np.array_equal(without.diagonal, fig2.diagonal)


@pytest.mark.parametrize("cell", [(1, 1), (0, 1), (5, 0)])
def test_toggle_rejects_bad_cells(fig2, cell):
    with pytest.raises(ValueError):
        toggle_edge(fig2, cell)


def test_graph_state_is_immutable(fig2):
    with pytest.raises(ValueError):
        fig2.edges[1, 0] = 0
    with pytest.raises(AttributeError):
        fig2.diagonal = None


def test_upper_triangle_ignored():
    full = np.ones((3, 3))
    g = GraphState([0, 1, 2], full, 3)
    assert g.edge_list() == [(1, 0), (2, 0), (2, 1)]
    assert not np.triu(g.edges).any()


def test_eligible_cells_skip_padding(fig2):
    assert fig2.eligible_cells() == [CellIndex(r, c) for r, c in row_major_cells(4)]


def test_dict_round_trip(fig2, set1):
    data = graph_to_dict(fig2, set1.alphabet)
    assert data == {
        "nodes": [{"id": 0, "type": "U"}, {"id": 1, "type": "V"}, {"id": 2, "type": "W"}, {"id": 3, "type": "U"}],
        "edges": [[1, 0], [2, 1], [3, 1]],
    }
    assert graph_from_dict(data, set1.alphabet, max_size=5) == fig2


def test_dict_errors(set1):
    with pytest.raises(ValueError):
        graph_from_dict({"nodes": [{"id": 0, "type": "U"}, {"id": 0, "type": "V"}]}, set1.alphabet)
    with pytest.raises(ValueError):
        graph_from_dict({"nodes": [{"id": 0, "type": "U"}], "edges": [[1, 0]]}, set1.alphabet)
    with pytest.raises(KeyError):
        graph_from_dict({"nodes": [{"id": 0, "type": "Q"}]}, set1.alphabet)
    with pytest.raises(ConfigurationError):
        graph_from_dict({"nodes": [{"id": 6, "type": "U"}]}, set1.alphabet, max_size=5)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 40), st.data())
def test_toggle_touches_one_cell(n, data):
    bits = data.draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    g = GraphState(np.zeros(n, int), np.array(bits, dtype=np.uint8).reshape(n, n), 1)
    a = data.draw(st.integers(1, n_cells(n)))
    cell = action_to_cell(a, n)
    h = toggle_edge(g, cell)
    diff = np.argwhere(g.edges != h.edges)
    assert diff.tolist() == [list(cell)]
    assert toggle_edge(h, cell) == g


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10**9))
def test_round_trip_property(a):
    n = 50_000
    if a <= n_cells(n):
        assert cell_to_action(action_to_cell(a, n)) == a
