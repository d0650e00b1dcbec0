import numpy as np
import pytest

from graphpcg.baselines import EAParams, ea_crossover, ea_generate, ea_mutate, random_search
from graphpcg.constraints import is_valid, total_violations
from graphpcg.environment import sample_configuration
from graphpcg.graph_model import GraphState, init_random


def _pair(cfg, seed=1):
    """Two parents sharing one diagonal with independent random edges."""
    a = init_random(cfg, cfg.size, seed=seed)
    noise = np.random.default_rng(seed + 1).random((cfg.size, cfg.size)) < 0.5
    return a, a.with_edges(np.tril(noise, -1))


def touched_nodes(a, b):
    diff = np.argwhere(a.adjacency() != b.adjacency())
    return set(diff.ravel().tolist())


def test_ea_params_validation():
    with pytest.raises(ValueError):
        EAParams(mutation_rate=1.5)
    with pytest.raises(ValueError):
        EAParams(population=1)
    with pytest.raises(ValueError):
        EAParams(tournament=60)
    assert EAParams().mutation_rate == 0.05


def test_crossover_identity(set1):
    a = init_random(set1.config("U=2,V=2,W=1"), 5, seed=0)
    assert ea_crossover(a, a, seed=3) == a


def test_crossover_locality(set1):
    a, b = _pair(set1.config("U=2,V=2,W=2"))
    for seed in range(30):
        child = ea_crossover(a, b, seed=seed)
        assert np.array_equal(child.diagonal, a.diagonal)
        changed = np.argwhere(child.adjacency() != a.adjacency())
        if len(changed):
            # every changed cell shares one node
            common = set(changed[0]) & set.intersection(*(set(c) for c in changed))
            assert common


def test_crossover_takes_selected_node(set1):
    a = init_random(set1.config("U=1,V=1,W=1"), 3, edge_prob=0.0, seed=0)
    b = a.with_edges(np.tril(np.ones((3, 3)), -1))
    # b differs from a only at cells incident to every node; pick k and compare its row
    for seed in range(10):
        child = ea_crossover(a, b, seed=seed)
        row_nodes = [k for k in range(3) if np.array_equal(child.adjacency()[k], b.adjacency()[k])]
        assert row_nodes
        k = row_nodes[0]
        rest = [i for i in range(3) if i != k]
        assert not child.adjacency()[np.ix_(rest, rest)].any()


def test_crossover_differing_only_at_node(set1):
    cfg = set1.config("U=2,V=2,W=1")
    a = init_random(cfg, 5, seed=4)
    adj = a.adjacency().copy()
    adj[2, :] = ~adj[2, :]
    adj[:, 2] = adj[2, :]
    adj[2, 2] = False
    b = a.with_edges(np.tril(adj, -1))
    outcomes = {ea_crossover(a, b, seed=s) for s in range(60)}
    assert b in outcomes


def test_crossover_mismatch(set1):
    a = init_random(set1.config("U=2,V=2,W=1"), 5, seed=0)
    b = GraphState(a.diagonal[::-1], a.edges, a.empty_code)
    if np.array_equal(a.diagonal, b.diagonal):
        pytest.skip("palindromic diagonal")
    with pytest.raises(ValueError):
        ea_crossover(a, b)


def test_mutation_rates(set1):
    g = init_random(set1.config("U=2,V=2,W=2"), 6, seed=1)
    for seed in range(20):
        assert ea_mutate(g, 0.0, seed=seed) == g
    changed = 0
    for seed in range(50):
        m = ea_mutate(g, 1.0, seed=seed)
        assert np.array_equal(m.diagonal, g.diagonal)
        nodes = touched_nodes(g, m)
        if nodes:
            changed += 1
            diff = np.argwhere(m.adjacency() != g.adjacency())
            assert set.intersection(*(set(c) for c in diff))
    assert changed > 40
    with pytest.raises(ValueError):
        ea_mutate(g, -0.1)


def test_random_search_already_valid(set2, fig2):
    cfg = set2.config("U=1,V=1")
    for seed in range(40):
        g, stats = random_search(set2, cfg, seed=seed)
        assert stats.success and is_valid(set2, g)
        if init_random(cfg, 2, seed=seed).edges[1, 0]:
            assert stats.evaluations == 1


def test_random_search_budget_exhaustion(set1):
    cfg = set1.config("U=1,V=5,W=1")
    g, stats = random_search(set1, cfg, seed=0, budget=3)
    assert stats.evaluations <= 3
    if not stats.success:
        assert stats.final_total == total_violations(set1, g).total > 0


def test_random_search_deterministic(sets):
    cs = sets["set5"]
    cfg = cs.config("U=2,V=2,W=1")
    a = random_search(cs, cfg, seed=9)
    b = random_search(cs, cfg, seed=9)
    assert a[0] == b[0] and a[1].evaluations == b[1].evaluations


def test_random_search_respects_padding(set1):
    g, stats = random_search(set1, set1.config("U=1,V=2,W=1"), max_size=6, seed=2)
    assert stats.success
    assert g.n == 6 and not g.edges[4:].any()


def test_ea_initial_valid_returns_immediately(set1, fig2):
    cfg = set1.config("U=2,V=1,W=1")
    valid = fig2
    pop = [valid] + [valid.with_edges(np.zeros((5, 5)))] * 9
    g, stats = ea_generate(set1, cfg, 5, EAParams(population=10, seed=0), initial=pop)
    assert g == valid
    assert stats.generations == 0 and stats.success


def test_ea_deterministic(sets):
    cs = sets["set1"]
    cfg = cs.config("U=2,V=2,W=2")
    a = ea_generate(cs, cfg, params=EAParams(seed=5))
    b = ea_generate(cs, cfg, params=EAParams(seed=5))
    assert a[0] == b[0] and a[1].generations == b[1].generations and a[1].evaluations == b[1].evaluations


def test_ea_cap(sets):
    cs = sets["set1"]
    g, stats = ea_generate(cs, cs.config("U=1,V=5,W=1"), params=EAParams(max_generations=1, seed=0))
    assert stats.generations <= 1
    assert stats.success == (stats.final_total == 0)
    assert stats.final_total == total_violations(cs, g).total


@pytest.mark.parametrize("name", ["set1", "set2", "set3", "set4", "set5"])
def test_both_methods_valid_size5(sets, name):
    cs = sets[name]
    rng = np.random.default_rng(0)
    for _ in range(10):
        cfg = sample_configuration(cs, 5, rng, size=5)
        for g, stats in (random_search(cs, cfg, seed=rng), ea_generate(cs, cfg, params=EAParams(seed=rng))):
            assert stats.success
            assert is_valid(cs, g)
            assert np.bincount(g.diagonal, minlength=len(cs.alphabet))[:-1].tolist() == list(cfg.counts)
