"""Search baselines sharing the violation count as fitness.

``random_search`` toggles uniformly random cells between real nodes until
the graph is valid.  ``ea_generate`` evolves a population of graphs with a
fixed diagonal using node-row crossover and node-row mutation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintSet, MaskChecker
from .graph_model import GraphConfig, GraphState, init_random

DEFAULT_BUDGET = 50_000_000


@dataclass(frozen=True)
class EAParams:
    population: int = 50
    tournament: int = 3
    mutation_rate: float = 0.05
    max_generations: int = 10_000
    elitism: int = 1
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation rate must be in [0, 1]")
        if self.population < 2:
            raise ValueError("population must hold at least two individuals")
        if not 1 <= self.tournament <= self.population:
            raise ValueError("tournament size must be in [1, population]")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be smaller than the population")


@dataclass(frozen=True)
class SearchStats:
    evaluations: int
    duration_ms: float
    success: bool
    final_total: int
    generations: int = 0


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_search(cs: ConstraintSet, config: GraphConfig, max_size: int | None = None, seed=None,
                  budget: int = DEFAULT_BUDGET, edge_prob: float = 0.5) -> tuple[GraphState, SearchStats]:
    """Toggle random eligible cells until valid or ``budget`` evaluations are spent.

    The starting graph counts as the first evaluation.  On budget
    exhaustion the lowest-violation graph seen is returned.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    max_size = config.size if max_size is None else max_size
    cs.check_feasible(config, max_size)
    start = time.perf_counter()
    rng = _rng(seed)
    state = init_random(config, max_size, edge_prob, rng)
    checker = MaskChecker(cs, state)
    cells = state.eligible_cells()
    rows = [c.row for c in cells]
    cols = [c.col for c in cells]
    nbr = checker.nbr
    required = checker.required_masks
    bad = checker.bad_masks
    node_tot = [checker.node_total(i) for i in range(checker.n)]
    total = sum(node_tot)
    best_total, best_nbr = total, list(nbr)
    evaluations = 1
    while total and evaluations < budget and cells:
        for k in rng.integers(len(cells), size=min(4096, budget - evaluations)).tolist():
            r, c = rows[k], cols[k]
            mr = nbr[r] ^ (1 << c)
            mc = nbr[c] ^ (1 << r)
            nbr[r], nbr[c] = mr, mc
            new_r = (mr & bad[r]).bit_count()
            for tm in required[r]:
                if not mr & tm:
                    new_r += 1
            new_c = (mc & bad[c]).bit_count()
            for tm in required[c]:
                if not mc & tm:
                    new_c += 1
            total += new_r + new_c - node_tot[r] - node_tot[c]
            node_tot[r], node_tot[c] = new_r, new_c
            evaluations += 1
            if total < best_total:
                best_total, best_nbr = total, list(nbr)
                if not total:
                    break
    checker.nbr = best_nbr
    result = checker.to_state(state.empty_code)
    elapsed = (time.perf_counter() - start) * 1e3
    return result, SearchStats(evaluations, elapsed, best_total == 0, best_total)


# Populations are stacks of symmetric boolean adjacencies, shape (P, n, n).

def _swap_node_rows(a: np.ndarray, b: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Copy node ``nodes[i]``'s incident cells from ``b[i]`` into ``a[i]``."""
    p, n, _ = a.shape
    mask = np.zeros((p, n, n), dtype=bool)
    idx = np.arange(p)
    mask[idx, nodes, :] = True
    mask[idx, :, nodes] = True
    return np.where(mask, b, a)


def _resample_node_rows(adj: np.ndarray, which: np.ndarray, nodes: np.ndarray, rng: np.random.Generator) -> None:
    """In place: for each individual in ``which`` redraw node ``nodes[i]``'s cells with p=0.5."""
    n = adj.shape[1]
    bits = rng.random((len(which), n)) < 0.5
    for row, ind, k in zip(bits, which, nodes):
        row[k] = False
        adj[ind, k, :] = row
        adj[ind, :, k] = row


def _sym(state: GraphState) -> np.ndarray:
    return state.adjacency()


def _from_sym(adj: np.ndarray, like: GraphState) -> GraphState:
    return like.with_edges(np.tril(adj, -1).astype(np.uint8))


def ea_crossover(parent_a: GraphState, parent_b: GraphState, seed=None) -> GraphState:
    """Child = ``parent_a`` with one random real node's connections taken from ``parent_b``."""
    if parent_a.empty_code != parent_b.empty_code or not np.array_equal(parent_a.diagonal, parent_b.diagonal):
        raise ValueError("crossover parents must share the same diagonal")
    rng = _rng(seed)
    real = parent_a.real_nodes()
    k = int(real[rng.integers(len(real))])
    child = _swap_node_rows(_sym(parent_a)[None], _sym(parent_b)[None], np.array([k]))[0]
    return _from_sym(child, parent_a)


def ea_mutate(individual: GraphState, rate: float, seed=None) -> GraphState:
    """With probability ``rate`` redraw every cell incident to one random real node."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("mutation rate must be in [0, 1]")
    rng = _rng(seed)
    if rng.random() >= rate:
        return individual
    real = individual.real_nodes()
    k = int(real[rng.integers(len(real))])
    adj = _sym(individual)[None].copy()
    _resample_node_rows(adj, np.array([0]), np.array([k]), rng)
    return _from_sym(adj[0], individual)


def _fitness_function(cs: ConstraintSet, diagonal: np.ndarray):
    """Batched violation total with the diagonal-dependent terms precomputed."""
    k = cs.required.shape[0]
    onehot = np.eye(k, dtype=np.float32)[diagonal]
    need = cs.required[diagonal]
    bad = ~cs.allowed[np.ix_(diagonal, diagonal)]

    def fitness(pop: np.ndarray) -> np.ndarray:
        present = (pop.astype(np.float32) @ onehot) > 0
        return (need & ~present).sum(axis=(1, 2)) + (pop & bad).sum(axis=(1, 2))

    return fitness


def _tournament(fitness: np.ndarray, count: int, size: int, rng: np.random.Generator) -> np.ndarray:
    entrants = rng.integers(len(fitness), size=(count, size))
    winners = np.argmin(fitness[entrants], axis=1)
    return entrants[np.arange(count), winners]


def ea_generate(cs: ConstraintSet, config: GraphConfig, max_size: int | None = None,
                params: EAParams = EAParams(), initial: list[GraphState] | None = None,
                edge_prob: float = 0.5) -> tuple[GraphState, SearchStats]:
    """Evolve graphs until one has zero violations.

    Each generation keeps the ``elitism`` best individuals and fills the
    rest with tournament-selected crossover children, each mutated with
    probability ``mutation_rate``.  ``initial`` overrides the random
    starting population (it must share one diagonal).
    """
    max_size = config.size if max_size is None else max_size
    cs.check_feasible(config, max_size)
    start = time.perf_counter()
    rng = _rng(params.seed)
    if initial:
        base = initial[0]
        pop = np.stack([_sym(s) for s in initial])
    else:
        base = init_random(config, max_size, edge_prob, rng)
        real = base.diagonal != base.empty_code
        rest = rng.random((params.population - 1, max_size, max_size)) < edge_prob
        rest = np.tril(rest & real[:, None] & real[None, :], -1)
        pop = np.concatenate([_sym(base)[None], rest | rest.transpose(0, 2, 1)])
    diagonal = base.diagonal
    real_nodes = base.real_nodes()
    n_children = len(pop) - params.elitism

    fitness_of = _fitness_function(cs, diagonal)
    fitness = fitness_of(pop)
    evaluations = len(pop)
    generation = 0
    while fitness.min() > 0 and generation < params.max_generations:
        generation += 1
        elite = np.argsort(fitness, kind="stable")[: params.elitism]
        ia = _tournament(fitness, n_children, params.tournament, rng)
        ib = _tournament(fitness, n_children, params.tournament, rng)
        nodes = real_nodes[rng.integers(len(real_nodes), size=n_children)]
        children = _swap_node_rows(pop[ia], pop[ib], nodes)
        mutate = np.flatnonzero(rng.random(n_children) < params.mutation_rate)
        if len(mutate):
            mnodes = real_nodes[rng.integers(len(real_nodes), size=len(mutate))]
            _resample_node_rows(children, mutate, mnodes, rng)
        child_fit = fitness_of(children)
        evaluations += n_children
        pop = np.concatenate([pop[elite], children])
        fitness = np.concatenate([fitness[elite], child_fit])
    best = int(np.argmin(fitness))
    result = _from_sym(pop[best], base)
    elapsed = (time.perf_counter() - start) * 1e3
    return result, SearchStats(evaluations, elapsed, bool(fitness[best] == 0), int(fitness[best]), generation)
