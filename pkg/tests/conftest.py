import sys
import warnings

import numpy as np
import pytest

from graphpcg import GraphState, load_constraint_set


def _load(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return load_constraint_set(name)


@pytest.fixture(scope="session")
def sets():
    return {f"set{i}": _load(f"set{i}") for i in range(1, 6)}


@pytest.fixture(scope="session")
def set1(sets):
    return sets["set1"]


@pytest.fixture(scope="session")
def set2(sets):
    return sets["set2"]


@pytest.fixture(scope="session")
def economy():
    return _load("economy")


@pytest.fixture
def fig2(set1):
    """U-V-W plus a second U on V, one padding row: the canonical valid example."""
    a = set1.alphabet
    diag = [a["U"].code, a["V"].code, a["W"].code, a["U"].code, a.empty.code]
    return GraphState.from_edge_list(diag, [(1, 0), (2, 1), (3, 1)], a.empty.code)


def brute_force_valid(requires, types, edges):
    """Independent validity check on plain Python structures.

    ``requires`` maps type name -> list of names, ``types`` lists node type
    names (None for padding) and ``edges`` is a set of frozenset pairs.
    """
    return brute_force_total(requires, types, edges) == 0


def brute_force_total(requires, types, edges):
    total = 0
    for i, t in enumerate(types):
        neighbours = [j for j in range(len(types)) if frozenset((i, j)) in edges]
        for j in neighbours:
            u = types[j]
            ok = t is not None and u is not None and (u in requires[t] or t in requires[u])
            if not ok:
                total += 1
        if t is None:
            continue
        for need in requires[t]:
            if not any(types[j] == need for j in neighbours):
                total += 1
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
