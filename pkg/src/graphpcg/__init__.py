"""Constraint-satisfying typed graph generation with reinforcement learning.

Graphs live in an extended adjacency matrix (node types on the diagonal,
undirected edges below it).  A PPO agent edits the edges until every node
meets its type's neighbour requirements; random search and an evolutionary
algorithm serve as baselines.
"""
from .baselines import EAParams, SearchStats, ea_crossover, ea_generate, ea_mutate, random_search
from .bench import BenchTask, emit_report, time_to_valid, validity_rate
from .composer import CompositeGraph, JunctionRule, concatenate, validate_composite
from .constraints import (
    ConstraintSet,
    ViolationReport,
    edge_allowed,
    is_valid,
    load_constraint_set,
    node_violations,
    parse_constraint_set,
    total_violations,
)
from .environment import EnvSpec, GraphEnv, Representation, compute_reward, sample_configuration
from .errors import CompositionError, ConfigurationError, ConstraintParseError, TrainingError
from .export import dumps_graph, loads_graph, to_dot
from .graph_model import (
    Alphabet,
    CellIndex,
    GraphConfig,
    GraphState,
    action_to_cell,
    cell_to_action,
    init_random,
    toggle_edge,
    triang,
)
from .learner import PolicyModel, TrainSpec, generate, train

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "BenchTask", "CellIndex", "CompositeGraph", "CompositionError", "ConfigurationError",
    "ConstraintParseError", "ConstraintSet", "EAParams", "EnvSpec", "GraphConfig", "GraphEnv", "GraphState",
    "JunctionRule", "PolicyModel", "Representation", "SearchStats", "TrainSpec", "TrainingError",
    "ViolationReport", "action_to_cell", "cell_to_action", "compute_reward", "concatenate", "dumps_graph",
    "ea_crossover", "ea_generate", "ea_mutate", "edge_allowed", "emit_report", "generate", "init_random",
    "is_valid", "load_constraint_set", "loads_graph", "node_violations", "parse_constraint_set",
    "random_search", "sample_configuration", "time_to_valid", "to_dot", "toggle_edge", "total_violations",
    "train", "triang", "validate_composite", "validity_rate",
]
