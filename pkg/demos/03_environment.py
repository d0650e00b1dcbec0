"""
Episodes, observations and rewards
==================================

The environment starts from random noise and rewards every edit by how
much it lowers the violation count, plus a bonus once the graph is valid.
"""
import numpy as np

from graphpcg import EnvSpec, GraphEnv, load_constraint_set
from graphpcg.constraints import MaskChecker

cs = load_constraint_set("set1")
spec = EnvSpec(max_size=5, constraint_set=cs)
print("limits: changes", spec.max_changes, "iterations", spec.max_iterations, "alpha", spec.alpha)

for rep in ("graph_narrow", "graph_wide", "pcgrl_wide"):
    env = GraphEnv(spec, rep, seed=0)
    state, obs = env.reset(cs.config("U=1,V=2,W=1"))
    print(f"{rep:13s} observation {obs.shape}, {env.n_actions} actions")

# graph_narrow: the environment walks the cells, the agent says keep (0) or toggle (1)
env = GraphEnv(spec, "graph_narrow", seed=1)
state, _ = env.reset(cs.config("U=1,V=2,W=1"))
while not env.done:
    cell = env.cursor
    checker = MaskChecker(cs, env.state)
    before = checker.total()
    checker.toggle(*cell)
    action = int(checker.total() < before)  # greedy one-step lookahead
    out = env.step(action)
    print(f"cell {tuple(cell)} action {action} reward {out.reward:+.0f}")
print("ended:", out.info["termination_cause"], "after", out.info["iterations"], "iterations")

# graph_wide: random actions, for contrast
env = GraphEnv(spec, "graph_wide", seed=2)
env.reset()
rng = np.random.default_rng(0)
rewards = []
while not env.done:
    rewards.append(env.step(int(rng.integers(env.n_actions))).reward)
print("random wide episode rewards:", rewards)
