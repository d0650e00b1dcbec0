"""
Training a generator
====================

PPO on graph_wide for Set 2 with graphs of up to four nodes.  A few
hundred thousand steps take a couple of minutes on one core.

    python demos/04_train_and_generate.py [steps]
"""
import sys

from graphpcg import EnvSpec, TrainSpec, generate, load_constraint_set, train
from graphpcg.bench import validity_rate
from graphpcg.export import to_dot

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
cs = load_constraint_set("set2")
spec = TrainSpec(EnvSpec(4, cs), "graph_wide", total_steps=steps, seed=0)


def report(row):
    if row["update"] % 20 == 0:
        print(f"update {row['update']:4d}  validity {row['validity_rate']:.2f}  reward {row['mean_reward']:.2f}")


model, rows = train(spec, report)
rate, iterations = validity_rate(model, n_samples=500, seed=0)
print(f"greedy validity over 500 samples: {rate:.3f}, mean iterations {iterations:.2f}")

# the configuration fixes the node counts; the model only places edges
state, trace = generate(model, cs.config("U=1,V=3"), seed=4)
print("U=1,V=3 ->", trace.termination_cause, "in", trace.iterations, "steps")
print(to_dot(state, cs.alphabet))
model.save("set2_wide_4.gpcg")
