"""
Time-to-valid table
===================

Median milliseconds until a valid graph, per constraint set, size and
method.  Pass a directory of trained ``*.gpcg`` models to include them.

    python demos/07_bench_table.py [model_dir]
"""
import sys
from pathlib import Path

from graphpcg.bench import BenchTask, emit_report, report_markdown, run_tasks
from graphpcg.learner import PolicyModel

models = {}
if len(sys.argv) > 1:
    for path in Path(sys.argv[1]).glob("*.gpcg"):
        m = PolicyModel.load(path)
        name = (m.env_spec.constraint_set.source or "").removeprefix("builtin:")
        models[name] = m

tasks = []
for name in ("set1", "set2", "set5"):
    for size in (5, 6, 7):
        methods = ["ea", "random-search"]
        if name in models and models[name].env_spec.max_size >= size:
            methods.insert(0, "trained-model")
        tasks += [BenchTask(m, name, size, runs=20, seed=size) for m in methods]

rows = run_tasks(tasks, model_for=lambda t: models.get(t.set_id))
print(report_markdown(rows))
emit_report(rows, "bench_out")
