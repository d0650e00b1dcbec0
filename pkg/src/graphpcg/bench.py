"""Evaluation harness: validity over sample batches and time-to-valid per method.

Timing covers the generation loop only (environment reset included, model
loading and report writing excluded).  A run that exhausts its budget is
counted as a failure and left out of the percentiles.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .baselines import DEFAULT_BUDGET, EAParams, ea_generate, random_search
from .constraints import ConstraintSet, is_valid, load_constraint_set
from .environment import GraphEnv, sample_configuration
from .learner import PolicyModel, generate

METHODS = ("trained-model", "ea", "random-search")
REPORT_FIELDS = (
    "set", "size", "method", "runs", "validity_rate", "mean_iterations",
    "median_ms", "p25_ms", "p75_ms", "failures",
)
MODEL_ATTEMPTS = 100  # episodes per trained-model run before it counts as a failure


@dataclass(frozen=True)
class BenchTask:
    method: str
    set_id: str
    size: int
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


def validity_rate(model: PolicyModel, n_samples: int = 500, seed: int = 0) -> tuple[float, float]:
    """Greedy generation from ``n_samples`` sampled configurations.

    Returns (fraction valid, mean episode iterations).  Each result is
    re-checked with the constraints oracle.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    cs = model.env_spec.constraint_set
    env = GraphEnv(model.env_spec, model.representation)
    seeds = np.random.SeedSequence(seed).spawn(n_samples)
    valid = np.zeros(n_samples, dtype=bool)
    iterations = np.zeros(n_samples)
    for i, ss in enumerate(seeds):
        state, trace = generate(model, None, seed=np.random.default_rng(ss), env=env)
        ok = is_valid(cs, state)
        if ok != trace.valid:
            raise AssertionError("episode validity disagrees with the constraints oracle")
        valid[i] = ok
        iterations[i] = trace.iterations
    return float(valid.mean()), float(iterations.mean())


def _model_run(model: PolicyModel, cs: ConstraintSet, size: int, rng: np.random.Generator,
               env: GraphEnv) -> tuple[bool, int, float]:
    start = time.perf_counter()
    config = sample_configuration(cs, model.env_spec.max_size, rng, size=size)
    iterations = 0
    for _ in range(MODEL_ATTEMPTS):
        state, trace = generate(model, config, seed=rng, env=env)
        iterations += trace.iterations
        if trace.valid:
            break
    elapsed = (time.perf_counter() - start) * 1e3
    return is_valid(cs, state), iterations, elapsed


def _search_run(method: str, cs: ConstraintSet, size: int, rng: np.random.Generator,
                budget: int) -> tuple[bool, int, float]:
    start = time.perf_counter()
    config = sample_configuration(cs, size, rng, size=size)
    if method == "ea":
        state, stats = ea_generate(cs, config, params=EAParams(seed=rng))
        iterations = stats.generations
    else:
        state, stats = random_search(cs, config, seed=rng, budget=budget)
        iterations = stats.evaluations
    elapsed = (time.perf_counter() - start) * 1e3
    return is_valid(cs, state), iterations, elapsed


def time_to_valid(task: BenchTask, model: PolicyModel | None = None,
                  constraint_set: ConstraintSet | None = None, budget: int = DEFAULT_BUDGET) -> dict:
    """Run ``task.runs`` independent generations and summarise their wall time.

    Configurations are sampled uniformly among those of exactly
    ``task.size`` nodes.  ``mean_iterations`` counts agent steps for the
    model, generations for the EA and toggles for random search.
    """
    if task.method == "trained-model":
        if model is None:
            raise ValueError("the trained-model method needs a model")
        cs = model.env_spec.constraint_set
        if task.size > model.env_spec.max_size:
            raise ValueError(f"size {task.size} exceeds the model's max size {model.env_spec.max_size}")
        env = GraphEnv(model.env_spec, model.representation)
    else:
        cs = constraint_set or load_constraint_set(task.set_id)
    rng = np.random.default_rng(task.seed)
    valid, iterations, times = [], [], []
    for _ in range(task.runs):
        if task.method == "trained-model":
            ok, it, ms = _model_run(model, cs, task.size, rng, env)
        else:
            ok, it, ms = _search_run(task.method, cs, task.size, rng, budget)
        valid.append(ok)
        iterations.append(it)
        times.append(ms)
    ok_times = np.array([t for t, v in zip(times, valid) if v])
    if len(ok_times):
        p25, med, p75 = (float(x) for x in np.percentile(ok_times, [25, 50, 75]))
    else:
        p25 = med = p75 = float("nan")
    return {
        "set": task.set_id,
        "size": task.size,
        "method": task.method,
        "runs": task.runs,
        "validity_rate": float(np.mean(valid)),
        "mean_iterations": float(np.mean(iterations)),
        "median_ms": med,
        "p25_ms": p25,
        "p75_ms": p75,
        "failures": int(task.runs - sum(valid)),
    }


def run_tasks(tasks: Sequence[BenchTask], model_for: Callable[[BenchTask], PolicyModel | None] = lambda t: None,
              parallel: bool = False, budget: int = DEFAULT_BUDGET) -> list[dict]:
    """Run tasks in order; with ``parallel`` distinct tasks share a thread pool."""
    def one(task):
        return time_to_valid(task, model_for(task), budget=budget)

    if not parallel:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor() as pool:
        return list(pool.map(one, tasks))


def _fmt(x) -> str:
    return "" if isinstance(x, float) and np.isnan(x) else (f"{x:.6g}" if isinstance(x, float) else str(x))


def report_csv(rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in REPORT_FIELDS})
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row: dict = {"set": raw["set"], "method": raw["method"]}
        for key in ("size", "runs", "failures"):
            row[key] = int(raw[key])
        for key in ("validity_rate", "mean_iterations", "median_ms", "p25_ms", "p75_ms"):
            row[key] = float(raw[key]) if raw[key] else float("nan")
        rows.append(row)
    return rows


def report_markdown(rows: Sequence[Mapping]) -> str:
    """Median ms table: one row per (set, size), one column per method.

    Cells read ``median (failures)`` when some runs failed; the fastest
    method in a row is bold.
    """
    methods = [m for m in METHODS if any(r["method"] == m for r in rows)]
    keys = list(dict.fromkeys((r["set"], r["size"]) for r in rows))
    cell = {(r["set"], r["size"], r["method"]): r for r in rows}
    lines = ["| set | size | " + " | ".join(methods) + " |", "|---|---|" + "---|" * len(methods)]
    for s, n in keys:
        meds = {m: cell[(s, n, m)]["median_ms"] for m in methods if (s, n, m) in cell}
        finite = [v for v in meds.values() if not np.isnan(v)]
        best = min(finite) if finite else None
        parts = []
        for m in methods:
            if m not in meds:
                parts.append("")
                continue
            r = cell[(s, n, m)]
            text = "n/a" if np.isnan(meds[m]) else f"{meds[m]:.1f}"
            if meds[m] == best:
                text = f"**{text}**"
            if r["failures"]:
                text += f" ({r['failures']} failed)"
            parts.append(text)
        lines.append(f"| {s} | {n} | " + " | ".join(parts) + " |")
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[Mapping], out_dir: str | Path, stem: str = "bench") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.md`` under ``out_dir``."""
    rows = list(rows)
    if not rows:
        raise ValueError("no benchmark rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, md_path = out / f"{stem}.csv", out / f"{stem}.md"
    csv_path.write_text(report_csv(rows), encoding="utf-8")
    md_path.write_text(report_markdown(rows), encoding="utf-8")
    return csv_path, md_path
