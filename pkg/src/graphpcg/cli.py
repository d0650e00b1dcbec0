"""Command-line entry point.

Exit codes: 0 success, 1 domain or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .baselines import DEFAULT_BUDGET
from .composer import CompositeGraph, JunctionRule, concatenate, validate_composite
from .constraints import ConstraintSet, load_constraint_set, total_violations
from .environment import EnvSpec, Representation, sample_configuration
from .errors import CompositionError, ConfigurationError, ConstraintParseError, TrainingError
from .export import DOMAIN_DIRECTIONS, directions_for, dumps_graph, loads_graph, to_dot
from .graph_model import GraphConfig, GraphState
from .learner import PolicyModel, TrainSpec, check_config, generate, train, write_training_log

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

GRID_EPILOG = """\
reproducing the full model grid (5 constraint sets x sizes 4-10 x 3 representations):

  for set in set1 set2 set3 set4 set5; do
    for n in 4 5 6 7 8 9 10; do
      python -m graphpcg train --constraints $set --repr graph_narrow \\
          --max-size $n --steps 500000 --out models/$set-graph_narrow-$n.gpcg
      for r in graph_wide pcgrl_wide; do
        python -m graphpcg train --constraints $set --repr $r \\
            --max-size $n --steps 1500000 --out models/$set-$r-$n.gpcg
      done
    done
  done

Sets 2 and 3 have two node types, the others three.  Sizes below a set's
smallest feasible graph (set 3 needs 3 nodes, set 4 needs 5) are rejected.
Then time generation against the baselines:

  python -m graphpcg bench --sets set1 set2 set3 set4 set5 --sizes 5 6 7 \\
      --model-dir models --out results
"""


class CliError(Exception):
    """Domain failure reported with exit code 1."""


def _constraints(arg: str) -> ConstraintSet:
    return load_constraint_set(arg)


def _write(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _render(graph: GraphState | CompositeGraph, cs: ConstraintSet, fmt: str, name: str = "G") -> str:
    if fmt == "dot":
        return to_dot(graph, cs.alphabet, directions_for(cs.alphabet), name=name)
    return dumps_graph(graph, cs.alphabet)


def _format_for(out: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    return "dot" if out.endswith((".dot", ".gv")) else "json"


def cmd_train(args) -> int:
    cs = _constraints(args.constraints)
    env_spec = EnvSpec(args.max_size, cs)
    spec = TrainSpec(env_spec, args.repr, args.steps, seed=args.seed)

    def progress(row):
        if not args.quiet and (row["update"] % 20 == 0 or row["update"] == spec.n_updates):
            print(f"update {row['update']}/{spec.n_updates}  validity {row['validity_rate']:.3f}  "
                  f"reward {row['mean_reward']:.2f}", file=sys.stderr)

    model, rows = train(spec, progress)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    log_path = Path(args.log) if args.log else out.with_suffix(".csv")
    write_training_log(rows, log_path)
    print(f"model written to {out} ({spec.n_updates} updates), log {log_path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    model = PolicyModel.load(args.model)
    cs = model.env_spec.constraint_set
    rng = np.random.default_rng(args.seed)
    if args.config:
        config = GraphConfig.parse(cs.alphabet, args.config)
        check_config(model, config)
    else:
        if args.size > model.env_spec.max_size:
            raise ConfigurationError(f"size {args.size} exceeds the model's max size {model.env_spec.max_size}")
        config = sample_configuration(cs, model.env_spec.max_size, rng, size=args.size)
    state, trace = generate(model, config, seed=rng, greedy=not args.sample)
    _write(args.out, _render(state, cs, _format_for(args.out, args.format)))
    print(f"config {config}")
    print(f"valid {str(trace.valid).lower()}")
    print(f"iterations {trace.iterations}")
    return EXIT_OK if trace.valid else EXIT_FAIL


def cmd_validate(args) -> int:
    cs = _constraints(args.constraints)
    graph = loads_graph(Path(args.graph).read_text(encoding="utf-8"), cs.alphabet)
    if isinstance(graph, CompositeGraph):
        flat, nodes = graph.flatten()
        labels = [CompositeGraph.name(nd) for nd in nodes]
    else:
        flat, labels = graph, [str(i) for i in range(graph.n)]
    report = total_violations(cs, flat)
    for i, count in enumerate(report.per_node):
        if flat.is_empty_node(i):
            continue
        print(f"node {labels[i]} ({cs.alphabet.display(int(flat.diagonal[i]))}): {count}")
    print(f"missing required {report.missing_required}")
    print(f"disallowed edge ends {report.disallowed_edges}")
    print(f"total {report.total}")
    print("valid" if report.valid else "invalid")
    return EXIT_OK if report.valid else EXIT_FAIL


def _find_model(model_dir: Path | None, cs: ConstraintSet, size: int, representation: str):
    """Smallest-ceiling model in ``model_dir`` trained on ``cs`` that fits ``size``."""
    if model_dir is None or not model_dir.is_dir():
        return None
    best = None
    for path in sorted(model_dir.glob("*.gpcg")):
        try:
            m = PolicyModel.load(path)
        except (ValueError, OSError):
            continue
        if (m.env_spec.constraint_set == cs and str(m.representation) == representation
                and m.env_spec.max_size >= size
                and (best is None or m.env_spec.max_size < best.env_spec.max_size)):
            best = m
    return best


def cmd_bench(args) -> int:
    model_dir = Path(args.model_dir) if args.model_dir else None
    tasks, models, trained = [], {}, {}
    for set_id in args.sets:
        cs = _constraints(set_id)
        for size in args.sizes:
            for method in args.methods:
                tasks.append(bench.BenchTask(method, set_id, size, args.runs, args.seed))
                if method != "trained-model":
                    continue
                model = _find_model(model_dir, cs, size, args.repr)
                if model is None and args.train_steps:
                    if set_id not in trained:
                        ceiling = max(args.sizes)
                        print(f"training {args.repr} model for {set_id} up to size {ceiling}", file=sys.stderr)
                        spec = TrainSpec(EnvSpec(ceiling, cs), args.repr, args.train_steps, seed=args.seed)
                        trained[set_id], _ = train(spec)
                        if model_dir is not None:
                            model_dir.mkdir(parents=True, exist_ok=True)
                            trained[set_id].save(model_dir / f"{set_id}-{args.repr}-{ceiling}.gpcg")
                    model = trained[set_id]
                if model is None:
                    raise CliError(f"no {args.repr} model for {set_id} size {size}; "
                                   "pass --model-dir with trained models or --train-steps")
                models[(set_id, size)] = model
    rows = bench.run_tasks(tasks, lambda t: models.get((t.set_id, t.size)), parallel=args.parallel,
                           budget=args.budget)
    for row in rows:
        print(f"{row['set']} size {row['size']} {row['method']}: median {row['median_ms']:.3f} ms, "
              f"{row['failures']} failures")
    csv_path, md_path = bench.emit_report(rows, args.out)
    if args.samples and models:
        lines = ["set,max_size,representation,samples,validity_rate,mean_iterations"]
        seen = set()
        for (set_id, _), model in models.items():
            if id(model) in seen:
                continue
            seen.add(id(model))
            rate, its = bench.validity_rate(model, args.samples, args.seed)
            lines.append(f"{set_id},{model.env_spec.max_size},{model.representation},{args.samples},{rate:.6g},{its:.6g}")
            print(f"{set_id} max size {model.env_spec.max_size}: validity {rate:.3f}, mean iterations {its:.2f}")
        _write(Path(args.out) / "validity.csv", "\n".join(lines) + "\n")
    print(f"wrote {csv_path} and {md_path}")
    failures = sum(r["failures"] for r in rows)
    return EXIT_OK if failures == 0 else EXIT_FAIL


def _junction(spec, default: JunctionRule | None) -> JunctionRule:
    if spec is None:
        if default is None:
            raise CliError("plan entry has no junction and the plan sets no default")
        return default
    try:
        return JunctionRule(spec["from"], spec["to"], int(spec.get("edges", 1)))
    except (KeyError, TypeError):
        raise CliError(f"junction must look like {{\"from\": T, \"to\": T}}, got {spec!r}") from None


def _generate_valid(model: PolicyModel, config: GraphConfig, rng, retries: int, what: str) -> GraphState:
    for _ in range(retries):
        state, trace = generate(model, config, seed=rng)
        if trace.valid:
            return state
    raise CliError(f"{what} ({config}) not valid after {retries} attempts")


def cmd_compose(args) -> int:
    model = PolicyModel.load(args.model)
    cs = model.env_spec.constraint_set
    try:
        plan = json.loads(Path(args.plan).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"plan is not valid JSON: {exc}") from None
    if not isinstance(plan, dict) or not plan.get("base") or not plan.get("subgraphs"):
        raise CliError("plan needs a 'base' configuration and a non-empty 'subgraphs' list")
    default = _junction(plan["junction"], None) if "junction" in plan else None
    rng = np.random.default_rng(args.seed)

    def config_of(text):
        config = GraphConfig.parse(cs.alphabet, text)
        check_config(model, config)
        return config

    composite = CompositeGraph.from_graph(_generate_valid(model, config_of(plan["base"]), rng, args.retries, "base"))
    for k, entry in enumerate(plan["subgraphs"], start=2):
        if isinstance(entry, str):
            entry = {"config": entry}
        rule = _junction(entry.get("junction"), default)
        sub = _generate_valid(model, config_of(entry["config"]), rng, args.retries, f"subgraph {k}")
        composite = concatenate(composite, sub, rule, cs, seed=rng)
    if not validate_composite(composite, cs):
        raise CliError("composed graph is not valid")
    out = Path(args.out)
    stem = out.with_suffix("") if out.suffix in (".json", ".dot") else out
    _write(stem.with_suffix(".json"), dumps_graph(composite, cs.alphabet))
    _write(stem.with_suffix(".dot"), to_dot(composite, cs.alphabet, directions_for(cs.alphabet), name=stem.name))
    flat, _ = composite.flatten()
    print(f"composed {len(composite.subgraphs)} subgraphs, {flat.n} nodes, {len(flat.edge_list())} edges, valid")
    print(f"wrote {stem.with_suffix('.json')} and {stem.with_suffix('.dot')}")
    return EXIT_OK


def cmd_export(args) -> int:
    cs = _constraints(args.constraints)
    graph = loads_graph(Path(args.graph).read_text(encoding="utf-8"), cs.alphabet)
    fmt = _format_for(args.out or "", args.format)
    if fmt == "dot":
        if args.directions == "auto":
            directions = directions_for(cs.alphabet)
        elif args.directions == "none":
            directions = None
        else:
            pairs = DOMAIN_DIRECTIONS[args.directions]
            directions = tuple((cs.alphabet.display(cs.type(a)), cs.alphabet.display(cs.type(b))) for a, b in pairs)
        text = to_dot(graph, cs.alphabet, directions, name=Path(args.graph).stem)
    else:
        text = dumps_graph(graph, cs.alphabet)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphpcg",
        description="Generate constraint-satisfying typed graphs with reinforcement learning.",
        epilog=GRID_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    reprs = [r.value for r in Representation]

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        return p

    p = add("train", "train a PPO model and write it with its training log")
    p.add_argument("--constraints", required=True, help="constraint JSON file or builtin name (set1..set5, economy, skilltree)")
    p.add_argument("--repr", choices=reprs, default="graph_wide")
    p.add_argument("--max-size", type=_positive, required=True)
    p.add_argument("--steps", type=_positive, default=500_000, help="environment steps, a multiple of 1250")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--log", help="training log CSV (default: model path with .csv)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = add("generate", "generate one graph with a trained model")
    p.add_argument("--model", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help='exact node counts, e.g. "U=2,V=2,W=1"')
    group.add_argument("--size", type=_positive, help="graph size; counts are sampled")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("dot", "json"), help="default: from the --out suffix")
    p.add_argument("--sample", action="store_true", help="sample actions instead of taking the most likely")
    p.set_defaults(func=cmd_generate)

    p = add("validate", "report per-node constraint violations of a graph file")
    p.add_argument("--constraints", required=True)
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_validate)

    p = add("bench", "time trained models against the search baselines")
    p.add_argument("--sets", nargs="+", default=["set1", "set2", "set3", "set4", "set5"])
    p.add_argument("--sizes", nargs="+", type=_positive, default=[5, 6, 7])
    p.add_argument("--methods", nargs="+", choices=bench.METHODS, default=list(bench.METHODS))
    p.add_argument("--runs", type=_positive, default=100)
    p.add_argument("--samples", type=int, default=500, help="validity samples per model (0 to skip)")
    p.add_argument("--out", required=True, help="directory for bench.csv, bench.md and validity.csv")
    p.add_argument("--model-dir", help="directory of *.gpcg models to pick from")
    p.add_argument("--train-steps", type=_positive, help="train missing models for this many steps")
    p.add_argument("--repr", choices=reprs, default="graph_wide")
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET, help="random-search toggle budget per run")
    p.add_argument("--parallel", action="store_true", help="run distinct tasks on separate threads")
    p.set_defaults(func=cmd_bench)

    p = add("compose", "build a large graph by joining generated subgraphs")
    p.add_argument("--model", required=True)
    p.add_argument("--plan", required=True, help="JSON plan: base config, subgraph configs, junction rules")
    p.add_argument("--out", required=True, help="output stem; .json and .dot are written")
    p.add_argument("--retries", type=_positive, default=100, help="generation attempts per subgraph")
    p.set_defaults(func=cmd_compose)

    p = add("export", "convert a graph JSON file to DOT or normalised JSON")
    p.add_argument("--constraints", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=("dot", "json"))
    p.add_argument("--out")
    p.add_argument("--directions", choices=("auto", "none", *DOMAIN_DIRECTIONS), default="auto")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigurationError, ConstraintParseError, CompositionError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except KeyError as exc:
        print(f"error: unknown name {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
