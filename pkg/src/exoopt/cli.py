"""Command-line experiment runner.

Subcommands: ``run`` (seeded repetitions), ``aggregate`` (cross-run
non-dominated union), ``select`` (catalog design labeling), ``export``
(CSV/SVG/JSON reports), and ``oracle`` (brute-force grid search).
Configuration comes from a versioned-schema JSON file, a set of flags, or
both; flags override file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    aggregate_from_dict,
    aggregate_nondominated,
    aggregate_to_dict,
    catalog_to_dict,
    load_records,
    run_experiment,
    select_designs,
)

CONFIG_FLAGS = {
    "problem": "problem",
    "algorithm": "algorithm",
    "survival": "survival",
    "link_count": "link_count",
    "generations": "generations",
    "population": "population",
    "repetitions": "repetitions",
    "seed": "seed",
    "output_dir": "output_dir",
    "max_evaluations": "max_evaluations",
    "external_evaluator": "external_command",
    "feasible_lx": "feasible_lx",
}


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON experiment config (schema experiment-config/1)")
    parser.add_argument("--problem", choices=(
        "sphere", "biobj", "uhex-soop", "uhex-soop-con7", "uhex-moop", "external"))
    parser.add_argument("--algorithm", choices=("ga", "bbbc"))
    parser.add_argument("--survival", choices=("ns", "sp"))
    parser.add_argument("--link-count", type=int, choices=(6, 9), dest="link_count")
    parser.add_argument("--generations", type=int)
    parser.add_argument("--population", type=int)
    parser.add_argument("--repetitions", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--max-evaluations", type=int, dest="max_evaluations")
    parser.add_argument("--feasible-lx", type=float, dest="feasible_lx")
    parser.add_argument("--external-evaluator", dest="external_evaluator",
                        help="command line of a line-JSON evaluator subprocess")


def _build_config(args) -> ExperimentConfig:
    if args.config:
        base = dataclasses.asdict(ExperimentConfig.from_json(args.config))
    else:
        base = dataclasses.asdict(ExperimentConfig())
    for flag, field in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[field] = value
    return ExperimentConfig(**base)


def _cmd_run(args) -> int:
    config = _build_config(args)
    records = run_experiment(config)
    ok = [r for r in records if not r.failed]
    print(f"{config.problem} / {config.algorithm}"
          + (f"-{config.survival or 'ns'}" if config.multiobjective else "")
          + f": {len(ok)}/{len(records)} runs succeeded")
    with open(Path(config.output_dir) / "summary.json") as fh:
        summary = json.load(fh)
    fv = summary["final_value"]
    if fv["n"]:
        kind = "final hypervolume" if config.multiobjective else "final best"
        print(f"{kind}: {fv['mean']:.6g} +/- {fv['std']:.3g} over {fv['n']} runs")
        print(f"GC: {summary['gc']['mean']:.1f} +/- {summary['gc']['std']:.1f}")
    for seed in summary["failed_seeds"]:
        print(f"run seed {seed} failed: {summary['errors'][str(seed)]}", file=sys.stderr)
    print(f"artifacts in {config.output_dir}")
    return 0 if ok else 1


def _cmd_aggregate(args) -> int:
    config, records = load_records(args.output_dir)
    agg = aggregate_nondominated(records)
    path = Path(args.output_dir) / "aggregate.json"
    with open(path, "w") as fh:
        json.dump(aggregate_to_dict(agg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(agg.entries)} non-dominated solutions -> {path}")
    return 0


def _load_aggregate(output_dir):
    path = Path(output_dir) / "aggregate.json"
    if not path.exists():
        raise SystemExit(f"{path} not found; run the aggregate subcommand first")
    with open(path) as fh:
        return aggregate_from_dict(json.load(fh))


def _cmd_select(args) -> int:
    config, _ = load_records(args.output_dir)
    agg = _load_aggregate(args.output_dir)
    feasible_lx = args.feasible_lx if args.feasible_lx is not None else config.feasible_lx
    catalog = select_designs(agg, feasible_lx=feasible_lx)
    path = Path(args.output_dir) / "catalog.json"
    with open(path, "w") as fh:
        json.dump(catalog_to_dict(catalog, agg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for label, idx in sorted(catalog.labels.items()):
        objs = ", ".join(f"{v:.4g}" for v in agg.entries[idx].objectives)
        print(f"{label}: ({objs})")
    for flag in catalog.flags:
        print(f"note: {flag}")
    return 0


def _cmd_export(args) -> int:
    from .export import export_artifacts

    config, records = load_records(args.output_dir)
    agg = catalog = None
    if any(r.multiobjective and not r.failed for r in records):
        agg = aggregate_nondominated(records)
        feasible_lx = args.feasible_lx if args.feasible_lx is not None else config.feasible_lx
        catalog = select_designs(agg, feasible_lx=feasible_lx) if agg.entries else None
    produced = export_artifacts(records, agg, catalog, args.output_dir,
                                feasible_lx=config.feasible_lx)
    for name, path in sorted(produced.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_oracle(args) -> int:
    from .experiment import make_problem
    from .linkage import brute_force_grid

    config = _build_config(args)
    problem = make_problem(config)
    best = brute_force_grid(problem, args.resolution)
    ev = best.require_evaluation()
    reported = problem.objective_spec.to_reported(ev.objectives)
    result = {
        "resolution": args.resolution,
        "evaluations": args.resolution ** problem.bounds.dim,
        "genome": [float(v) for v in best.genome],
        "objectives": [float(v) for v in reported],
        "feasible": bool(ev.feasible),
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "oracle.json", "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="exoopt", description="evolutionary linkage-design experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute seeded repetitions of one experiment")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_agg = sub.add_parser("aggregate", help="non-dominated union across runs")
    p_agg.add_argument("--output-dir", required=True, dest="output_dir")
    p_agg.set_defaults(func=_cmd_aggregate)

    p_sel = sub.add_parser("select", help="label catalog designs in the aggregate")
    p_sel.add_argument("--output-dir", required=True, dest="output_dir")
    p_sel.add_argument("--feasible-lx", type=float, dest="feasible_lx")
    p_sel.set_defaults(func=_cmd_select)

    p_exp = sub.add_parser("export", help="write CSV/SVG/JSON reports")
    p_exp.add_argument("--output-dir", required=True, dest="output_dir")
    p_exp.add_argument("--feasible-lx", type=float, dest="feasible_lx")
    p_exp.set_defaults(func=_cmd_export)

    p_orc = sub.add_parser("oracle", help="brute-force grid search baseline")
    _add_config_flags(p_orc)
    p_orc.add_argument("--resolution", type=int, default=5)
    p_orc.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
