"""Experiment harness: seeded repetitions, run persistence, cross-run
aggregation of non-dominated solutions, and catalog design selection.

Persistence is split into deterministic files (``record.json``,
``summary.json``) that replay byte-identically for a given config and seed,
and wall-clock files (``timing.json``) kept separate because runtimes are
inherently non-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .benchmarks import BiObjectiveProblem, SphereProblem
from .ea import BbbcParams, GaParams, run_bbbc, run_ga
from .linkage import UhexProblem
from .metrics import (
    MOOP_GC_MARGIN,
    SOOP_GC_MARGIN,
    SOOP_GC_WINDOW,
    convergence_time,
    generation_of_convergence,
    pearson_correlation,
)
from .moea import MoeaParams, run_moea

CONFIG_SCHEMA = "experiment-config/1"
PROBLEM_NAMES = ("sphere", "biobj", "uhex-soop", "uhex-soop-con7", "uhex-moop", "external")
MULTI_OBJECTIVE_PROBLEMS = ("biobj", "uhex-moop")
UHEX_MODES = {"uhex-soop": "soop", "uhex-soop-con7": "soop_con7", "uhex-moop": "moop"}


@dataclass
class ExperimentConfig:
    problem: str = "sphere"
    algorithm: str = "ga"  # "ga" | "bbbc"
    survival: str | None = None  # "ns" | "sp"; multi-objective problems only
    link_count: int = 9
    population: int | None = None
    generations: int | None = None
    repetitions: int = 10
    seed: int = 0
    output_dir: str = "results"
    max_evaluations: int | None = None
    feasible_lx: float = 50.0
    # external-evaluator problems only
    external_command: str | None = None
    external_lower: list | None = None
    external_upper: list | None = None
    external_directions: list | None = None
    external_timeout: float = 10.0

    def __post_init__(self):
        if self.problem not in PROBLEM_NAMES:
            raise ValueError(f"unknown problem: {self.problem}")
        if self.algorithm not in ("ga", "bbbc"):
            raise ValueError(f"unknown algorithm: {self.algorithm}")
        if self.survival not in (None, "ns", "sp"):
            raise ValueError(f"unknown survival strategy: {self.survival}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.problem == "external" and (
            self.external_command is None
            or self.external_lower is None
            or self.external_upper is None
        ):
            raise ValueError("external problems need a command and explicit bounds")

    @property
    def multiobjective(self) -> bool:
        if self.problem == "external":
            return len(self.external_directions or ["min"]) > 1
        return self.problem in MULTI_OBJECTIVE_PROBLEMS

    @property
    def directions(self) -> tuple:
        return tuple(make_problem(self).objective_spec.directions)

    def to_json(self, path):
        data = {"schema": CONFIG_SCHEMA, **asdict(self)}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        schema = data.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema: {schema}")
        return cls(**data)


def make_problem(config: ExperimentConfig):
    if config.problem == "sphere":
        return SphereProblem()
    if config.problem == "biobj":
        return BiObjectiveProblem()
    if config.problem in UHEX_MODES:
        return UhexProblem(mode=UHEX_MODES[config.problem], link_count=config.link_count)
    from .external import ExternalProblem

    return ExternalProblem(
        config.external_command,
        config.external_lower,
        config.external_upper,
        directions=tuple(config.external_directions or ["min"]),
        timeout=config.external_timeout,
    )


def make_params(config: ExperimentConfig):
    if config.multiobjective:
        return MoeaParams(
            engine=config.algorithm,
            survival=config.survival or "ns",
            pop_size=config.population or 300,
            generations=config.generations if config.generations is not None else 100,
            max_evaluations=config.max_evaluations,
        )
    common = dict(
        pop_size=config.population or 300,
        generations=config.generations if config.generations is not None else 50,
        max_evaluations=config.max_evaluations,
    )
    return GaParams(**common) if config.algorithm == "ga" else BbbcParams(**common)


@dataclass
class RunRecord:
    """One seeded run: history, convergence metrics, and final solution(s).

    ``values`` is the per-generation best objective (single-objective) or
    rank-0 hypervolume (multi-objective).  ``solutions`` holds dicts with
    genome, reported-space objectives, violations, aux, and generation.
    """

    seed: int
    problem: str
    link_count: int
    algorithm: str
    survival: str | None
    multiobjective: bool
    directions: list
    values: list = field(default_factory=list)
    evaluations: int = 0
    gc: int = 0
    solutions: list = field(default_factory=list)
    failed: bool = False
    error: str | None = None
    gen_times: list = field(default_factory=list)

    @property
    def runtime(self) -> float:
        return float(sum(self.gen_times))

    @property
    def ct(self) -> float:
        return convergence_time(self.gc, len(self.values), self.runtime)

    @property
    def signs(self) -> np.ndarray:
        return np.array([1.0 if d == "min" else -1.0 for d in self.directions])

    def to_dict(self) -> dict:
        """Deterministic portion of the record (no wall-clock data)."""
        data = asdict(self)
        data.pop("gen_times")
        return data

    def timing_dict(self) -> dict:
        out = {"gen_times": self.gen_times, "runtime": self.runtime}
        if not self.failed and self.values:
            out["ct"] = self.ct
        return out

    @classmethod
    def from_dict(cls, data: dict, timing: dict | None = None) -> "RunRecord":
        rec = cls(**data)
        if timing is not None:
            rec.gen_times = list(timing.get("gen_times", []))
        return rec


def _round_float(v) -> float:
    # canonical JSON-safe float (repr round-trips exactly)
    return float(v)


def _solution_dict(ind, spec, generation: int) -> dict:
    ev = ind.require_evaluation()
    return {
        "genome": [_round_float(v) for v in ind.genome],
        "objectives": [_round_float(v) for v in spec.to_reported(ev.objectives)],
        "violations": [_round_float(v) for v in ev.violations],
        "aux": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else _round_float(v))
                for k, v in sorted(ev.aux.items())},
        "generation": generation,
    }


def run_single(config: ExperimentConfig, seed: int) -> RunRecord:
    record = RunRecord(
        seed=seed,
        problem=config.problem,
        link_count=config.link_count,
        algorithm=config.algorithm,
        survival=config.survival if config.multiobjective else None,
        multiobjective=config.multiobjective,
        directions=[],
    )
    try:
        problem = make_problem(config)
        record.directions = list(problem.objective_spec.directions)
        params = make_params(config)
        if config.multiobjective:
            final, history = run_moea(problem, params, seed)
            members = final.front(0)
            margin = MOOP_GC_MARGIN
        else:
            runner = run_ga if config.algorithm == "ga" else run_bbbc
            best, history = runner(problem, params, seed)
            members = [best]
            margin = SOOP_GC_MARGIN
        last_gen = len(history.values) - 1
        record.values = [_round_float(v) for v in history.values]
        record.gen_times = list(history.gen_times)
        record.evaluations = history.evaluations
        record.gc = generation_of_convergence(history.values, SOOP_GC_WINDOW, margin)
        record.solutions = [
            _solution_dict(m, problem.objective_spec, last_gen) for m in members
        ]
    except Exception as exc:  # noqa: BLE001 - a failed run is data, not a crash
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"
    finally:
        close = getattr(locals().get("problem"), "close", None)
        if close is not None:
            close()
    return record


def _run_dir(output_dir, seed: int) -> Path:
    return Path(output_dir) / "runs" / f"run-{seed:05d}"


def persist_record(output_dir, record: RunRecord) -> Path:
    rdir = _run_dir(output_dir, record.seed)
    rdir.mkdir(parents=True, exist_ok=True)
    with open(rdir / "record.json", "w") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(rdir / "timing.json", "w") as fh:
        json.dump(record.timing_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rdir


def run_experiment(config: ExperimentConfig) -> list:
    """Execute ``repetitions`` seeded runs, persisting each incrementally.

    Run i uses seed ``config.seed + i``.  Failed runs are recorded and kept
    out of the statistics but do not abort the experiment.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.to_json(out / "config.json")
    records = []
    for i in range(config.repetitions):
        record = run_single(config, config.seed + i)
        persist_record(out, record)
        records.append(record)
    summary = summarize(records)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "timing.json", "w") as fh:
        json.dump(_timing_summary(records), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return records


def load_records(output_dir) -> tuple[ExperimentConfig, list]:
    out = Path(output_dir)
    config = ExperimentConfig.from_json(out / "config.json")
    records = []
    for rdir in sorted((out / "runs").iterdir()):
        with open(rdir / "record.json") as fh:
            data = json.load(fh)
        timing = None
        if (rdir / "timing.json").exists():
            with open(rdir / "timing.json") as fh:
                timing = json.load(fh)
        records.append(RunRecord.from_dict(data, timing))
    return config, records


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"mean": None, "std": None, "n": 0}
    return {"mean": float(arr.mean()), "std": float(arr.std(ddof=0)), "n": int(arr.size)}


def summarize(records: list) -> dict:
    """Deterministic cross-run statistics (mean +/- std per quantity).

    Final-value statistics are in reported space for single-objective runs
    (the maximized force-transmission objective is un-negated) and are final
    hypervolumes for multi-objective runs.  Wall-clock statistics live in the
    separate timing summary.
    """
    ok = [r for r in records if not r.failed and r.values]
    finals = []
    for r in ok:
        v = r.values[-1]
        if not r.multiobjective:
            v = float(r.signs[0]) * v
        finals.append(v)
    summary = {
        "runs": len(records),
        "failed_seeds": [r.seed for r in records if r.failed],
        "errors": {str(r.seed): r.error for r in records if r.failed},
        "final_value": _mean_std(finals),
        "gc": _mean_std([r.gc for r in ok]),
        "evaluations": _mean_std([r.evaluations for r in ok]),
    }
    correlations = {}
    if ok and ok[0].multiobjective:
        objs = np.array([s["objectives"] for r in ok for s in r.solutions])
        m = objs.shape[1] if objs.size else 0
        for a in range(m):
            for b in range(a + 1, m):
                try:
                    correlations[f"obj{a + 1}_obj{b + 1}"] = pearson_correlation(
                        objs[:, a], objs[:, b])
                except ValueError:
                    correlations[f"obj{a + 1}_obj{b + 1}"] = None
    summary["correlations"] = correlations
    return summary


def _timing_summary(records: list) -> dict:
    ok = [r for r in records if not r.failed and r.values]
    return {
        "runtime": _mean_std([r.runtime for r in ok]),
        "ct": _mean_std([r.ct for r in ok]),
    }


# --- aggregation and design selection -------------------------------------


@dataclass
class AggregateEntry:
    genome: list
    objectives: list  # reported space
    aux: dict
    provenance: list  # dicts {"run", "seed", "generation"}, ascending run


@dataclass
class NondominatedSet:
    problem: str
    directions: list
    entries: list

    @property
    def objectives(self) -> np.ndarray:
        return np.array([e.objectives for e in self.entries], dtype=float)

    @property
    def canonical(self) -> np.ndarray:
        signs = np.array([1.0 if d == "min" else -1.0 for d in self.directions])
        return self.objectives * signs


def aggregate_nondominated(records: list) -> NondominatedSet:
    """Union of all final feasible solutions, reduced to the mutually
    non-dominated subset; identical objective vectors collapse into one entry
    whose provenance lists every contributing run."""
    ok = [r for r in records if not r.failed]
    if not ok:
        raise ValueError("no successful records to aggregate")
    keys = {(r.problem, r.link_count, tuple(r.directions)) for r in ok}
    if len(keys) != 1:
        raise ValueError(f"mixed problem definitions cannot be aggregated: {sorted(keys)}")
    if not ok[0].multiobjective:
        raise ValueError("aggregation applies to multi-objective records")
    directions = list(ok[0].directions)
    signs = np.array([1.0 if d == "min" else -1.0 for d in directions])

    pool = []
    for run_idx, rec in enumerate(records):
        if rec.failed:
            continue
        for sol in rec.solutions:
            if any(v > 0 for v in sol["violations"]):
                continue
            pool.append((run_idx, rec.seed, sol))
    if not pool:
        return NondominatedSet(problem=ok[0].problem, directions=directions, entries=[])

    canon = np.array([np.asarray(sol["objectives"]) * signs for _, _, sol in pool])
    le = np.all(canon[:, None, :] <= canon[None, :, :], axis=2)
    lt = np.any(canon[:, None, :] < canon[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)

    by_vector: dict = {}
    for keep, (run_idx, seed, sol) in zip(~dominated, pool):
        if not keep:
            continue
        key = tuple(sol["objectives"])
        prov = {"run": run_idx, "seed": seed, "generation": sol["generation"]}
        if key in by_vector:
            by_vector[key].provenance.append(prov)
        else:
            by_vector[key] = AggregateEntry(
                genome=list(sol["genome"]),
                objectives=list(sol["objectives"]),
                aux=dict(sol["aux"]),
                provenance=[prov],
            )
    entries = sorted(
        by_vector.values(),
        key=lambda e: (tuple(np.asarray(e.objectives) * signs), e.provenance[0]["run"]),
    )
    for e in entries:
        e.provenance.sort(key=lambda p: (p["run"], p["generation"]))
    return NondominatedSet(problem=ok[0].problem, directions=directions, entries=entries)


@dataclass
class DesignCatalog:
    """Labeled picks from an aggregate set; labels map to entry indices."""

    labels: dict
    flags: list = field(default_factory=list)


def _entry_lx(entry: AggregateEntry, m: int) -> float:
    if "Lx" in entry.aux:
        return float(entry.aux["Lx"])
    if m >= 3:
        return float(entry.objectives[2])
    return float("nan")


def select_designs(agg: NondominatedSet, feasible_lx: float = 50.0,
                   balanced_rule: str = "chebyshev") -> DesignCatalog:
    """Label catalog designs within an aggregate non-dominated set.

    Labels: max_obj1, min_obj2, min_obj3 (when present),
    max_obj1_feasible_actuator (largest obj1 with actuator excursion strictly
    under ``feasible_lx``), and balanced (smallest normalized Chebyshev
    distance to the ideal point; the rule is configurable).  Ties break by the
    remaining objectives lexicographically, then by lowest run index.
    """
    if not agg.entries:
        raise ValueError("cannot select designs from an empty set")
    if balanced_rule != "chebyshev":
        raise ValueError(f"unknown balanced rule: {balanced_rule}")
    canon = agg.canonical
    n, m = canon.shape

    def tie_key(i: int, primary: int) -> tuple:
        rest = tuple(canon[i, k] for k in range(m) if k != primary)
        return (canon[i, primary], rest, agg.entries[i].provenance[0]["run"], i)

    labels = {}
    flags = []
    labels["max_obj1"] = min(range(n), key=lambda i: tie_key(i, 0))
    if m >= 2:
        labels["min_obj2"] = min(range(n), key=lambda i: tie_key(i, 1))
    if m >= 3:
        labels["min_obj3"] = min(range(n), key=lambda i: tie_key(i, 2))

    actuator_ok = [i for i in range(n) if _entry_lx(agg.entries[i], m) < feasible_lx]
    if actuator_ok:
        labels["max_obj1_feasible_actuator"] = min(
            actuator_ok, key=lambda i: tie_key(i, 0))
    else:
        flags.append(
            f"max_obj1_feasible_actuator: no design with actuator excursion < {feasible_lx}")

    lo, hi = canon.min(axis=0), canon.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    cheb = np.max((canon - lo) / span, axis=1)
    labels["balanced"] = min(
        range(n),
        key=lambda i: (cheb[i], tuple(canon[i]), agg.entries[i].provenance[0]["run"], i),
    )
    return DesignCatalog(labels=labels, flags=flags)


def aggregate_to_dict(agg: NondominatedSet) -> dict:
    return {
        "schema": "aggregate/1",
        "problem": agg.problem,
        "directions": agg.directions,
        "entries": [asdict(e) for e in agg.entries],
    }


def aggregate_from_dict(data: dict) -> NondominatedSet:
    return NondominatedSet(
        problem=data["problem"],
        directions=list(data["directions"]),
        entries=[AggregateEntry(**e) for e in data["entries"]],
    )


def catalog_to_dict(catalog: DesignCatalog, agg: NondominatedSet) -> dict:
    return {
        "schema": "catalog/1",
        "flags": catalog.flags,
        "designs": {
            label: {"index": idx, **asdict(agg.entries[idx])}
            for label, idx in sorted(catalog.labels.items())
        },
    }
