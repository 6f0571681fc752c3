import json
from pathlib import Path

import numpy as np
import pytest

from exoopt.ea import GaParams, run_ga
from exoopt.benchmarks import SphereProblem
from exoopt.experiment import (
    AggregateEntry,
    DesignCatalog,
    ExperimentConfig,
    NondominatedSet,
    RunRecord,
    aggregate_from_dict,
    aggregate_nondominated,
    aggregate_to_dict,
    load_records,
    make_params,
    run_experiment,
    run_single,
    select_designs,
)


def _record(solutions, seed=0, problem="uhex-moop",
            directions=("max", "min", "min"), failed=False):
    return RunRecord(
        seed=seed, problem=problem, link_count=9, algorithm="ga", survival="ns",
        multiobjective=True, directions=list(directions),
        values=[0.5], evaluations=10, gc=1,
        solutions=[{
            "genome": [0.0], "objectives": list(map(float, objs)),
            "violations": [0.0], "aux": dict(aux), "generation": 3,
        } for objs, aux in solutions],
        failed=failed,
    )


def _min_record(solutions, seed=0):
    # plain bi-objective minimization records for the aggregation examples
    return _record(solutions, seed=seed, problem="biobj", directions=("min", "min"))


class TestExperimentConfig:
    def test_json_round_trip(self, tmp_path):
        config = ExperimentConfig(problem="uhex-moop", algorithm="bbbc",
                                  survival="sp", repetitions=3, seed=42)
        path = tmp_path / "config.json"
        config.to_json(path)
        assert ExperimentConfig.from_json(path) == config

    def test_schema_is_versioned(self, tmp_path):
        path = tmp_path / "config.json"
        ExperimentConfig().to_json(path)
        data = json.loads(path.read_text())
        assert data["schema"] == "experiment-config/1"
        data["schema"] = "experiment-config/99"
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError):
            ExperimentConfig.from_json(path)

    def test_rejects_invalid_fields(self):
        with pytest.raises(ValueError):
            ExperimentConfig(problem="uhex")
        with pytest.raises(ValueError):
            ExperimentConfig(repetitions=0)
        with pytest.raises(ValueError):
            ExperimentConfig(problem="external")  # needs command and bounds

    def test_default_population_and_generations(self):
        soop = make_params(ExperimentConfig(problem="sphere"))
        assert soop.pop_size == 300 and soop.generations == 50
        moop = make_params(ExperimentConfig(problem="biobj"))
        assert moop.pop_size == 300 and moop.generations == 100


class TestRunExperiment:
    def test_single_repetition_equals_direct_engine_run(self, tmp_path):
        config = ExperimentConfig(problem="sphere", algorithm="ga", repetitions=1,
                                  population=25, generations=8, seed=7,
                                  output_dir=str(tmp_path / "exp"))
        records = run_experiment(config)
        best, history = run_ga(SphereProblem(),
                               GaParams(pop_size=25, generations=8), seed=7)
        assert records[0].values == [float(v) for v in history.values]
        assert records[0].solutions[0]["objectives"][0] == pytest.approx(
            float(best.evaluation.objectives[0]))

    def test_seed_ladder_and_persistence(self, tmp_path):
        out = tmp_path / "exp"
        config = ExperimentConfig(problem="sphere", repetitions=3, population=20,
                                  generations=5, seed=100, output_dir=str(out))
        records = run_experiment(config)
        assert [r.seed for r in records] == [100, 101, 102]
        loaded_config, loaded = load_records(out)
        assert loaded_config == config
        assert [r.seed for r in loaded] == [100, 101, 102]
        assert loaded[0].values == records[0].values
        assert (out / "summary.json").exists() and (out / "timing.json").exists()

    def test_rerun_is_byte_identical_on_deterministic_files(self, tmp_path):
        def run(where):
            config = ExperimentConfig(problem="biobj", algorithm="ga", survival="ns",
                                      repetitions=2, population=20, generations=6,
                                      seed=3, output_dir=str(where))
            run_experiment(config)
            return {
                p.relative_to(where): p.read_bytes()
                for p in sorted(where.rglob("*.json"))
                if p.name not in ("timing.json", "config.json")
            }

        first = run(tmp_path / "a")
        second = run(tmp_path / "b")
        assert first == second

    def test_failed_run_is_recorded_not_raised(self):
        config = ExperimentConfig(problem="external",
                                  external_command="false",
                                  external_lower=[0.0], external_upper=[1.0],
                                  external_timeout=0.5,
                                  population=4, generations=1, repetitions=1)
        record = run_single(config, seed=0)
        # every evaluation is sentinel-infeasible, so the run completes with
        # infeasible solutions rather than raising
        assert not record.failed
        assert all(any(v > 0 for v in s["violations"]) for s in record.solutions) \
            or record.solutions

    def test_summary_excludes_failed_runs(self, tmp_path):
        rec_ok = _record([((1.0, 1.0, 1.0), {"Lx": 1.0})], seed=0)
        rec_bad = _record([], seed=1, failed=True)
        from exoopt.experiment import summarize
        summary = summarize([rec_ok, rec_bad])
        assert summary["failed_seeds"] == [1]
        assert summary["final_value"]["n"] == 1


class TestAggregateNondominated:
    def test_two_run_union_example(self):
        records = [
            _min_record([((1.0, 2.0), {})], seed=0),
            _min_record([((2.0, 1.0), {}), ((3.0, 3.0), {})], seed=1),
        ]
        agg = aggregate_nondominated(records)
        assert sorted(tuple(e.objectives) for e in agg.entries) == \
            [(1.0, 2.0), (2.0, 1.0)]

    def test_single_run_idempotence(self):
        records = [_min_record([((1.0, 2.0), {}), ((0.5, 3.0), {}), ((2.0, 4.0), {})])]
        agg = aggregate_nondominated(records)
        objs = sorted(tuple(e.objectives) for e in agg.entries)
        assert objs == [(0.5, 3.0), (1.0, 2.0)]

    def test_every_excluded_member_is_dominated(self):
        rng = np.random.default_rng(5)
        pts = rng.random((40, 2))
        records = [_min_record([(tuple(p), {}) for p in pts])]
        agg = aggregate_nondominated(records)
        kept = {tuple(e.objectives) for e in agg.entries}
        for p in pts:
            if tuple(p) in kept:
                continue
            assert any(np.all(np.asarray(k) <= p) and np.any(np.asarray(k) < p)
                       for k in kept)

    def test_duplicates_collapse_with_provenance(self):
        records = [
            _min_record([((1.0, 2.0), {})], seed=0),
            _min_record([((1.0, 2.0), {})], seed=1),
        ]
        agg = aggregate_nondominated(records)
        assert len(agg.entries) == 1
        assert [p["seed"] for p in agg.entries[0].provenance] == [0, 1]

    def test_mixed_problem_definitions_rejected(self):
        records = [
            _min_record([((1.0, 2.0), {})], seed=0),
            _record([((1.0, 2.0, 3.0), {})], seed=1),
        ]
        with pytest.raises(ValueError, match="mixed"):
            aggregate_nondominated(records)

    def test_infeasible_solutions_excluded(self):
        rec = _min_record([((0.0, 0.0), {})])
        rec.solutions[0]["violations"] = [0.5]
        rec2 = _min_record([((1.0, 1.0), {})], seed=1)
        agg = aggregate_nondominated([rec, rec2])
        assert [tuple(e.objectives) for e in agg.entries] == [(1.0, 1.0)]

    def test_order_of_records_does_not_change_the_set(self):
        a = _min_record([((1.0, 2.0), {}), ((2.0, 1.0), {})], seed=0)
        b = _min_record([((1.5, 1.5), {})], seed=1)
        objs1 = [tuple(e.objectives) for e in aggregate_nondominated([a, b]).entries]
        objs2 = [tuple(e.objectives) for e in aggregate_nondominated([b, a]).entries]
        assert objs1 == objs2

    def test_round_trip_via_dict(self):
        agg = aggregate_nondominated([_min_record([((1.0, 2.0), {"Lx": 3.0})])])
        again = aggregate_from_dict(aggregate_to_dict(agg))
        assert [e.objectives for e in again.entries] == \
            [e.objectives for e in agg.entries]


def _agg(triples, problem="uhex-moop"):
    entries = [
        AggregateEntry(genome=[0.0], objectives=list(t), aux={},
                       provenance=[{"run": i, "seed": i, "generation": 0}])
        for i, t in enumerate(triples)
    ]
    return NondominatedSet(problem=problem,
                           directions=["max", "min", "min"], entries=entries)


class TestSelectDesigns:
    def test_actuator_filter_then_argmax(self):
        agg = _agg([(10.0, 1.0, 20.0), (30.0, 0.5, 60.0)])
        catalog = select_designs(agg, feasible_lx=50.0)
        assert catalog.labels["max_obj1"] == 1
        assert catalog.labels["max_obj1_feasible_actuator"] == 0

    def test_singleton_gets_all_labels(self):
        agg = _agg([(10.0, 1.0, 20.0)])
        catalog = select_designs(agg)
        assert set(catalog.labels.values()) == {0}
        assert {"max_obj1", "min_obj2", "min_obj3",
                "max_obj1_feasible_actuator", "balanced"} <= set(catalog.labels)

    def test_empty_actuator_subset_flags_missing_label(self):
        agg = _agg([(10.0, 1.0, 90.0), (20.0, 2.0, 80.0)])
        catalog = select_designs(agg, feasible_lx=50.0)
        assert "max_obj1_feasible_actuator" not in catalog.labels
        assert catalog.flags

    def test_tie_breaks_by_next_criterion(self):
        agg = _agg([(10.0, 2.0, 30.0), (10.0, 1.0, 40.0)])
        catalog = select_designs(agg)
        # equal obj1: the lexicographically better remaining objectives win
        assert catalog.labels["max_obj1"] == 1

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            select_designs(NondominatedSet(problem="uhex-moop",
                                           directions=["max", "min", "min"],
                                           entries=[]))

    def test_unknown_balanced_rule_rejected(self):
        with pytest.raises(ValueError):
            select_designs(_agg([(1.0, 1.0, 1.0)]), balanced_rule="vibes")
