import numpy as np
import pytest
from hypothesis import given, strategies as st

from exoopt.core import (
    Bounds,
    Evaluation,
    Individual,
    InvalidBoundsError,
    ObjectiveSpec,
    evaluate_population,
    generation_rng,
    random_init,
)


class TestBounds:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(InvalidBoundsError):
            Bounds(np.array([1.0]), np.array([0.0]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidBoundsError):
            Bounds(np.array([0.0, 0.0]), np.array([1.0]))

    def test_clamp_is_identity_inside(self):
        b = Bounds(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
        x = np.array([0.5, 0.0])
        assert np.array_equal(b.clamp(x), x)

    def test_clamp_repairs_outside(self):
        b = Bounds(np.array([0.0]), np.array([1.0]))
        assert b.clamp(np.array([2.0]))[0] == 1.0
        assert b.clamp(np.array([-2.0]))[0] == 0.0

    def test_span_and_contains(self):
        b = Bounds(np.array([1.0, 2.0]), np.array([3.0, 6.0]))
        assert np.array_equal(b.span, [2.0, 4.0])
        assert b.contains([2.0, 4.0])
        assert not b.contains([0.0, 4.0])


class TestObjectiveSpec:
    def test_max_objectives_negate(self):
        spec = ObjectiveSpec(("max", "min"))
        reported = np.array([3.0, 4.0])
        canonical = spec.to_canonical(reported)
        assert np.array_equal(canonical, [-3.0, 4.0])
        assert np.array_equal(spec.to_reported(canonical), reported)

    def test_rejects_bad_direction(self):
        with pytest.raises(ValueError):
            ObjectiveSpec(("max", "sideways"))


class TestEvaluation:
    def test_feasible_iff_zero_violations(self):
        assert Evaluation(np.array([1.0]), np.zeros(3)).feasible
        assert not Evaluation(np.array([1.0]), np.array([0.0, 0.1])).feasible

    def test_rejects_negative_violations(self):
        with pytest.raises(ValueError):
            Evaluation(np.array([1.0]), np.array([-0.1]))

    def test_total_violation_normalizes_by_scales(self):
        ev = Evaluation(np.array([0.0]), np.array([5.0, 30.0]))
        assert ev.total_violation(np.array([10.0, 60.0])) == pytest.approx(1.0)
        assert ev.total_violation() == pytest.approx(35.0)

    def test_require_evaluation_raises_when_missing(self):
        with pytest.raises(RuntimeError):
            Individual(genome=np.zeros(2)).require_evaluation()


class TestRng:
    def test_generation_rng_is_reproducible(self):
        a = generation_rng(7, 3).random(5)
        b = generation_rng(7, 3).random(5)
        assert np.array_equal(a, b)

    def test_generation_rng_varies_with_generation(self):
        assert not np.array_equal(generation_rng(7, 0).random(5),
                                  generation_rng(7, 1).random(5))

    @given(st.integers(0, 10_000), st.integers(0, 100))
    def test_streams_distinct_across_seeds(self, seed, gen):
        x = generation_rng(seed, gen).random()
        y = generation_rng(seed + 1, gen).random()
        assert x != y


class _CountingProblem:
    def __init__(self):
        self.calls = 0

    def evaluate(self, genome):
        self.calls += 1
        return Evaluation(np.array([float(np.sum(genome))]), np.zeros(0))


class TestPopulation:
    def test_random_init_within_bounds(self):
        b = Bounds(np.array([-1.0, 5.0]), np.array([1.0, 9.0]))
        pop = random_init(b, 50, 0)
        assert len(pop) == 50
        assert all(b.contains(ind.genome) for ind in pop)

    def test_random_init_rejects_empty(self):
        with pytest.raises(ValueError):
            random_init(Bounds(np.zeros(1), np.ones(1)), 0, 0)

    def test_evaluate_population_skips_already_evaluated(self):
        problem = _CountingProblem()
        pop = random_init(Bounds(np.zeros(2), np.ones(2)), 5, 1)
        pop[0].evaluation = problem.evaluate(pop[0].genome)
        problem.calls = 0
        evaluate_population(pop, problem)
        assert problem.calls == 4
        assert all(ind.evaluation is not None for ind in pop)
