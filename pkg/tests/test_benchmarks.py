import numpy as np
import pytest

from exoopt.benchmarks import (
    BIOBJ_MAX_HYPERVOLUME,
    BIOBJ_NORMALIZATION,
    BiObjectiveProblem,
    SphereProblem,
    biobj_front_error,
)
from exoopt.metrics import hypervolume


class TestSphere:
    def test_optimum_at_origin(self):
        ev = SphereProblem().evaluate(np.zeros(5))
        assert ev.objectives[0] == 0.0
        assert ev.feasible

    def test_value_and_bounds(self):
        p = SphereProblem(dim=3, bound=2.0)
        assert p.evaluate(np.array([1.0, 2.0, -1.0])).objectives[0] == pytest.approx(6.0)
        assert np.array_equal(p.bounds.lower, [-2.0, -2.0, -2.0])

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            SphereProblem(dim=0)


class TestBiObjective:
    def test_objective_values(self):
        ev = BiObjectiveProblem().evaluate(np.array([1.0]))
        assert np.allclose(ev.objectives, [1.0, 1.0])

    def test_front_relation_holds_on_pareto_branch(self):
        p = BiObjectiveProblem()
        objs = np.stack([p.evaluate(np.array([x])).objectives
                         for x in np.linspace(0.0, 2.0, 21)])
        assert np.all(biobj_front_error(objs) <= 1e-12)

    def test_off_branch_points_violate_relation(self):
        p = BiObjectiveProblem()
        objs = p.evaluate(np.array([-1.0])).objectives[None, :]
        assert biobj_front_error(objs)[0] > 1.0

    def test_analytic_max_hypervolume_matches_dense_front(self):
        # a dense sample of the true front must approach the closed form
        x = np.linspace(0.0, 2.0, 4001)
        front = np.stack([x * x, (x - 2.0) ** 2], axis=1)
        hv = hypervolume(front, normalization=BIOBJ_NORMALIZATION)
        assert hv == pytest.approx(BIOBJ_MAX_HYPERVOLUME, abs=1e-4)
        assert BIOBJ_MAX_HYPERVOLUME == pytest.approx(1.21 - 1.0 / 6.0)
