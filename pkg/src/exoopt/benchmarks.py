"""Analytic benchmark problems: the 5-D sphere (single-objective) and a
convex bi-objective problem with a closed-form Pareto front."""

from __future__ import annotations

import numpy as np

from .core import Bounds, Evaluation, ObjectiveSpec


class SphereProblem:
    """Minimize sum(x_i^2) on [-bound, bound]^dim; optimum 0 at the origin."""

    def __init__(self, dim: int = 5, bound: float = 5.0):
        if dim < 1 or bound <= 0:
            raise ValueError("dim must be >= 1 and bound > 0")
        self.bounds = Bounds(np.full(dim, -bound), np.full(dim, bound))
        self.objective_spec = ObjectiveSpec(("min",))
        self.violation_scales = np.ones(0)

    def evaluate(self, genome) -> Evaluation:
        g = np.asarray(genome, dtype=float)
        return Evaluation(objectives=np.array([float(np.sum(g * g))]),
                          violations=np.zeros(0))

    def evaluate_batch(self, genomes) -> list:
        return [self.evaluate(g) for g in np.atleast_2d(genomes)]


class BiObjectiveProblem:
    """Minimize (x^2, (x - 2)^2) for x in [-2, 4].

    The Pareto front is the x in [0, 2] branch, where f2 = (sqrt(f1) - 2)^2
    and both objectives range over [0, 4].
    """

    def __init__(self):
        self.bounds = Bounds(np.array([-2.0]), np.array([4.0]))
        self.objective_spec = ObjectiveSpec(("min", "min"))
        self.violation_scales = np.ones(0)

    def evaluate(self, genome) -> Evaluation:
        x = float(np.asarray(genome, dtype=float)[0])
        return Evaluation(objectives=np.array([x * x, (x - 2.0) ** 2]),
                          violations=np.zeros(0))

    def evaluate_batch(self, genomes) -> list:
        return [self.evaluate(g) for g in np.atleast_2d(genomes)]


# Closed-form facts about BiObjectiveProblem under min-max normalization with
# the fixed bounds below and the default reference point (1.1, 1.1): the
# normalized front is f2 = (1 - sqrt(f1))^2 on [0, 1], whose integral is 1/6,
# so the attainable hypervolume is 1.1 * 1.1 - ... = 1.21 - 1/6.
BIOBJ_NORMALIZATION = (np.zeros(2), np.full(2, 4.0))
BIOBJ_MAX_HYPERVOLUME = 1.21 - 1.0 / 6.0


def biobj_front_error(objectives: np.ndarray) -> np.ndarray:
    """Per-point distance from the analytic front relation f2 = (sqrt(f1)-2)^2."""
    objs = np.atleast_2d(np.asarray(objectives, dtype=float))
    return np.abs(objs[:, 1] - (np.sqrt(objs[:, 0]) - 2.0) ** 2)
