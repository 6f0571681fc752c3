"""Problem-independent solution representation and batch evaluation.

All objectives are handled internally in canonical *minimization* form;
maximized objectives are negated at the problem boundary and un-negated
again by the reporting layer (see :class:`ObjectiveSpec`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

# Violation magnitude assigned to the dedicated solver slot when the plant
# fails to produce a posture for a genome (keeps Deb's rules applicable
# instead of bubbling an exception out of the evaluation loop).
SOLVER_FAILURE_VIOLATION = 1.0e6


class InvalidBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Box bounds for a real-valued genome (units: mm for linkage problems)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or upper.ndim != 1 or lower.shape != upper.shape:
            raise InvalidBoundsError("lower/upper must be 1-D and equally long")
        if not np.all(lower < upper):
            raise InvalidBoundsError("every lower bound must be strictly below its upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def clamp(self, values: np.ndarray) -> np.ndarray:
        """Repair by clamping to the nearest bound; identity on in-bounds input."""
        return np.clip(values, self.lower, self.upper)

    def contains(self, values: np.ndarray) -> bool:
        values = np.asarray(values, dtype=float)
        return bool(np.all(values >= self.lower) and np.all(values <= self.upper))


Genome = np.ndarray


@dataclass(frozen=True)
class ObjectiveSpec:
    """Number of objectives and their optimization directions.

    ``directions[i]`` is ``"min"`` or ``"max"``.  ``to_canonical`` maps raw
    (reported) objective values into minimization space; ``to_reported``
    inverts that.
    """

    directions: tuple[str, ...]

    def __post_init__(self):
        if len(self.directions) < 1:
            raise ValueError("at least one objective required")
        if any(d not in ("min", "max") for d in self.directions):
            raise ValueError("directions must be 'min' or 'max'")

    @property
    def count(self) -> int:
        return len(self.directions)

    @property
    def signs(self) -> np.ndarray:
        return np.array([1.0 if d == "min" else -1.0 for d in self.directions])

    def to_canonical(self, reported: np.ndarray) -> np.ndarray:
        return np.asarray(reported, dtype=float) * self.signs

    def to_reported(self, canonical: np.ndarray) -> np.ndarray:
        return np.asarray(canonical, dtype=float) * self.signs


@dataclass(frozen=True)
class Evaluation:
    """Outcome of evaluating one genome.

    objectives are canonical-minimization values; violations are magnitudes
    (a constraint violated by v stores v, a satisfied one stores 0).  aux
    carries plant outputs (tau_mcp, tau_pip, Lx, slider ranges, ...).
    """

    objectives: np.ndarray
    violations: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "objectives", np.asarray(self.objectives, dtype=float))
        object.__setattr__(self, "violations", np.asarray(self.violations, dtype=float))
        if np.any(self.violations < 0):
            raise ValueError("violations must be non-negative magnitudes")

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.violations == 0.0))

    def total_violation(self, scales: np.ndarray | None = None) -> float:
        """Sum of violations, each normalized by its constraint's bound magnitude.

        Normalization keeps mm-scale and ratio-scale constraints commensurate
        under Deb's aggregation.
        """
        v = self.violations
        if scales is not None:
            v = v / np.asarray(scales, dtype=float)
        return float(np.sum(v))


@dataclass
class Individual:
    genome: Genome
    evaluation: Evaluation | None = None

    def require_evaluation(self) -> Evaluation:
        if self.evaluation is None:
            raise RuntimeError("individual compared before evaluation")
        return self.evaluation


Population = list  # list[Individual]; capacity is enforced by the survival operators


@runtime_checkable
class Problem(Protocol):
    """Evaluator handle: pure mapping genome -> Evaluation."""

    bounds: Bounds
    objective_spec: ObjectiveSpec
    violation_scales: np.ndarray

    def evaluate(self, genome: Genome) -> Evaluation: ...


def generation_rng(seed: int, generation: int) -> np.random.Generator:
    """Deterministic per-generation random stream.

    The per-run stream is partitioned by generation index so that the same
    (config, seed) pair replays bit-identically regardless of how member
    evaluations are scheduled.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(generation,)))


def random_init(bounds: Bounds, n: int, seed: int | np.random.Generator) -> Population:
    """n genomes i.i.d. uniform per coordinate within bounds."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else generation_rng(int(seed), 0)
    samples = rng.uniform(bounds.lower, bounds.upper, size=(n, bounds.dim))
    return [Individual(genome=samples[i].copy()) for i in range(n)]


def evaluate_population(pop: Population, problem) -> Population:
    """Attach an Evaluation to every member, preserving order.

    Uses the problem's vectorized batch path when available.  Evaluation of a
    member is a pure function of its genome; plant failures are reported by
    the problem itself via the sentinel solver violation, never raised here.
    """
    pending = [ind for ind in pop if ind.evaluation is None]
    if not pending:
        return pop
    if hasattr(problem, "evaluate_batch"):
        genomes = np.stack([ind.genome for ind in pending])
        for ind, ev in zip(pending, problem.evaluate_batch(genomes)):
            ind.evaluation = ev
    else:
        for ind in pending:
            ind.evaluation = problem.evaluate(ind.genome)
    return pop
