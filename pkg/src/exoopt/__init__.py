"""exoopt: evolutionary design optimization of planar linkage exoskeletons.

Library layout:

* :mod:`exoopt.core` — genomes, bounds, evaluations, seeded RNG streams
* :mod:`exoopt.ea` — single-objective GA and Big Bang-Big Crunch engines
* :mod:`exoopt.moea` — dominance, NS/SP survival, the four MOEA assemblies
* :mod:`exoopt.metrics` — hypervolume, convergence generation/time, correlation
* :mod:`exoopt.linkage` — the surrogate linkage plant and design problems
* :mod:`exoopt.benchmarks` — analytic sphere and bi-objective test problems
* :mod:`exoopt.experiment` / :mod:`exoopt.export` / :mod:`exoopt.cli` — harness
"""

from .core import (
    Bounds,
    Evaluation,
    Individual,
    ObjectiveSpec,
    SOLVER_FAILURE_VIOLATION,
    generation_rng,
)
from .ea import BbbcParams, GaParams, RunHistory, run_bbbc, run_ga
from .moea import MoeaParams, RankedPopulation, run_moea
from .metrics import (
    ConvergenceReport,
    convergence_time,
    generation_of_convergence,
    hypervolume,
    pearson_correlation,
)
from .linkage import (
    MechanismConfig,
    SweepSpec,
    TransmissionResult,
    UhexProblem,
    brute_force_grid,
    solve_posture,
    sweep_transmission,
)
from .benchmarks import BiObjectiveProblem, SphereProblem
from .experiment import (
    DesignCatalog,
    ExperimentConfig,
    NondominatedSet,
    RunRecord,
    aggregate_nondominated,
    run_experiment,
    select_designs,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds", "Evaluation", "Individual", "ObjectiveSpec",
    "SOLVER_FAILURE_VIOLATION", "generation_rng",
    "GaParams", "BbbcParams", "RunHistory", "run_ga", "run_bbbc",
    "MoeaParams", "RankedPopulation", "run_moea",
    "ConvergenceReport", "hypervolume", "generation_of_convergence",
    "convergence_time", "pearson_correlation",
    "MechanismConfig", "SweepSpec", "TransmissionResult", "UhexProblem",
    "brute_force_grid", "solve_posture", "sweep_transmission",
    "SphereProblem", "BiObjectiveProblem",
    "ExperimentConfig", "RunRecord", "NondominatedSet", "DesignCatalog",
    "run_experiment", "aggregate_nondominated", "select_designs",
]
