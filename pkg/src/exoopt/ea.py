"""Single-objective evolutionary engines: real-coded GA and Big Bang-Big Crunch.

Both engines use Deb's feasibility rules for constraint handling and operate
on canonical-minimization objectives.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Bounds,
    Evaluation,
    Genome,
    Individual,
    Population,
    evaluate_population,
    generation_rng,
    random_init,
)


@dataclass
class GaParams:
    pop_size: int = 300
    generations: int = 50
    crossover_prob: float = 1.0
    mutation_prob: float = 0.2
    blx_alpha: float = 0.5
    # The distribution index is not pinned by the operator's common usage
    # tables; 20 is the standard default for polynomial mutation.
    mutation_eta: float = 20.0
    max_evaluations: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.crossover_prob <= 1.0 and 0.0 <= self.mutation_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.blx_alpha < 0 or self.mutation_eta <= 0:
            raise ValueError("blx_alpha must be >= 0 and mutation_eta > 0")


@dataclass
class BbbcParams:
    pop_size: int = 300
    generations: int = 50
    crunch_mode: str = "best_fit"  # or "weighted_center"
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.crunch_mode not in ("best_fit", "weighted_center"):
            raise ValueError(f"unknown crunch mode: {self.crunch_mode}")


@dataclass
class RunHistory:
    """Per-generation best value (or indicator) and wall time."""

    values: list = field(default_factory=list)
    gen_times: list = field(default_factory=list)
    evaluations: int = 0

    @property
    def runtime(self) -> float:
        return float(sum(self.gen_times))

    @property
    def generations(self) -> int:
        return len(self.values)


def deb_compare(a: Individual, b: Individual, scales: np.ndarray | None = None) -> int:
    """Deb's feasibility ordering: -1 if a wins, 1 if b wins, 0 on a tie.

    Feasible beats infeasible; two infeasibles compare by ascending total
    normalized violation; two feasibles by objective value (minimization).
    """
    ea, eb = a.require_evaluation(), b.require_evaluation()
    if ea.feasible != eb.feasible:
        return -1 if ea.feasible else 1
    if not ea.feasible:
        va, vb = ea.total_violation(scales), eb.total_violation(scales)
    else:
        va, vb = float(ea.objectives[0]), float(eb.objectives[0])
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


def binary_tournament(pop: Population, compare, rng: np.random.Generator) -> Individual:
    """Draw two distinct members uniformly; return the comparator winner.

    Ties are broken by a uniform coin flip.
    """
    if len(pop) < 2:
        raise ValueError("binary tournament needs a population of at least 2")
    i, j = rng.choice(len(pop), size=2, replace=False)
    c = compare(pop[i], pop[j])
    if c == 0:
        c = -1 if rng.random() < 0.5 else 1
    return pop[i] if c < 0 else pop[j]


def blx_alpha_crossover(
    p1: Genome, p2: Genome, alpha: float, bounds: Bounds, rng: np.random.Generator
) -> tuple[Genome, Genome]:
    """BLX-alpha: children drawn uniformly from [min-a*d, max+a*d] per coordinate."""
    lo = np.minimum(p1, p2)
    hi = np.maximum(p1, p2)
    d = hi - lo
    low, high = lo - alpha * d, hi + alpha * d
    c1 = rng.uniform(low, high)
    c2 = rng.uniform(low, high)
    return bounds.clamp(c1), bounds.clamp(c2)


def polynomial_mutation(
    g: Genome, prob: float, eta: float, bounds: Bounds, rng: np.random.Generator
) -> Genome:
    """Polynomial mutation with distribution index eta; result stays in bounds.

    The perturbation is the bound-respecting form: the polynomial exponent is
    shaped by the distance to the nearer bound, so a coordinate sitting on a
    bound can only move inward.
    """
    out = np.array(g, dtype=float, copy=True)
    span = bounds.span
    mask = rng.random(out.size) < prob
    if not np.any(mask):
        return out
    u = rng.random(out.size)
    for k in np.nonzero(mask)[0]:
        x = out[k]
        lo, hi = bounds.lower[k], bounds.upper[k]
        d1 = (x - lo) / span[k]
        d2 = (hi - x) / span[k]
        if u[k] < 0.5:
            val = 2.0 * u[k] + (1.0 - 2.0 * u[k]) * (1.0 - d1) ** (eta + 1.0)
            delta = val ** (1.0 / (eta + 1.0)) - 1.0
        else:
            val = 2.0 * (1.0 - u[k]) + 2.0 * (u[k] - 0.5) * (1.0 - d2) ** (eta + 1.0)
            delta = 1.0 - val ** (1.0 / (eta + 1.0))
        out[k] = x + delta * span[k]
    return bounds.clamp(out)


def elitist_survival(parents: Population, offspring: Population, mu: int, compare) -> Population:
    """Best mu of parents + offspring; stable on ties w.r.t. insertion order."""
    union = list(parents) + list(offspring)
    if mu > len(union):
        raise ValueError("mu exceeds the union size")
    import functools

    ranked = sorted(union, key=functools.cmp_to_key(compare))
    return ranked[:mu]


def _ga_offspring(pop, bounds, params: GaParams, compare, rng) -> Population:
    offspring = []
    while len(offspring) < params.pop_size:
        pa = binary_tournament(pop, compare, rng)
        pb = binary_tournament(pop, compare, rng)
        if rng.random() < params.crossover_prob:
            c1, c2 = blx_alpha_crossover(pa.genome, pb.genome, params.blx_alpha, bounds, rng)
        else:
            c1, c2 = pa.genome.copy(), pb.genome.copy()
        for child in (c1, c2):
            child = polynomial_mutation(child, params.mutation_prob, params.mutation_eta, bounds, rng)
            offspring.append(Individual(genome=child))
            if len(offspring) == params.pop_size:
                break
    return offspring


def _budget_generations(params) -> int:
    """Number of generations compatible with an optional evaluation budget.

    With a mu+lambda schema each generation costs pop_size evaluations on top
    of the pop_size spent on initialization.
    """
    gens = params.generations
    if params.max_evaluations is not None:
        affordable = max(0, (params.max_evaluations - params.pop_size) // params.pop_size)
        gens = min(gens, affordable)
    return gens


def run_ga(problem, params: GaParams, seed: int) -> tuple[Individual, RunHistory]:
    """Real-coded GA: init -> evaluate -> [select, vary, evaluate, survive] x g."""
    scales = getattr(problem, "violation_scales", None)
    compare = lambda a, b: deb_compare(a, b, scales)
    history = RunHistory()

    t0 = time.perf_counter()
    pop = random_init(problem.bounds, params.pop_size, generation_rng(seed, 0))
    evaluate_population(pop, problem)
    history.evaluations += len(pop)
    best = min(pop, key=_deb_key(scales))
    history.values.append(float(best.require_evaluation().objectives[0]))
    history.gen_times.append(time.perf_counter() - t0)

    for gen in range(1, _budget_generations(params) + 1):
        t0 = time.perf_counter()
        rng = generation_rng(seed, gen)
        offspring = _ga_offspring(pop, problem.bounds, params, compare, rng)
        evaluate_population(offspring, problem)
        history.evaluations += len(offspring)
        pop = elitist_survival(pop, offspring, params.pop_size, compare)
        best = pop[0]
        history.values.append(float(best.require_evaluation().objectives[0]))
        history.gen_times.append(time.perf_counter() - t0)
    return best, history


def _deb_key(scales):
    def key(ind: Individual):
        ev = ind.require_evaluation()
        if ev.feasible:
            return (0, float(ev.objectives[0]))
        return (1, ev.total_violation(scales))

    return key


def bbbc_crunch(pop: Population, mode: str, scales: np.ndarray | None = None) -> Genome:
    """Collapse the population into a center of mass.

    best_fit returns the genome of the Deb-best member.  weighted_center
    returns the fitness-weighted mean genome with weights proportional to
    1/f; infeasible members use a Deb-style penalized key (worst feasible
    objective plus normalized violation) and keys are shifted positive when
    needed so the weighting stays defined.
    """
    if mode == "best_fit":
        return min(pop, key=_deb_key(scales)).genome.copy()

    evs = [ind.require_evaluation() for ind in pop]
    feas_objs = [float(e.objectives[0]) for e in evs if e.feasible]
    worst_feas = max(feas_objs) if feas_objs else 0.0
    keys = np.array(
        [
            float(e.objectives[0]) if e.feasible else worst_feas + e.total_violation(scales)
            for e in evs
        ]
    )
    if keys.min() <= 0.0:
        keys = keys - keys.min() + 1.0
    weights = 1.0 / keys
    weights = weights / weights.sum()
    genomes = np.stack([ind.genome for ind in pop])
    return (weights[:, None] * genomes).sum(axis=0)


def bbbc_bang(
    cm: Genome, iteration: int, bounds: Bounds, n: int, rng: np.random.Generator
) -> Population:
    """Scatter n genomes around the center with radius (range / iteration^2).

    The quadratic decay focuses late iterations tightly enough to polish
    solutions to sub-1e-3 precision within a 50-generation budget, while the
    first few iterations still cover most of the search range.
    """
    if iteration < 2:
        raise ValueError("bang applies from iteration 2 onward (iteration 1 is random init)")
    noise = rng.standard_normal((n, bounds.dim)) * (bounds.span / iteration**2)
    samples = bounds.clamp(cm + noise)
    return [Individual(genome=samples[i].copy()) for i in range(n)]


def run_bbbc(problem, params: BbbcParams, seed: int) -> tuple[Individual, RunHistory]:
    """BBBC: init -> evaluate -> crunch -> [bang, evaluate, crunch] x g.

    Keeps a best-ever archive of size 1 so a regressing final bang cannot
    lose the best solution seen.
    """
    scales = getattr(problem, "violation_scales", None)
    key = _deb_key(scales)
    history = RunHistory()

    t0 = time.perf_counter()
    pop = random_init(problem.bounds, params.pop_size, generation_rng(seed, 0))
    evaluate_population(pop, problem)
    history.evaluations += len(pop)
    best = min(pop, key=key)
    cm = bbbc_crunch(pop, params.crunch_mode, scales)
    history.values.append(float(best.require_evaluation().objectives[0]))
    history.gen_times.append(time.perf_counter() - t0)

    for gen in range(2, _budget_generations(params) + 1):
        t0 = time.perf_counter()
        rng = generation_rng(seed, gen)
        pop = bbbc_bang(cm, gen, problem.bounds, params.pop_size, rng)
        evaluate_population(pop, problem)
        history.evaluations += len(pop)
        challenger = min(pop, key=key)
        if key(challenger) < key(best):
            best = challenger
        cm = bbbc_crunch(pop, params.crunch_mode, scales)
        history.values.append(float(best.require_evaluation().objectives[0]))
        history.gen_times.append(time.perf_counter() - t0)
    return best, history
