"""Multi-objective machinery: constrained dominance, NS and SP survival, and
the four engine x survival assemblies (GA/BBBC x NS/SP)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Evaluation,
    Individual,
    Population,
    evaluate_population,
    generation_rng,
    random_init,
)
from .ea import GaParams, RunHistory, blx_alpha_crossover, polynomial_mutation


@dataclass
class MoeaParams:
    engine: str = "ga"  # "ga" | "bbbc"
    survival: str = "ns"  # "ns" | "sp"
    pop_size: int = 300
    generations: int = 100
    crossover_prob: float = 1.0
    mutation_prob: float = 0.2
    blx_alpha: float = 0.5
    mutation_eta: float = 20.0
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.engine not in ("ga", "bbbc"):
            raise ValueError(f"unknown engine: {self.engine}")
        if self.survival not in ("ns", "sp"):
            raise ValueError(f"unknown survival strategy: {self.survival}")


@dataclass
class RankedPopulation:
    members: Population
    ranks: np.ndarray
    diversity: np.ndarray

    def front(self, rank: int = 0) -> Population:
        return [m for m, r in zip(self.members, self.ranks) if r == rank]


def dominates(a: Evaluation, b: Evaluation) -> bool:
    """Pareto dominance on canonical-minimization objective vectors."""
    fa, fb = a.objectives, b.objectives
    if fa.shape != fb.shape:
        raise ValueError("objective dimension mismatch")
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def constrained_dominates(a: Individual, b: Individual, scales: np.ndarray | None = None) -> bool:
    """Feasibility-first dominance (constrained tournament relation)."""
    ea, eb = a.require_evaluation(), b.require_evaluation()
    if ea.feasible and not eb.feasible:
        return True
    if not ea.feasible and eb.feasible:
        return False
    if not ea.feasible:
        return ea.total_violation(scales) < eb.total_violation(scales)
    return dominates(ea, eb)


def _objective_matrix(members: Population) -> np.ndarray:
    return np.stack([m.require_evaluation().objectives for m in members])


def _violation_totals(members: Population, scales) -> np.ndarray:
    return np.array([m.require_evaluation().total_violation(scales) for m in members])


def _cdom_matrix(objs: np.ndarray, viol: np.ndarray) -> np.ndarray:
    """D[i, j] = True iff member i constrained-dominates member j."""
    n = objs.shape[0]
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=2)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=2)
    pareto = le & lt
    feas = viol == 0.0
    both_feas = feas[:, None] & feas[None, :]
    both_infeas = ~feas[:, None] & ~feas[None, :]
    d = np.zeros((n, n), dtype=bool)
    d |= feas[:, None] & ~feas[None, :]
    d |= both_feas & pareto
    d |= both_infeas & (viol[:, None] < viol[None, :])
    np.fill_diagonal(d, False)
    return d


def _sort_ranks(dom: np.ndarray) -> np.ndarray:
    """Fast non-dominated sorting from a precomputed dominance matrix."""
    n = dom.shape[0]
    counts = dom.sum(axis=0).astype(int)  # number of dominators of each member
    ranks = np.full(n, -1, dtype=int)
    current = np.nonzero(counts == 0)[0]
    rank = 0
    while current.size:
        ranks[current] = rank
        counts[current] = -1
        for i in current:
            counts[dom[i]] -= 1
        current = np.nonzero(counts == 0)[0]
        rank += 1
    return ranks


def nondominated_sort(pop: Population, scales: np.ndarray | None = None) -> RankedPopulation:
    """Rank by constrained dominance; diversity = per-front crowding distance."""
    objs = _objective_matrix(pop)
    viol = _violation_totals(pop, scales)
    ranks = _sort_ranks(_cdom_matrix(objs, viol))
    diversity = np.zeros(len(pop))
    for r in range(ranks.max() + 1):
        idx = np.nonzero(ranks == r)[0]
        diversity[idx] = crowding_distance(objs[idx])
    return RankedPopulation(members=list(pop), ranks=ranks, diversity=diversity)


def crowding_distance(front: np.ndarray) -> np.ndarray:
    """Crowding distances for one front's objective matrix.

    Boundary members get +inf; interior members accumulate normalized gaps.
    A zero-range objective contributes 0 instead of NaN.
    """
    front = np.asarray(front, dtype=float)
    if front.ndim == 1:
        front = front[:, None]
    n, m = front.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(front[:, k], kind="stable")
        vals = front[order, k]
        rng = vals[-1] - vals[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if rng > 0:
            interior = order[1:-1]
            dist[interior] += (vals[2:] - vals[:-2]) / rng
    return dist


def ns_survival(parents: Population, offspring: Population, mu: int,
                scales: np.ndarray | None = None) -> Population:
    """Fill by ascending rank; split the last front by descending crowding."""
    union = list(parents) + list(offspring)
    if mu > len(union):
        raise ValueError("mu exceeds the union size")
    ranked = nondominated_sort(union, scales)
    survivors: list = []
    for r in range(ranked.ranks.max() + 1):
        idx = np.nonzero(ranked.ranks == r)[0]
        if len(survivors) + idx.size <= mu:
            survivors.extend(int(i) for i in idx)
        else:
            need = mu - len(survivors)
            by_crowding = idx[np.argsort(-ranked.diversity[idx], kind="stable")]
            survivors.extend(int(i) for i in by_crowding[:need])
            break
    return [union[i] for i in survivors]


def sp_fitness(objs: np.ndarray, viol: np.ndarray,
               scales_hint: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Strength-Pareto fitness: returns (strength S, raw fitness R, F = R + D).

    S(i) counts solutions i dominates; R(i) sums the strengths of i's
    dominators; D is the k-NN density 1/(sigma_k + 2) with
    k = floor(sqrt(n)).  Infeasible members get a penalty of
    (1 + normalized total violation) added to F so they score worse than any
    feasible member (whose F < 1 when non-dominated).
    """
    dom = _cdom_matrix(objs, viol)
    strength = dom.sum(axis=1).astype(float)
    raw = np.array([strength[dom[:, j]].sum() for j in range(objs.shape[0])])
    n = objs.shape[0]
    if n == 1:
        density = np.array([1.0 / 2.0])  # no neighbor: sigma_k -> 0 convention
    else:
        k = min(max(1, int(np.floor(np.sqrt(n)))), n - 1)
        dists = _pairwise_distances(objs)
        # diagonal is +inf, so the k-th smallest row entry is the k-th neighbor
        sigma_k = np.partition(dists, k - 1, axis=1)[:, k - 1]
        density = 1.0 / (sigma_k + 2.0)
    fitness = raw + density
    infeas = viol > 0
    fitness = fitness + np.where(infeas, 1.0 + viol, 0.0)
    return strength, raw, fitness


def _pairwise_distances(objs: np.ndarray) -> np.ndarray:
    diff = objs[:, None, :] - objs[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(d, np.inf)
    return d


def sp_survival(parents: Population, offspring: Population, mu: int,
                scales: np.ndarray | None = None) -> Population:
    """SPEA2-style environmental selection with k-NN truncation.

    Keep all members with F < 1; if that exceeds mu, iteratively remove the
    member with the smallest k-th-nearest-neighbor distance (recomputed after
    each removal); if short, fill with the best dominated by ascending F.
    """
    union = list(parents) + list(offspring)
    if mu > len(union):
        raise ValueError("mu exceeds the union size")
    objs = _objective_matrix(union)
    viol = _violation_totals(union, scales)
    _, _, fitness = sp_fitness(objs, viol)
    elite = np.nonzero(fitness < 1.0)[0]
    if elite.size <= mu:
        order = np.argsort(fitness, kind="stable")
        keep = set(int(i) for i in elite)
        for i in order:
            if len(keep) == mu:
                break
            keep.add(int(i))
        return [union[i] for i in sorted(keep)]

    alive = np.zeros(len(union), dtype=bool)
    alive[elite] = True
    dists = _pairwise_distances(objs).copy()
    dists[:, ~alive] = np.inf

    def _k_for(m):
        return min(max(1, int(np.floor(np.sqrt(m)))), m - 1)

    def _sigma_rows(rows, k):
        return np.partition(dists[rows], k - 1, axis=1)[:, k - 1]

    m = int(alive.sum())
    k = _k_for(m)
    sigma = np.full(len(union), np.inf)
    sigma[elite] = _sigma_rows(elite, k)
    while m > mu:
        removed = int(np.argmin(np.where(alive, sigma, np.inf)))
        to_removed = dists[:, removed].copy()
        alive[removed] = False
        sigma[removed] = np.inf
        dists[:, removed] = np.inf
        m -= 1
        new_k = _k_for(m)
        if new_k != k:
            k = new_k
            stale = np.nonzero(alive)[0]
        else:
            # only rows that counted the removed member among their k nearest
            stale = np.nonzero(alive & (to_removed <= sigma))[0]
        if stale.size:
            sigma[stale] = _sigma_rows(stale, k)
    return [union[i] for i in np.nonzero(alive)[0]]


def _survive(strategy: str, parents, offspring, mu, scales):
    if strategy == "ns":
        return ns_survival(parents, offspring, mu, scales)
    return sp_survival(parents, offspring, mu, scales)


def _elite_set(pop: Population, strategy: str, scales) -> Population:
    """Current elite: rank-0 under NS, F < 1 under SP (non-empty fallback: all)."""
    if strategy == "ns":
        ranked = nondominated_sort(pop, scales)
        elite = ranked.front(0)
    else:
        objs = _objective_matrix(pop)
        viol = _violation_totals(pop, scales)
        _, _, fitness = sp_fitness(objs, viol)
        elite = [m for m, f in zip(pop, fitness) if f < 1.0]
    return elite if elite else list(pop)


def _moea_tournament(pop, ranked: RankedPopulation, rng) -> Individual:
    """Constrained dominance first, then diversity score, then a coin flip."""
    i, j = rng.choice(len(pop), size=2, replace=False)
    ri, rj = ranked.ranks[i], ranked.ranks[j]
    if ri != rj:
        return pop[i] if ri < rj else pop[j]
    di, dj = ranked.diversity[i], ranked.diversity[j]
    if di != dj:
        return pop[i] if di > dj else pop[j]
    return pop[i] if rng.random() < 0.5 else pop[j]


def run_moea(problem, params: MoeaParams, seed: int) -> tuple[RankedPopulation, RunHistory]:
    """Run one of the four MOEAs; returns the final ranked population.

    The history records the per-generation hypervolume of the current rank-0
    set, computed after the run with normalization bounds taken over the
    union of all recorded generations (fixed before comparison).
    """
    from .metrics import hypervolume_history

    scales = getattr(problem, "violation_scales", None)
    history = RunHistory()
    snapshots: list[np.ndarray] = []

    t0 = time.perf_counter()
    pop = random_init(problem.bounds, params.pop_size, generation_rng(seed, 0))
    evaluate_population(pop, problem)
    history.evaluations += len(pop)
    snapshots.append(_front_objectives(pop, scales))
    history.gen_times.append(time.perf_counter() - t0)

    gens = params.generations
    if params.max_evaluations is not None:
        gens = min(gens, max(0, (params.max_evaluations - params.pop_size) // params.pop_size))

    for gen in range(1, gens + 1):
        t0 = time.perf_counter()
        rng = generation_rng(seed, gen)
        if params.engine == "ga":
            ranked = nondominated_sort(pop, scales)
            offspring = []
            while len(offspring) < params.pop_size:
                pa = _moea_tournament(pop, ranked, rng)
                pb = _moea_tournament(pop, ranked, rng)
                if rng.random() < params.crossover_prob:
                    c1, c2 = blx_alpha_crossover(pa.genome, pb.genome, params.blx_alpha,
                                                 problem.bounds, rng)
                else:
                    c1, c2 = pa.genome.copy(), pb.genome.copy()
                for child in (c1, c2):
                    child = polynomial_mutation(child, params.mutation_prob, params.mutation_eta,
                                                problem.bounds, rng)
                    offspring.append(Individual(genome=child))
                    if len(offspring) == params.pop_size:
                        break
        else:
            # BBBC: each offspring bangs around a center drawn uniformly from
            # the current elite set, radius shrinking as range / iteration.
            elite = _elite_set(pop, params.survival, scales)
            centers = np.stack([elite[i].genome for i in rng.integers(len(elite),
                                                                      size=params.pop_size)])
            noise = rng.standard_normal((params.pop_size, problem.bounds.dim))
            samples = problem.bounds.clamp(
                centers + noise * (problem.bounds.span / (gen + 1)))
            offspring = [Individual(genome=samples[i].copy()) for i in range(params.pop_size)]

        evaluate_population(offspring, problem)
        history.evaluations += len(offspring)
        pop = _survive(params.survival, pop, offspring, params.pop_size, scales)
        snapshots.append(_front_objectives(pop, scales))
        history.gen_times.append(time.perf_counter() - t0)

    history.values = hypervolume_history(snapshots)
    final = nondominated_sort(pop, scales)
    return final, history


def _front_objectives(pop: Population, scales) -> np.ndarray:
    ranked = nondominated_sort(pop, scales)
    front = ranked.front(0)
    return _objective_matrix(front)
