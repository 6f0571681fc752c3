import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exoopt.benchmarks import BiObjectiveProblem, SphereProblem, biobj_front_error
from exoopt.core import Evaluation, Individual
from exoopt.moea import (
    MoeaParams,
    constrained_dominates,
    crowding_distance,
    dominates,
    nondominated_sort,
    ns_survival,
    run_moea,
    sp_fitness,
    sp_survival,
)


def _ind(objs, violations=()):
    return Individual(
        genome=np.zeros(1),
        evaluation=Evaluation(np.asarray(objs, dtype=float),
                              np.array(violations, dtype=float)),
    )


def _brute_force_ranks(objs):
    n = len(objs)
    dominated_by = [
        {j for j in range(n)
         if all(objs[j][k] <= objs[i][k] for k in range(len(objs[i])))
         and any(objs[j][k] < objs[i][k] for k in range(len(objs[i])))}
        for i in range(n)
    ]
    ranks = [None] * n
    rank = 0
    remaining = set(range(n))
    while remaining:
        front = {i for i in remaining if not (dominated_by[i] & remaining)}
        for i in front:
            ranks[i] = rank
        remaining -= front
        rank += 1
    return ranks


class TestDominates:
    def test_strict_improvement_everywhere(self):
        assert dominates(Evaluation(np.array([1.0, 2.0]), np.zeros(0)),
                         Evaluation(np.array([2.0, 3.0]), np.zeros(0)))

    def test_equal_vectors_do_not_dominate(self):
        e = Evaluation(np.array([1.0, 2.0]), np.zeros(0))
        assert not dominates(e, e)

    def test_nondominated_pair(self):
        a = Evaluation(np.array([1.0, 3.0]), np.zeros(0))
        b = Evaluation(np.array([2.0, 2.0]), np.zeros(0))
        assert not dominates(a, b) and not dominates(b, a)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dominates(Evaluation(np.array([1.0]), np.zeros(0)),
                      Evaluation(np.array([1.0, 2.0]), np.zeros(0)))


class TestConstrainedDominates:
    def test_feasible_beats_infeasible_with_better_objectives(self):
        a = _ind([0.0, 0.0], violations=[0.1])
        b = _ind([9.0, 9.0])
        assert constrained_dominates(b, a)
        assert not constrained_dominates(a, b)

    def test_infeasibles_by_violation(self):
        a = _ind([0.0], violations=[0.2])
        b = _ind([0.0], violations=[0.5])
        assert constrained_dominates(a, b)

    def test_reduces_to_dominance_when_both_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            fa, fb = rng.random(2), rng.random(2)
            a, b = _ind(fa), _ind(fb)
            assert constrained_dominates(a, b) == dominates(a.evaluation, b.evaluation)


class TestNondominatedSort:
    def test_two_front_example(self):
        pop = [_ind([1, 2]), _ind([2, 1]), _ind([3, 3])]
        ranked = nondominated_sort(pop)
        assert list(ranked.ranks) == [0, 0, 1]

    def test_singleton_is_rank_zero(self):
        assert list(nondominated_sort([_ind([5, 5])]).ranks) == [0]

    def test_duplicates_share_a_rank(self):
        pop = [_ind([1, 1]), _ind([1, 1]), _ind([0, 2])]
        ranked = nondominated_sort(pop)
        assert ranked.ranks[0] == ranked.ranks[1]

    @given(st.integers(0, 2**32 - 1), st.integers(2, 3))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force_oracle(self, seed, m):
        rng = np.random.default_rng(seed)
        objs = rng.random((rng.integers(2, 40), m))
        ranked = nondominated_sort([_ind(row) for row in objs])
        assert list(ranked.ranks) == _brute_force_ranks(objs.tolist())

    def test_rank_invariant_under_objective_scaling(self):
        rng = np.random.default_rng(3)
        objs = rng.random((30, 2))
        base = nondominated_sort([_ind(row) for row in objs])
        scaled = nondominated_sort([_ind(row * [7.0, 1.0]) for row in objs])
        assert np.array_equal(base.ranks, scaled.ranks)

    def test_rank0_is_mutually_nondominated(self):
        rng = np.random.default_rng(4)
        pop = [_ind(row) for row in rng.random((50, 3))]
        front = nondominated_sort(pop).front(0)
        for a, b in itertools.permutations(front, 2):
            assert not dominates(a.evaluation, b.evaluation)


class TestCrowdingDistance:
    def test_small_fronts_are_all_infinite(self):
        assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0]]))))
        assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0], [2.0, 1.0]]))))

    def test_hand_computed_middle_value(self):
        front = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
        dist = crowding_distance(front)
        assert np.isinf(dist[0]) and np.isinf(dist[2])
        assert dist[1] == pytest.approx(2.0)

    def test_identical_members_zero_interior(self):
        front = np.array([[1.0, 1.0]] * 4)
        dist = crowding_distance(front)
        assert np.isfinite(dist).sum() == 0 or np.all(dist[np.isfinite(dist)] == 0.0)


class TestNsSurvival:
    def test_exact_first_front_kept(self):
        parents = [_ind([1, 2]), _ind([2, 1])]
        offspring = [_ind([3, 3]), _ind([4, 4])]
        survivors = ns_survival(parents, offspring, 2)
        objs = sorted(tuple(s.evaluation.objectives) for s in survivors)
        assert objs == [(1.0, 2.0), (2.0, 1.0)]

    def test_last_front_split_by_crowding(self):
        first = [_ind([0, 3]), _ind([3, 0])]
        # second front: (2,5) and (5,2) are boundary (infinite crowding),
        # (4,4) is interior, so mu=3 takes both of front one + a boundary member
        second = [_ind([2, 5]), _ind([4, 4]), _ind([5, 2])]
        survivors = ns_survival(first, second, 3)
        objs = [tuple(s.evaluation.objectives) for s in survivors]
        assert (1.0, 2.0) not in objs
        assert len(survivors) == 3
        assert (4.0, 4.0) not in objs

    def test_idempotent_at_fixed_mu(self):
        rng = np.random.default_rng(1)
        pop = [_ind(row) for row in rng.random((20, 2))]
        once = ns_survival(pop, [], 10)
        twice = ns_survival(once, [], 10)
        assert [id(x) for x in once] == [id(x) for x in twice]

    def test_mu_too_large_rejected(self):
        with pytest.raises(ValueError):
            ns_survival([_ind([1, 1])], [], 5)


class TestSpFitness:
    def test_all_nondominated_raw_zero(self):
        objs = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
        strength, raw, fitness = sp_fitness(objs, np.zeros(3))
        assert np.all(strength == 0) and np.all(raw == 0)
        assert np.all(fitness < 1.0)

    def test_strength_and_raw_counting(self):
        # a=(0,0) dominates b=(1,2) and c=(2,1); b, c mutually non-dominated
        objs = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])
        strength, raw, _ = sp_fitness(objs, np.zeros(3))
        assert strength[0] == 2
        assert raw[0] == 0
        assert raw[1] == 2 and raw[2] == 2

    def test_matches_brute_force_on_random_sets(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            objs = rng.random((rng.integers(3, 30), 2))
            n = len(objs)
            dom = np.zeros((n, n), dtype=bool)
            for i in range(n):
                for j in range(n):
                    dom[i, j] = i != j and np.all(objs[i] <= objs[j]) and np.any(objs[i] < objs[j])
            strength, raw, _ = sp_fitness(objs, np.zeros(n))
            assert np.array_equal(strength, dom.sum(axis=1))
            expected_raw = [dom.sum(axis=1)[dom[:, j]].sum() for j in range(n)]
            assert np.array_equal(raw, expected_raw)

    def test_infeasible_scores_worse_than_any_feasible(self):
        objs = np.array([[0.0, 0.0], [5.0, 5.0]])
        _, _, fitness = sp_fitness(objs, np.array([0.5, 0.0]))
        assert fitness[0] > fitness[1]
        assert fitness[0] >= 1.0


class TestSpSurvival:
    def test_all_nondominated_and_fitting_are_kept(self):
        pop = [_ind([0, 2]), _ind([1, 1]), _ind([2, 0])]
        survivors = sp_survival(pop, [], 3)
        assert len(survivors) == 3

    def test_truncation_removes_tight_pair_member_first(self):
        # collinear non-dominated points with one tight pair at x ~ 1
        pop = [_ind([0.0, 3.0]), _ind([1.0, 2.0]), _ind([1.05, 1.95]), _ind([3.0, 0.0])]
        survivors = sp_survival(pop, [], 3)
        objs = [tuple(s.evaluation.objectives) for s in survivors]
        tight = [(1.0, 2.0), (1.05, 1.95)]
        assert sum(o in tight for o in objs) == 1

    def test_fills_with_best_dominated_by_fitness(self):
        good = [_ind([0, 0])]
        bad = [_ind([1, 1]), _ind([2, 2]), _ind([3, 3])]
        survivors = sp_survival(good, bad, 2)
        objs = sorted(tuple(s.evaluation.objectives) for s in survivors)
        assert objs == [(0.0, 0.0), (1.0, 1.0)]

    def test_never_drops_rank0_for_dominated_when_capacity_allows(self):
        rng = np.random.default_rng(9)
        pop = [_ind(row) for row in rng.random((30, 2))]
        ranks = nondominated_sort(pop).ranks
        n0 = int((ranks == 0).sum())
        survivors = sp_survival(pop, [], max(n0, 15))
        kept = {id(x) for x in survivors}
        for ind, r in zip(pop, ranks):
            if r == 0:
                assert id(ind) in kept


ALL_MOEAS = [("ga", "ns"), ("ga", "sp"), ("bbbc", "ns"), ("bbbc", "sp")]


class TestRunMoea:
    @pytest.mark.parametrize("engine,survival", ALL_MOEAS)
    def test_biobj_front_relation(self, engine, survival):
        params = MoeaParams(engine=engine, survival=survival, pop_size=40, generations=40)
        final, _ = run_moea(BiObjectiveProblem(), params, seed=0)
        objs = np.stack([m.evaluation.objectives for m in final.front(0)])
        assert np.all(biobj_front_error(objs) <= 1e-2)

    def test_single_objective_degenerates_to_best_value(self):
        params = MoeaParams(engine="ga", survival="ns", pop_size=30, generations=20)
        final, _ = run_moea(SphereProblem(dim=2), params, seed=1)
        front = np.array([m.evaluation.objectives[0] for m in final.front(0)])
        assert front.max() - front.min() <= 1e-6

    def test_same_seed_replays_identically(self):
        params = MoeaParams(engine="bbbc", survival="sp", pop_size=20, generations=10)
        f1, h1 = run_moea(BiObjectiveProblem(), params, seed=3)
        f2, h2 = run_moea(BiObjectiveProblem(), params, seed=3)
        assert h1.values == h2.values
        a = np.stack([m.genome for m in f1.front(0)])
        b = np.stack([m.genome for m in f2.front(0)])
        assert np.array_equal(a, b)

    def test_final_front_internally_nondominated(self):
        params = MoeaParams(engine="ga", survival="sp", pop_size=30, generations=15)
        final, _ = run_moea(BiObjectiveProblem(), params, seed=4)
        front = final.front(0)
        for a, b in itertools.permutations(front, 2):
            assert not dominates(a.evaluation, b.evaluation)

    def test_rejects_unknown_engine(self):
        with pytest.raises(ValueError):
            MoeaParams(engine="annealer")
