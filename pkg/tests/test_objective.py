import itertools

import numpy as np
import pytest

from qlayout.circuit import ProgramGraph, onehot_features
from qlayout.errors import (
    ConstraintViolationError,
    IncompleteLayoutError,
    SearchSpaceTooLargeError,
)
from qlayout.objective import (
    CostModel,
    Layout,
    brute_force_optimal,
    fast_cost_fn,
    reward,
    swap_cost,
)
from qlayout.topology import CouplingGraph, build_grid


def make_pg(n, edges):
    return ProgramGraph(n, tuple(edges), onehot_features(n))


def path3():
    return CouplingGraph(3, frozenset({(0, 1), (1, 2)}), name="path3")


def exhaustive_optimal(pg, cg, cm):
    """Unpruned enumeration over all injections, the brute-force oracle."""
    cost = fast_cost_fn(pg, cm)
    best_cost, best = np.inf, None
    for perm in itertools.permutations(range(cg.num_physical), pg.num_logical):
        c = cost(np.asarray(perm, dtype=np.int64))
        if c < best_cost:
            best_cost, best = c, perm
    return np.asarray(best), best_cost


class TestSwapCost:
    def test_empty_edges_zero(self):
        pg = make_pg(3, [])
        cg = path3()
        lay = Layout(np.array([0, 1, 2]))
        for mode in ("literal", "adjacent-free"):
            assert swap_cost(lay, pg, CostModel(mode, cg.distances)) == 0.0

    def test_adjacent_pair(self):
        pg = make_pg(2, [(0, 1)])
        cg = path3()
        lay = Layout(np.array([0, 1]))
        assert swap_cost(lay, pg, CostModel("literal", cg.distances)) == 2.0
        assert swap_cost(lay, pg, CostModel("adjacent-free", cg.distances)) == 0.0

    def test_k3_on_path_all_bijections(self):
        # distances on a path of three are {1, 1, 2}; 2*(1+1+2) = 8
        pg = make_pg(3, [(0, 1), (1, 2), (2, 0)])
        cg = path3()
        cm = CostModel("literal", cg.distances)
        for perm in itertools.permutations(range(3)):
            assert swap_cost(Layout(np.array(perm)), pg, cm) == 8.0

    def test_partial_layout_rejected(self):
        pg = make_pg(2, [(0, 1)])
        cm = CostModel("literal", path3().distances)
        with pytest.raises(IncompleteLayoutError):
            swap_cost(Layout(np.array([0, -1])), pg, cm)

    def test_duplicate_target_rejected(self):
        pg = make_pg(2, [(0, 1)])
        cm = CostModel("literal", path3().distances)
        with pytest.raises(ConstraintViolationError):
            swap_cost(Layout(np.array([1, 1])), pg, cm)

    def test_multiplicity_scales_linearly(self, rng):
        cg = build_grid(3, 3)
        for _ in range(20):
            m = int(rng.integers(1, 5))
            pg1 = make_pg(2, [(0, 1)])
            pgm = make_pg(2, [(0, 1)] * m)
            lay = Layout(rng.permutation(9)[:2])
            cm = CostModel("literal", cg.distances)
            assert swap_cost(lay, pgm, cm) == m * swap_cost(lay, pg1, cm)

    def test_edge_direction_irrelevant(self, rng):
        cg = build_grid(3, 3)
        fwd = make_pg(3, [(0, 1), (1, 2)])
        rev = make_pg(3, [(1, 0), (2, 1)])
        cm = CostModel("literal", cg.distances)
        for _ in range(10):
            lay = Layout(rng.permutation(9)[:3])
            assert swap_cost(lay, fwd, cm) == swap_cost(lay, rev, cm)

    def test_grid_automorphism_invariance(self, rng):
        # reflecting a 3x3 grid horizontally is a graph automorphism
        cg = build_grid(3, 3)
        sigma = np.array([r * 3 + (2 - c) for r in range(3) for c in range(3)])
        pg = make_pg(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        cm = CostModel("literal", cg.distances)
        for _ in range(10):
            lay = Layout(rng.permutation(9)[:4])
            assert swap_cost(lay, pg, cm) == \
                swap_cost(Layout(sigma[lay.assign]), pg, cm)


class TestReward:
    def test_zero_cost_layout(self):
        pg = make_pg(2, [(0, 1)])
        cm = CostModel("adjacent-free", path3().distances)
        assert reward(Layout(np.array([0, 1])), pg, cm) == 0.0

    def test_k3_on_path(self):
        pg = make_pg(3, [(0, 1), (1, 2), (2, 0)])
        cm = CostModel("literal", path3().distances)
        assert reward(Layout(np.array([0, 1, 2])), pg, cm) == -8.0

    def test_monotone_negation(self):
        pg = make_pg(2, [(0, 1)])
        cm = CostModel("literal", path3().distances)
        cheap = Layout(np.array([0, 1]))
        dear = Layout(np.array([0, 2]))
        assert reward(cheap, pg, cm) > reward(dear, pg, cm)


class TestBruteForce:
    def test_k3_on_path_literal(self):
        pg = make_pg(3, [(0, 1), (1, 2), (2, 0)])
        _, cost = brute_force_optimal(pg, path3(),
                                      CostModel("literal", path3().distances))
        assert cost == 8.0

    def test_embeddable_is_free(self):
        cg = build_grid(2, 3)
        pg = make_pg(3, [(0, 1), (1, 2)])
        lay, cost = brute_force_optimal(
            pg, cg, CostModel("adjacent-free", cg.distances))
        assert cost == 0.0
        lay.validate(cg.num_physical)

    def test_single_edge_costs_two_literal(self):
        cg = build_grid(3, 3)
        _, cost = brute_force_optimal(
            make_pg(2, [(0, 1)]), cg, CostModel("literal", cg.distances))
        assert cost == 2.0

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 6))
            big_n = int(rng.integers(n, 10))
            cg_edges = set()
            order = rng.permutation(big_n)
            for i in range(1, big_n):
                a, b = order[i], order[rng.integers(i)]
                cg_edges.add((min(a, b), max(a, b)))
            cg = CouplingGraph(big_n, frozenset(cg_edges))
            edges = [
                (i, j) for i in range(n) for j in range(n)
                if i != j and rng.random() < 0.3
            ]
            pg = make_pg(n, edges)
            mode = "literal" if rng.random() < 0.5 else "adjacent-free"
            cm = CostModel(mode, cg.distances)
            lay, cost = brute_force_optimal(pg, cg, cm)
            oracle_assign, oracle_cost = exhaustive_optimal(pg, cg, cm)
            assert cost == oracle_cost
            # first minimum in lexicographic enumeration order
            assert lay.assign.tolist() == oracle_assign.tolist()

    def test_cap(self):
        cg = build_grid(4, 4)
        pg = make_pg(10, [(0, 1)])
        with pytest.raises(SearchSpaceTooLargeError):
            brute_force_optimal(pg, cg, CostModel("literal", cg.distances),
                                cap=1000)

    def test_lower_bounds_any_layout(self, rng):
        cg = build_grid(2, 3)
        pg = make_pg(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        cm = CostModel("literal", cg.distances)
        _, opt = brute_force_optimal(pg, cg, cm)
        for _ in range(50):
            lay = Layout(rng.permutation(6)[:4])
            assert swap_cost(lay, pg, cm) >= opt


class TestLayoutJson:
    def test_round_trip(self, tmp_path):
        lay = Layout(np.array([7, 12, 3]))
        p = tmp_path / "layout.json"
        lay.save(p, num_physical=64)
        back = Layout.load(p)
        assert back.assign.tolist() == [7, 12, 3]
