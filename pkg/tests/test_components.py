import math
from fractions import Fraction

import numpy as np
import pytest

from kcip_lab.errors import InvalidParameterError, SizeCapError
from kcip_lab.graph import Graph, make_cycle, make_torus, torus_vertex
from kcip_lab.kcip import Density, SpinConfig, simulate
from kcip_lab.components import (
    CollisionObserver,
    IncrementalComponents,
    component_stats,
    corrected_count_exact,
    corrected_count_mc,
    corrected_total,
    is_separated,
    min_pair_distance,
)

from conftest import components_oracle, random_graph


def star_graph(leaves):
    """Center is vertex `leaves`, leaves are 0..leaves-1."""
    return Graph([[leaves]] * leaves + [list(range(leaves))], kind="general")


def torus_star_set(g, k):
    """Center of a torus plus its first k neighbors: an embedded star."""
    center = 0
    return [center] + list(g.adjacency[center][:k])


class TestComponentStats:
    def test_single_particle(self):
        g = make_cycle(5)
        view = component_stats(g, SpinConfig(5, 0b00100))
        assert (view.V, view.Y, view.delta) == (1, 1, 0)

    def test_adjacent_pair(self):
        g = make_cycle(5)
        view = component_stats(g, SpinConfig(5, 0b00011))
        assert (view.V, view.Y, view.delta) == (2, 1, 1)

    def test_empty(self):
        g = make_cycle(5)
        view = component_stats(g, SpinConfig(5, 0))
        assert (view.V, view.Y, view.delta) == (0, 0, 0)

    def test_matches_oracle_on_random_configs(self, rng):
        g = make_torus(4, 2)
        for _ in range(100):
            bits = int(rng.integers(0, 1 << 16))
            view = component_stats(g, SpinConfig(16, bits))
            oracle = components_oracle(g.adjacency, [v for v in range(16) if bits >> v & 1])
            assert sorted(map(sorted, view.comps)) == sorted(map(sorted, oracle))


class TestCorrectedCountExact:
    def test_singleton_and_pair(self):
        g = make_cycle(6)
        assert corrected_count_exact(g, [0]) == 1
        assert corrected_count_exact(g, [0, 1]) == 1

    def test_path_of_three(self):
        g = make_cycle(6)
        assert corrected_count_exact(g, [0, 1, 2]) == Fraction(4, 3)

    def test_star_three_leaves(self):
        g = star_graph(3)
        assert corrected_count_exact(g, [0, 1, 2, 3]) == Fraction(7, 4)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_star_formula_on_torus_4_3(self, k):
        g = make_torus(4, 3)
        value = corrected_count_exact(g, torus_star_set(g, k))
        assert value == Fraction(k, 2) + Fraction(1, k + 1)

    def test_disconnected_sums_over_components(self):
        g = make_cycle(8)
        # pair {0,1} plus singleton {4}: 1 + 1
        assert corrected_count_exact(g, [0, 1, 4]) == 2

    def test_cap_enforced(self):
        g = make_torus(4, 2)
        with pytest.raises(SizeCapError):
            corrected_count_exact(g, list(range(16)), cap=8)

    def test_upper_bound_and_size_floor_on_random_subgraphs(self, rng):
        # N_{H+v} <= N_H + 1 for arbitrary v, and N_H >= |H|/(2d+1)
        g = make_torus(4, 3)
        d = 3
        for _ in range(500):
            size = int(rng.integers(1, 9))
            H = set(int(x) for x in rng.choice(g.n, size=size, replace=False))
            extra = int(rng.integers(0, g.n))
            while extra in H:
                extra = int(rng.integers(0, g.n))
            n_h = corrected_count_exact(g, H)
            n_hv = corrected_count_exact(g, H | {extra})
            assert n_hv <= n_h + 1
            assert n_h >= Fraction(len(H), 2 * d + 1)

    def test_monotone_under_leaf_or_disjoint_additions(self, rng):
        # the lower half N_H <= N_{H+v} holds when v has at most one edge
        # into H; bridging or cycle-closing additions can lower the count
        g = make_torus(4, 3)
        checked = 0
        while checked < 500:
            size = int(rng.integers(1, 9))
            H = set(int(x) for x in rng.choice(g.n, size=size, replace=False))
            v = int(rng.integers(0, g.n))
            if v in H or sum(u in H for u in g.adjacency[v]) > 1:
                continue
            checked += 1
            assert corrected_count_exact(g, H) <= corrected_count_exact(g, H | {v})

    def test_bridging_vertex_lowers_the_count(self):
        # merging two singletons through a common neighbor drops the
        # corrected count from 2 to 4/3; this is the collision effect that
        # makes the particle-count drift argument work
        g = make_cycle(8)
        assert corrected_count_exact(g, [0, 2]) == 2
        assert corrected_count_exact(g, [0, 1, 2]) == Fraction(4, 3)

    def test_strictly_below_size_with_a_real_component(self, rng):
        g = make_torus(4, 2)
        for _ in range(50):
            v = int(rng.integers(0, g.n))
            u = g.adjacency[v][0]
            others = set(int(rng.integers(0, g.n)) for _ in range(3)) - {u, v}
            H = {u, v} | others
            assert corrected_count_exact(g, H) < len(H)


class TestCorrectedCountMC:
    def test_singleton_exact(self):
        g = make_cycle(5)
        mean, stderr = corrected_count_mc(g, [0], reps=50, seed=1)
        assert mean == 1.0 and stderr == 0.0

    def test_star_three_leaves_within_4_sigma(self):
        g = star_graph(3)
        mean, stderr = corrected_count_mc(g, [0, 1, 2, 3], reps=100_000, seed=7)
        assert abs(mean - 1.75) <= 4 * max(stderr, 1e-12)

    def test_random_cases_match_exact(self, rng):
        g = make_torus(5, 2)
        for case in range(12):
            size = int(rng.integers(2, 9))
            H = {int(rng.integers(0, g.n))}
            while len(H) < size:
                frontier = sorted({u for w in H for u in g.adjacency[w]} - H)
                H.add(frontier[int(rng.integers(0, len(frontier)))])
            exact = float(corrected_count_exact(g, H))
            mean, stderr = corrected_count_mc(g, H, reps=20_000, seed=100 + case)
            assert abs(mean - exact) <= 4 * max(stderr, 1e-9)

    def test_reps_validated(self):
        with pytest.raises(InvalidParameterError):
            corrected_count_mc(make_cycle(4), [0], reps=0, seed=0)


class TestCorrectedTotal:
    def test_all_singletons(self):
        g = make_cycle(8)
        x = SpinConfig.from_occupied(8, [0, 2, 4, 6])
        assert corrected_total(g, x) == 4

    def test_pair_plus_singleton(self):
        g = make_cycle(8)
        x = SpinConfig.from_occupied(8, [0, 1, 4])
        assert corrected_total(g, x) == 2

    def test_bounds_on_random_configs(self, rng):
        g = make_torus(4, 2)
        d = 2
        for _ in range(200):
            bits = int(rng.integers(1, 1 << 16))
            x = SpinConfig(16, bits)
            view = component_stats(g, x)
            if any(len(c) > 10 for c in view.comps):
                continue
            y_tilde = corrected_total(g, x)
            assert view.Y <= y_tilde <= view.Y + view.delta
            assert y_tilde >= Fraction(view.V, 2 * d + 1)


class TestMinPairDistance:
    def test_single_particle_infinite(self):
        g = make_cycle(6)
        assert min_pair_distance(g, SpinConfig(6, 0b000001)) == math.inf
        assert min_pair_distance(g, SpinConfig(6, 0)) == math.inf

    def test_adjacent_pair(self):
        g = make_cycle(6)
        assert min_pair_distance(g, SpinConfig(6, 0b000011)) == 1

    def test_torus_6_2_opposite_corners(self):
        g = make_torus(6, 2)
        x = SpinConfig.from_occupied(
            g.n, [torus_vertex(g, (0, 0)), torus_vertex(g, (3, 3))]
        )
        assert min_pair_distance(g, x) == 6

    def test_is_separated_predicate(self):
        g = make_cycle(8)
        x = SpinConfig.from_occupied(8, [0, 4])
        assert is_separated(g, x, 3)
        assert not is_separated(g, x, 4)


class TestCollisionObserver:
    def test_no_collisions_when_y_never_decreases(self):
        g = make_cycle(6)
        x0 = SpinConfig.from_occupied(6, [0])
        obs = CollisionObserver(g, x0)
        # grow one neighbor then remove it: Y stays 1 throughout
        simulate(g, x0, 2, None, Density(1.0), observers=[obs],
                 draws=[(1, 0.01), (1, 0.99)])
        assert obs.summary() == {"count": 0, "times": [], "max_sizes": []}

    def test_merge_two_singletons_then_removal(self):
        g = make_cycle(5)
        x0 = SpinConfig.from_occupied(5, [0, 2])
        obs = CollisionObserver(g, x0)
        simulate(g, x0, 3, None, Density(1.0), observers=[obs],
                 draws=[(1, 0.01), (1, 0.95), (4, 0.95)])
        # t0 merges {0} and {2} through vertex 1 (collision, both size 1);
        # t1 removes vertex 1 (split, no collision); t2 removes nothing new
        out = obs.summary()
        assert out["count"] == 1
        assert out["times"] == [0]
        assert out["max_sizes"] == [1]

    def test_colm_singleton_merging_with_pair(self):
        g = make_cycle(6)
        x0 = SpinConfig.from_occupied(6, [0, 1, 3])
        obs = CollisionObserver(g, x0)
        simulate(g, x0, 1, None, Density(1.0), observers=[obs], draws=[(2, 0.01)])
        out = obs.summary()
        assert out["count"] == 1
        assert out["max_sizes"] == [2]

    def test_incremental_tracker_matches_batch_over_random_run(self, rng):
        g = make_torus(4, 2)
        x0 = SpinConfig.from_occupied(16, [0, 5, 10])
        tracker = IncrementalComponents(g, x0)
        x = x0
        density = Density(2.0)
        for step in range(5000):
            v = int(rng.integers(0, 16))
            p = float(rng.random())
            from kcip_lab.kcip import UpdateDraw, kcip_step

            y = kcip_step(g, x, UpdateDraw(v, p), density)
            if y.bits != x.bits:
                if y[v]:
                    tracker.add(v)
                else:
                    tracker.remove(v)
            x = y
            view = tracker.as_view()
            batch = component_stats(g, x)
            assert view.Y == batch.Y and view.V == batch.V
            assert sorted(map(sorted, view.comps)) == sorted(map(sorted, batch.comps))
