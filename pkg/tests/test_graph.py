import math

import numpy as np
import pytest

from kcip_lab.errors import InvalidParameterError
from kcip_lab.graph import (
    Graph,
    ball,
    check_regular_triangle_free,
    distance_matrix,
    graph_distance,
    make_cycle,
    make_torus,
    parse_graph_spec,
    torus_coords,
    torus_vertex,
)

from conftest import bfs_distance_oracle, torus_distance_formula, triangle_scan_oracle


def brute_force_triangle(g):
    occ = range(g.n)
    for a in occ:
        for b in occ:
            for c in occ:
                if a < b < c:
                    if b in g.adjacency[a] and c in g.adjacency[b] and c in g.adjacency[a]:
                        return True
    return False


class TestMakeTorus:
    def test_cycle_c4(self):
        g = make_torus(4, 1)
        assert g.n == 4
        assert all(g.degree(v) == 2 for v in range(4))
        assert g.adjacency[0] == (1, 3)

    def test_torus_4_2_is_4_regular_triangle_free(self):
        g = make_torus(4, 2)
        assert g.n == 16
        assert all(g.degree(v) == 4 for v in range(16))
        assert not brute_force_triangle(g)

    def test_c3_contains_triangle(self):
        g = make_torus(3, 1)
        assert brute_force_triangle(g)

    @pytest.mark.parametrize("L,d", [(2, 1), (1, 3), (0, 2), (3, 0), (4, -1)])
    def test_bad_parameters_rejected(self, L, d):
        with pytest.raises(InvalidParameterError):
            make_torus(L, d)

    @pytest.mark.parametrize("L,d", [(3, 1), (4, 2), (3, 3), (5, 2)])
    def test_regular_degree_2d(self, L, d):
        g = make_torus(L, d)
        assert g.n == L**d
        assert all(g.degree(v) == 2 * d for v in range(g.n))

    def test_coordinate_codec_roundtrip(self):
        g = make_torus(4, 3)
        for v in range(g.n):
            assert torus_vertex(g, torus_coords(g, v)) == v
        # little-endian mixed radix: coords (1, 2, 3) -> 1 + 2*4 + 3*16
        assert torus_vertex(g, (1, 2, 3)) == 1 + 2 * 4 + 3 * 16

    def test_adjacency_symmetry_validated(self):
        with pytest.raises(InvalidParameterError):
            Graph([[1], []])
        with pytest.raises(InvalidParameterError):
            Graph([[0]])


class TestGraphDistance:
    def test_identity(self):
        g = make_torus(5, 2)
        assert graph_distance(g, 7, 7) == 0

    def test_cycle_wraparound(self):
        g = make_torus(5, 1)
        assert graph_distance(g, 0, 3) == 2

    def test_torus_4_2(self):
        g = make_torus(4, 2)
        u = torus_vertex(g, (0, 0))
        v = torus_vertex(g, (2, 2))
        assert graph_distance(g, u, v) == 4

    def test_out_of_range_vertex(self):
        g = make_torus(4, 1)
        with pytest.raises(InvalidParameterError):
            graph_distance(g, 0, 4)

    @pytest.mark.parametrize("L,d", [(5, 1), (4, 2), (3, 3)])
    def test_bfs_matches_coordinate_formula(self, L, d, rng):
        g = make_torus(L, d)
        for _ in range(1000):
            u = int(rng.integers(0, g.n))
            v = int(rng.integers(0, g.n))
            expected = torus_distance_formula(L, d, torus_coords(g, u), torus_coords(g, v))
            assert graph_distance(g, u, v) == expected

    def test_matches_independent_bfs(self, rng):
        g = make_torus(4, 2)
        for _ in range(50):
            u = int(rng.integers(0, g.n))
            v = int(rng.integers(0, g.n))
            assert graph_distance(g, u, v) == bfs_distance_oracle(g.adjacency, u, v)


class TestBall:
    def test_radius_zero(self):
        g = make_torus(5, 2)
        assert ball(g, 3, 0) == {3}

    @pytest.mark.parametrize("L,d", [(3, 1), (5, 1), (4, 2), (3, 3)])
    def test_radius_one_size(self, L, d):
        g = make_torus(L, d)
        assert len(ball(g, 0, 1)) == 2 * d + 1

    @pytest.mark.parametrize("L,d", [(5, 1), (4, 2), (3, 3)])
    def test_ball_size_bound(self, L, d):
        g = make_torus(L, d)
        for radius in range(0, 4):
            assert len(ball(g, 0, radius)) <= (2 * d) ** radius + 1

    def test_ball_diameter_is_everything(self):
        g = make_torus(4, 2)
        diameter = max(
            graph_distance(g, 0, v) for v in range(g.n)
        )
        assert ball(g, 0, diameter) == set(range(g.n))


class TestRegularTriangleFree:
    def test_c6(self):
        assert check_regular_triangle_free(make_cycle(6)) == (2, True)

    def test_c3(self):
        assert check_regular_triangle_free(make_cycle(3)) == (2, False)

    def test_star(self):
        star = Graph([[1, 2, 3, 4], [0], [0], [0], [0]])
        m, tri_free = check_regular_triangle_free(star)
        assert m is None
        assert tri_free

    def test_torus_3_2_has_triangles(self):
        # each axis of L=3 wraps into a 3-cycle
        g = make_torus(3, 2)
        assert check_regular_triangle_free(g) == (4, False)
        assert brute_force_triangle(g)

    @pytest.mark.parametrize("L,d", [(4, 2), (5, 2), (3, 3), (6, 1)])
    def test_matches_triangle_oracle(self, L, d):
        g = make_torus(L, d)
        _, tri_free = check_regular_triangle_free(g)
        assert tri_free == (not triangle_scan_oracle([set(a) for a in g.adjacency]))


class TestParseGraphSpec:
    def test_torus_spec(self):
        g = parse_graph_spec("torus:L=4,d=3")
        assert g.n == 64
        assert g.kind == "torus:L=4,d=3"

    def test_edges_spec(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("0 1\n1 2\n2 0\n")
        g = parse_graph_spec(f"edges:{path}")
        assert g.n == 3
        assert check_regular_triangle_free(g) == (2, False)

    @pytest.mark.parametrize("spec", ["torus:L=2,d=1", "torus:L=x,d=1", "ring:5", "edges:/nonexistent/file"])
    def test_bad_specs(self, spec):
        with pytest.raises(InvalidParameterError):
            parse_graph_spec(spec)


def test_distance_matrix_consistent():
    g = make_torus(3, 2)
    dmat = distance_matrix(g)
    for u in range(g.n):
        for v in range(g.n):
            assert dmat[u][v] == graph_distance(g, u, v)
