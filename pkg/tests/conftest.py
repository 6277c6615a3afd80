"""Shared oracles and helpers for the test suite.

Oracles here are deliberately independent of the library code paths they
check: distances come from a fresh BFS, torus distances from the coordinate
formula, components from a throwaway flood fill.
"""

from collections import deque

import numpy as np
import pytest

from kcip_lab.graph import Graph


def bfs_distance_oracle(adjacency, u, v):
    """Plain BFS over an adjacency list, written independently of graph.py."""
    if u == v:
        return 0
    seen = {u}
    frontier = deque([(u, 0)])
    while frontier:
        w, d = frontier.popleft()
        for x in adjacency[w]:
            if x == v:
                return d + 1
            if x not in seen:
                seen.add(x)
                frontier.append((x, d + 1))
    return None


def torus_distance_formula(L, d, cu, cv):
    """Sum over axes of min(|delta|, L - |delta|)."""
    total = 0
    for a, b in zip(cu, cv):
        delta = abs(a - b) % L
        total += min(delta, L - delta)
    return total


def components_oracle(adjacency, occupied):
    """Connected components of the induced occupied subgraph, flood fill."""
    occupied = set(occupied)
    comps = []
    todo = set(occupied)
    while todo:
        seed = next(iter(todo))
        comp = {seed}
        stack = [seed]
        todo.discard(seed)
        while stack:
            w = stack.pop()
            for x in adjacency[w]:
                if x in todo:
                    todo.discard(x)
                    comp.add(x)
                    stack.append(x)
        comps.append(frozenset(comp))
    return comps


def triangle_scan_oracle(adjacency):
    n = len(adjacency)
    for a in range(n):
        for b in adjacency[a]:
            if b <= a:
                continue
            for c in adjacency[b]:
                if c <= b:
                    continue
                if c in adjacency[a]:
                    return True
    return False


def random_graph(rng, n, extra_edges):
    """Connected random graph: a spanning path plus extra random chords."""
    edges = {(i, i + 1) for i in range(n - 1)}
    while len(edges) < n - 1 + extra_edges:
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        edges.add((min(u, v), max(u, v)))
    adjacency = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    return Graph(adjacency, kind="general")


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
