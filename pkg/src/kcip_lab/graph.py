"""Finite undirected graphs with a d-dimensional torus constructor.

Vertices are dense integers 0..n-1.  Torus vertex ids use a little-endian
mixed-radix encoding of the coordinates: id = sum_i x_i * L**i, so test
vectors are portable across implementations.
"""

from __future__ import annotations

from collections import deque

from .errors import InvalidParameterError


class Graph:
    """Immutable undirected graph given by per-vertex sorted neighbor lists.

    Adjacency symmetry, absence of self-loops and absence of duplicate
    neighbors are asserted on construction; instances are safe to share
    across workers.
    """

    __slots__ = ("n", "adjacency", "kind", "_edges", "_distances")

    def __init__(self, adjacency, kind="general"):
        adj = tuple(tuple(sorted(set(nbrs))) for nbrs in adjacency)
        n = len(adj)
        for v, nbrs in enumerate(adj):
            if len(nbrs) != len(set(nbrs)):
                raise InvalidParameterError(f"duplicate neighbors at vertex {v}")
            for u in nbrs:
                if not 0 <= u < n:
                    raise InvalidParameterError(f"neighbor {u} of {v} out of range")
                if u == v:
                    raise InvalidParameterError(f"self-loop at vertex {v}")
                if v not in adj[u]:
                    raise InvalidParameterError(f"asymmetric edge {v}->{u}")
        self.n = n
        self.adjacency = adj
        self.kind = kind
        self._edges = None
        self._distances = None

    def neighbors(self, v):
        self._check_vertex(v)
        return self.adjacency[v]

    def degree(self, v):
        self._check_vertex(v)
        return len(self.adjacency[v])

    def edges(self):
        """Sorted list of undirected edges as (u, v) with u < v."""
        if self._edges is None:
            self._edges = tuple(
                (v, u) for v in range(self.n) for u in self.adjacency[v] if v < u
            )
        return self._edges

    def spec_string(self):
        return self.kind

    def _check_vertex(self, v):
        if not (isinstance(v, int) and 0 <= v < self.n):
            raise InvalidParameterError(f"vertex {v!r} out of range for n={self.n}")

    def __reduce__(self):
        return (Graph, (self.adjacency, self.kind))


def make_torus(L: int, d: int) -> Graph:
    """Build the d-dimensional torus with L points per axis (n = L**d).

    L = 2 is rejected: the +1 and -1 generators coincide and the graph
    would not be 2d-regular.
    """
    if not isinstance(L, int) or L < 3:
        raise InvalidParameterError(f"torus needs integer L >= 3, got {L!r}")
    if not isinstance(d, int) or d < 1:
        raise InvalidParameterError(f"torus needs integer d >= 1, got {d!r}")
    n = L**d
    strides = [L**i for i in range(d)]
    adjacency = []
    for v in range(n):
        coords = [(v // strides[i]) % L for i in range(d)]
        nbrs = []
        for i in range(d):
            for step in (1, L - 1):
                w = v + ((coords[i] + step) % L - coords[i]) * strides[i]
                nbrs.append(w)
        adjacency.append(nbrs)
    return Graph(adjacency, kind=f"torus:L={L},d={d}")


def torus_coords(g: Graph, v: int):
    """Decode a torus vertex id back into its coordinate tuple."""
    L, d = _torus_params(g)
    g._check_vertex(v)
    return tuple((v // L**i) % L for i in range(d))


def torus_vertex(g: Graph, coords) -> int:
    L, d = _torus_params(g)
    if len(coords) != d:
        raise InvalidParameterError(f"expected {d} coordinates, got {len(coords)}")
    return sum((c % L) * L**i for i, c in enumerate(coords))


def _torus_params(g: Graph):
    if not g.kind.startswith("torus:"):
        raise InvalidParameterError("not a torus graph")
    parts = dict(p.split("=") for p in g.kind.split(":", 1)[1].split(","))
    return int(parts["L"]), int(parts["d"])


def graph_distance(g: Graph, u: int, v: int) -> int:
    """BFS edge distance between u and v."""
    g._check_vertex(u)
    g._check_vertex(v)
    if u == v:
        return 0
    dist = {u: 0}
    queue = deque([u])
    while queue:
        w = queue.popleft()
        for x in g.adjacency[w]:
            if x not in dist:
                dist[x] = dist[w] + 1
                if x == v:
                    return dist[x]
                queue.append(x)
    raise InvalidParameterError(f"vertices {u} and {v} are not connected")


def ball(g: Graph, v: int, radius: int):
    """All vertices within BFS distance `radius` of v, as a set."""
    g._check_vertex(v)
    if radius < 0:
        raise InvalidParameterError(f"radius must be >= 0, got {radius}")
    seen = {v}
    frontier = [v]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for x in g.adjacency[w]:
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        if not nxt:
            break
        frontier = nxt
    return seen


def distance_matrix(g: Graph):
    """All-pairs BFS distances, cached on the graph. O(n * E); small graphs only."""
    if g._distances is None:
        rows = []
        for s in range(g.n):
            dist = [-1] * g.n
            dist[s] = 0
            queue = deque([s])
            while queue:
                w = queue.popleft()
                for x in g.adjacency[w]:
                    if dist[x] < 0:
                        dist[x] = dist[w] + 1
                        queue.append(x)
            rows.append(tuple(dist))
        g._distances = tuple(rows)
    return g._distances


def check_regular_triangle_free(g: Graph):
    """Return (m, triangle_free): common degree m (None if irregular) and an
    exhaustive triangle scan.  Gates the exact triple-time solver, which is
    only valid for m-regular triangle-free graphs."""
    degrees = {len(nbrs) for nbrs in g.adjacency}
    m = degrees.pop() if len(degrees) == 1 else None
    triangle_free = True
    for v in range(g.n):
        nbrs = g.adjacency[v]
        for i, u in enumerate(nbrs):
            if u < v:
                continue
            nbr_set = set(g.adjacency[u])
            for w in nbrs[i + 1 :]:
                if w in nbr_set:
                    triangle_free = False
                    return m, triangle_free
    return m, triangle_free


def parse_graph_spec(spec: str) -> Graph:
    """Parse a CLI graph spec: "torus:L=4,d=3" or "edges:<path>".

    Edge files are whitespace-separated "u v" pairs, 0-indexed; n is
    1 + the largest vertex id mentioned.
    """
    if spec.startswith("torus:"):
        try:
            parts = dict(p.split("=") for p in spec.split(":", 1)[1].split(","))
            L = int(parts["L"])
            d = int(parts["d"])
        except (KeyError, ValueError) as exc:
            raise InvalidParameterError(f"bad torus spec {spec!r}") from exc
        return make_torus(L, d)
    if spec.startswith("edges:"):
        path = spec.split(":", 1)[1]
        try:
            with open(path) as fh:
                tokens = fh.read().split()
        except OSError as exc:
            raise InvalidParameterError(f"cannot read edge file {path!r}: {exc}") from exc
        if len(tokens) % 2 != 0:
            raise InvalidParameterError(f"edge file {path!r} has an odd token count")
        pairs = [(int(a), int(b)) for a, b in zip(tokens[::2], tokens[1::2])]
        if not pairs:
            raise InvalidParameterError(f"edge file {path!r} is empty")
        n = max(max(u, v) for u, v in pairs) + 1
        adjacency = [[] for _ in range(n)]
        for u, v in pairs:
            if u == v:
                raise InvalidParameterError(f"self-loop {u} {v} in {path!r}")
            if v not in adjacency[u]:
                adjacency[u].append(v)
                adjacency[v].append(u)
        return Graph(adjacency, kind=f"edges:{path}")
    raise InvalidParameterError(f"unrecognized graph spec {spec!r}")


def make_cycle(n: int) -> Graph:
    """Cycle C_n, a convenience wrapper for make_torus(n, 1)."""
    return make_torus(n, 1)
