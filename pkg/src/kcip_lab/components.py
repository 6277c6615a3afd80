"""Connected components of the occupied subgraph and the corrected count N_H.

N_H is the expected number of survivors of the absorbing chain that
repeatedly deletes a uniformly chosen vertex having at least one neighbor
left, until only singletons remain.  The exact recursion is evaluated in
rational arithmetic so equality tests against closed forms are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameterError, SizeCapError
from .graph import Graph, distance_matrix
from .kcip import Observer, SpinConfig

EXACT_CAP = 14  # recursion over subsets is exponential in |H|


@dataclass
class ComponentView:
    """Snapshot of the occupied subgraph: labels, components and counts."""

    comp_id: dict
    comps: list
    V: int
    Y: int

    @property
    def delta(self) -> int:
        return self.V - self.Y


def component_stats(g: Graph, x: SpinConfig) -> ComponentView:
    """Decompose the subgraph induced by the occupied vertices (batch BFS)."""
    if x.n != g.n:
        raise InvalidParameterError(f"config length {x.n} != graph size {g.n}")
    bits = x.bits
    comp_id = {}
    comps = []
    for v in range(g.n):
        if not (bits >> v) & 1 or v in comp_id:
            continue
        cid = len(comps)
        comp = []
        stack = [v]
        comp_id[v] = cid
        while stack:
            w = stack.pop()
            comp.append(w)
            for u in g.adjacency[w]:
                if (bits >> u) & 1 and u not in comp_id:
                    comp_id[u] = cid
                    stack.append(u)
        comps.append(frozenset(comp))
    V = x.occupied_count
    return ComponentView(comp_id=comp_id, comps=comps, V=V, Y=len(comps))


class IncrementalComponents:
    """Component tracking that touches only the neighborhood of each flip.

    Additions union adjacent components; removals rebuild just the component
    that contained the removed vertex.
    """

    def __init__(self, g: Graph, x: SpinConfig):
        self.g = g
        view = component_stats(g, x)
        self._next_id = len(view.comps)
        self.members = {cid: set(comp) for cid, comp in enumerate(view.comps)}
        self.comp_id = dict(view.comp_id)

    @property
    def Y(self) -> int:
        return len(self.members)

    @property
    def V(self) -> int:
        return len(self.comp_id)

    def sizes(self):
        return sorted(len(m) for m in self.members.values())

    def component_of(self, v):
        return self.members[self.comp_id[v]]

    def adjacent_components(self, v):
        """Distinct component ids among occupied neighbors of v."""
        seen = []
        for u in self.g.adjacency[v]:
            cid = self.comp_id.get(u)
            if cid is not None and cid not in seen:
                seen.append(cid)
        return seen

    def add(self, v):
        if v in self.comp_id:
            raise InvalidParameterError(f"vertex {v} already occupied")
        targets = self.adjacent_components(v)
        cid = self._next_id
        self._next_id += 1
        merged = {v}
        for t in targets:
            merged |= self.members.pop(t)
        self.members[cid] = merged
        for w in merged:
            self.comp_id[w] = cid

    def remove(self, v):
        cid = self.comp_id.pop(v)
        rest = self.members.pop(cid)
        rest.discard(v)
        # rebuild the split pieces by BFS restricted to the old component
        while rest:
            seed = next(iter(rest))
            piece = {seed}
            stack = [seed]
            rest.discard(seed)
            while stack:
                w = stack.pop()
                for u in self.g.adjacency[w]:
                    if u in rest:
                        rest.discard(u)
                        piece.add(u)
                        stack.append(u)
            nid = self._next_id
            self._next_id += 1
            self.members[nid] = piece
            for w in piece:
                self.comp_id[w] = nid

    def as_view(self) -> ComponentView:
        comps = [frozenset(m) for m in self.members.values()]
        comp_id = {}
        for cid, comp in enumerate(comps):
            for v in comp:
                comp_id[v] = cid
        return ComponentView(comp_id=comp_id, comps=comps, V=self.V, Y=len(comps))


def _active_vertices(adj_sets, H):
    return [v for v in H if adj_sets[v] & H]


def _split_components(adj_sets, H):
    out = []
    todo = set(H)
    while todo:
        seed = next(iter(todo))
        comp = {seed}
        stack = [seed]
        todo.discard(seed)
        while stack:
            w = stack.pop()
            for u in adj_sets[w]:
                if u in todo:
                    todo.discard(u)
                    comp.add(u)
                    stack.append(u)
        out.append(frozenset(comp))
    return out


def corrected_count_exact(g: Graph, H, cap: int = EXACT_CAP) -> Fraction:
    """Exact N_H by memoized recursion, as a Fraction.

    N_H = mean over active vertices u of N_{H minus u}; a set with no active
    vertex (all singletons) counts its size.  Disconnected H splits into the
    sum over components, which keeps the memo small.
    """
    H = frozenset(H)
    for v in H:
        g._check_vertex(v)
    if len(H) > cap:
        raise SizeCapError(f"|H| = {len(H)} exceeds exact-recursion cap {cap}")
    adj_sets = [set(g.adjacency[v]) for v in range(g.n)]
    memo = {}

    def rec(comp) -> Fraction:
        got = memo.get(comp)
        if got is not None:
            return got
        active = _active_vertices(adj_sets, comp)
        if not active:
            val = Fraction(len(comp))
        else:
            total = Fraction(0)
            for u in active:
                rest = comp - {u}
                total += sum((rec(c) for c in _split_components(adj_sets, rest)), Fraction(0))
            val = total / len(active)
        memo[comp] = val
        return val

    return sum((rec(c) for c in _split_components(adj_sets, H)), Fraction(0))


def corrected_count_mc(g: Graph, H, reps: int, seed: int):
    """Monte Carlo N_H: mean and standard error of the survivor count over
    independent runs of the absorbing deletion chain."""
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    H = list(dict.fromkeys(H))
    for v in H:
        g._check_vertex(v)
    adj_sets = [set(g.adjacency[v]) for v in range(g.n)]
    rng = np.random.default_rng(seed)
    outcomes = np.empty(reps)
    for r in range(reps):
        current = set(H)
        active = [v for v in current if adj_sets[v] & current]
        while active:
            u = active[rng.integers(0, len(active))]
            current.discard(u)
            active = [v for v in current if adj_sets[v] & current]
        outcomes[r] = len(current)
    mean = float(outcomes.mean())
    stderr = float(outcomes.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return mean, stderr


def corrected_total(g: Graph, x: SpinConfig, cap: int = EXACT_CAP) -> Fraction:
    """Corrected component count of a configuration: sum of N_H over the
    components of the occupied subgraph."""
    view = component_stats(g, x)
    total = Fraction(0)
    for comp in view.comps:
        if len(comp) > cap:
            raise SizeCapError(f"component of size {len(comp)} exceeds cap {cap}")
        total += corrected_count_exact(g, comp, cap=cap)
    return total


def min_pair_distance(g: Graph, x: SpinConfig):
    """Minimum graph distance between distinct occupied vertices; math.inf
    when fewer than two particles are present."""
    occ = x.occupied()
    if len(occ) < 2:
        return math.inf
    dmat = distance_matrix(g)
    best = math.inf
    for i, u in enumerate(occ):
        row = dmat[u]
        for v in occ[i + 1 :]:
            d = row[v]
            if 0 <= d < best:
                best = d
    return best


def is_separated(g: Graph, x: SpinConfig, zeta: float) -> bool:
    """True when all occupied pairs are strictly more than zeta apart."""
    return min_pair_distance(g, x) > zeta


class CollisionObserver(Observer):
    """Records collision times: steps u at which Y_{u+1} < Y_u.

    For each collision it stores the time and colM, the largest component
    among those adjacent to the updated vertex in the pre-update graph.
    """

    name = "collisions"

    def __init__(self, g: Graph, x0: SpinConfig):
        self.tracker = IncrementalComponents(g, x0)
        self.count = 0
        self.times = []
        self.max_sizes = []

    def on_transition(self, t, v, p, old_bit, state):
        if old_bit:
            self.tracker.remove(v)
            return
        adjacent = self.tracker.adjacent_components(v)
        if len(adjacent) >= 2:
            self.count += 1
            self.times.append(t)
            self.max_sizes.append(
                max(len(self.tracker.members[cid]) for cid in adjacent)
            )
        self.tracker.add(v)

    def summary(self):
        return {
            "count": self.count,
            "times": list(self.times),
            "max_sizes": list(self.max_sizes),
        }
