"""Comparison processes: simple exclusion, Metropolis exclusion, the
coalescence process, the colored KCIP, and the triple-time observable.

The exact three-state triple-time solver applies to m-regular triangle-free
graphs, where the particle count is a Markov chain on {1, 2, >=3} until the
triple time: an isolated particle grows at rate cm/n^2, an adjacent pair
loses a particle at rate (2/n)(1-c/n) and gains one at rate c(2m-2)/n^2
(the pair has exactly 2m-2 empty neighbors when there are no triangles).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameterError, InvalidStateError
from .graph import Graph, check_regular_triangle_free, distance_matrix
from .kcip import Density, SpinConfig, UpdateDraw, draw_blocks, kcip_step
from .exact_analysis import TransitionKernel


# ---------------------------------------------------------------------------
# simple exclusion and its Metropolis variant

class ExclusionState:
    """A k-subset of vertices as a bit vector; the particle count is conserved
    by every exclusion update."""

    __slots__ = ("n", "bits", "k")

    def __init__(self, n: int, bits: int):
        if bits < 0 or bits >> n:
            raise InvalidParameterError(f"bits {bits:#x} out of range for n={n}")
        self.n = n
        self.bits = bits
        self.k = bin(bits).count("1")

    @classmethod
    def from_occupied(cls, n, occupied):
        bits = 0
        for v in occupied:
            bits |= 1 << v
        return cls(n, bits)

    def occupied(self):
        return [v for v in range(self.n) if (self.bits >> v) & 1]

    def __eq__(self, other):
        return isinstance(other, ExclusionState) and (self.n, self.bits) == (other.n, other.bits)

    def __hash__(self):
        return hash((self.n, self.bits))

    def __repr__(self):
        return f"ExclusionState(n={self.n}, bits={self.bits:#x})"


def _swap_bits(bits: int, u: int, v: int) -> int:
    bu = (bits >> u) & 1
    bv = (bits >> v) & 1
    if bu == bv:
        return bits
    return bits ^ ((1 << u) | (1 << v))


def sep_step(g: Graph, z: ExclusionState, edge, orientation: bool) -> ExclusionState:
    """Swap the labels across a uniformly drawn edge.

    The orientation coin fixes which endpoint is read first in the draw
    protocol; the swap itself is symmetric, so it never changes the result.
    """
    u, v = edge
    if v not in g.adjacency[u]:
        raise InvalidParameterError(f"{(u, v)} is not an edge")
    if orientation:
        u, v = v, u
    new_bits = _swap_bits(z.bits, u, v)
    if new_bits == z.bits:
        return z
    return ExclusionState(z.n, new_bits)


def no_adjacent_particles(g: Graph, bits: int) -> bool:
    return all(not ((bits >> u) & 1 and (bits >> v) & 1) for u, v in g.edges())


def mh_sep_step(g: Graph, z: ExclusionState, edge, orientation: bool) -> ExclusionState:
    """Metropolis step targeting the uniform law on no-adjacent k-subsets:
    propose the exclusion swap, accept only if no two particles end up
    adjacent."""
    if not no_adjacent_particles(g, z.bits):
        raise InvalidStateError("state has adjacent particles, outside Omega_{n,k}")
    proposal = sep_step(g, z, edge, orientation)
    if no_adjacent_particles(g, proposal.bits):
        return proposal
    return z


def _subset_states(g: Graph, k: int, restrict_no_adjacent: bool):
    states = []
    for comb in itertools.combinations(range(g.n), k):
        bits = 0
        for v in comb:
            bits |= 1 << v
        if restrict_no_adjacent and not no_adjacent_particles(g, bits):
            continue
        states.append(bits)
    return states


def sep_kernel(g: Graph, k: int) -> TransitionKernel:
    """Exact kernel of the simple exclusion process on the k-subsets."""
    if not 1 <= k <= g.n:
        raise InvalidParameterError(f"k={k} out of range")
    states = _subset_states(g, k, restrict_no_adjacent=False)
    index = {s: i for i, s in enumerate(states)}
    edges = g.edges()
    N = len(states)
    P = np.zeros((N, N))
    for bits in states:
        i = index[bits]
        for u, v in edges:
            t = _swap_bits(bits, u, v)
            P[i, index[t]] += 1.0 / len(edges)
    return TransitionKernel(P, states)


def mh_sep_kernel(g: Graph, k: int) -> TransitionKernel:
    """Exact kernel of the Metropolis exclusion chain on Omega_{n,k}."""
    states = _subset_states(g, k, restrict_no_adjacent=True)
    if not states:
        raise InvalidParameterError(f"Omega_{{{g.n},{k}}} is empty")
    index = {s: i for i, s in enumerate(states)}
    edges = g.edges()
    N = len(states)
    P = np.zeros((N, N))
    for bits in states:
        i = index[bits]
        for u, v in edges:
            t = _swap_bits(bits, u, v)
            j = index.get(t)
            if j is None:  # proposal leaves Omega: rejected
                j = i
            P[i, j] += 1.0 / len(edges)
    return TransitionKernel(P, states)


# ---------------------------------------------------------------------------
# coalescence process

class CoalescenceState:
    """Labeled random walkers that merge on meeting.

    positions[i] is the vertex of particle label i; merged labels share a
    position.  The occupied set can only shrink.
    """

    __slots__ = ("n", "positions", "q")

    def __init__(self, g: Graph, positions, q: float):
        k = len(positions)
        if k < 1:
            raise InvalidParameterError("need at least one particle")
        if not 0 <= q <= 1.0 / k:
            raise InvalidParameterError(f"moving rate q={q} outside [0, 1/k] for k={k}")
        if len(set(positions)) != k:
            raise InvalidParameterError("initial positions must be pairwise distinct")
        for v in positions:
            g._check_vertex(v)
        self.n = g.n
        self.positions = tuple(positions)
        self.q = q

    def occupied(self):
        return sorted(set(self.positions))

    def min_pair_distance(self, g: Graph):
        occ = self.occupied()
        if len(occ) < 2:
            return math.inf
        dmat = distance_matrix(g)
        return min(dmat[u][v] for i, u in enumerate(occ) for v in occ[i + 1 :])

    def _moved(self, v_from: int, v_to: int) -> "CoalescenceState":
        new = CoalescenceState.__new__(CoalescenceState)
        new.n = self.n
        new.positions = tuple(v_to if p == v_from else p for p in self.positions)
        new.q = self.q
        return new


def coalescence_step(g: Graph, state: CoalescenceState, u: float, v: int, w: int) -> CoalescenceState:
    """One update with explicit draws: u uniform in [0,1], v a uniform
    occupied site, w a uniform neighbor of v.  With probability q|O| the
    whole stack at v moves to w, merging with anything already there."""
    occ = state.occupied()
    if v not in occ:
        raise InvalidParameterError(f"v={v} is not an occupied site")
    if w not in g.adjacency[v]:
        raise InvalidParameterError(f"w={w} is not a neighbor of {v}")
    if u <= state.q * len(occ):
        return state._moved(v, w)
    return state


@dataclass
class CoalescenceRun:
    """Path summary of a seeded coalescence run."""

    initial_count: int
    collision_time: int | None
    horizon: int
    occupied_sizes: list
    near_times: dict

    def collision(self, censored_value=None):
        return self.collision_time if self.collision_time is not None else censored_value


def run_coalescence(
    g: Graph,
    state: CoalescenceState,
    horizon: int,
    seed: int,
    near_distances=(),
    stop_at_collision: bool = True,
) -> CoalescenceRun:
    """Drive the coalescence chain for `horizon` steps (or until the first
    merge) recording the collision time and first near-collision times.

    tau_col is the first t with |O_t| < |O_0|; tau_near(i) the first t at
    which two occupied sites are within distance i.  Unreached times are
    reported as None (censored).
    """
    rng = np.random.default_rng(seed)
    near = {int(i): None for i in near_distances}
    start_count = len(state.occupied())

    def note_near(t, dist):
        for i, val in near.items():
            if val is None and dist <= i:
                near[i] = t

    note_near(0, state.min_pair_distance(g))
    collision = None
    sizes = [start_count]
    for t in range(horizon):
        occ = state.occupied()
        u = rng.random()
        v = occ[rng.integers(0, len(occ))]
        nbrs = g.adjacency[v]
        w = nbrs[rng.integers(0, len(nbrs))]
        state = coalescence_step(g, state, u, v, w)
        now = len(state.occupied())
        sizes.append(now)
        if now < start_count and collision is None:
            collision = t + 1
            if stop_at_collision:
                break
        note_near(t + 1, state.min_pair_distance(g))
    return CoalescenceRun(
        initial_count=start_count,
        collision_time=collision,
        horizon=horizon,
        occupied_sizes=sizes,
        near_times=near,
    )


def collision_time(run: CoalescenceRun):
    """First time the occupied-set size drops; None when censored."""
    return run.collision_time


def near_collision_time(run: CoalescenceRun, i: int):
    """First time two particles are within distance i; None when censored."""
    if i < 1:
        raise InvalidParameterError(f"distance must be >= 1, got {i}")
    if i not in run.near_times:
        raise InvalidParameterError(f"run did not track distance {i}")
    return run.near_times[i]


# ---------------------------------------------------------------------------
# colored KCIP

class ColoredConfig:
    """Per-vertex labels in {0..k}; label 0 marks an empty vertex.

    The nonzero pattern evolves exactly as the KCIP driven by the same
    draws, and each occupied component stays monochrome.
    """

    __slots__ = ("n", "labels", "k")

    def __init__(self, n: int, labels, k: int):
        labels = list(labels)
        if len(labels) != n:
            raise InvalidParameterError("label vector has wrong length")
        if any(not 0 <= lab <= k for lab in labels):
            raise InvalidParameterError(f"labels must lie in 0..{k}")
        self.n = n
        self.labels = labels
        self.k = k

    @classmethod
    def from_components(cls, g: Graph, x: SpinConfig):
        """Color the components of x 1..Y in order of smallest vertex."""
        from .components import component_stats

        view = component_stats(g, x)
        comps = sorted(view.comps, key=min)
        labels = [0] * g.n
        for i, comp in enumerate(comps, start=1):
            for v in comp:
                labels[v] = i
        return cls(g.n, labels, len(comps))

    def projection(self) -> SpinConfig:
        return SpinConfig.from_bits_list([1 if lab else 0 for lab in self.labels])

    def copy(self):
        return ColoredConfig(self.n, list(self.labels), self.k)


def colored_kcip_step(
    g: Graph,
    xc: ColoredConfig,
    draw: UpdateDraw,
    density: Density,
    neighbor_pick: float = 0.0,
) -> ColoredConfig:
    """One colored update.

    Label removals mirror the plain KCIP.  A 0 -> 1 flip at v picks an
    occupied neighbor u (neighbor_pick in [0,1) indexes the sorted occupied
    neighbors) and recolors v together with its whole merged component to
    u's color, so components stay monochrome even when the flip joins
    components of different colors.
    """
    if not 0.0 <= neighbor_pick < 1.0:
        raise InvalidParameterError(f"neighbor_pick must lie in [0,1), got {neighbor_pick}")
    x = xc.projection()
    y = kcip_step(g, x, draw, density)
    if y.bits == x.bits:
        return xc
    v = draw.v
    out = xc.copy()
    if x[v] == 1:  # removal
        out.labels[v] = 0
        return out
    occ_nbrs = [u for u in g.adjacency[v] if xc.labels[u] != 0]
    u_pick = occ_nbrs[int(neighbor_pick * len(occ_nbrs))]
    color = xc.labels[u_pick]
    # flood the merged component of v in the post-flip pattern
    out.labels[v] = color
    stack = [v]
    seen = {v}
    while stack:
        w = stack.pop()
        for z in g.adjacency[w]:
            if z not in seen and out.labels[z] != 0:
                seen.add(z)
                out.labels[z] = color
                stack.append(z)
    return out


def color_counts(g: Graph, xc: ColoredConfig):
    """Per color i >= 1: (vertex count V^(i), component count |Comp^(i)|)."""
    from .components import component_stats

    view = component_stats(g, xc.projection())
    out = {i: [0, 0] for i in range(1, xc.k + 1)}
    for v, lab in enumerate(xc.labels):
        if lab:
            out[lab][0] += 1
    for comp in view.comps:
        out[xc.labels[next(iter(comp))]][1] += 1
    return {i: tuple(pair) for i, pair in out.items()}


class InterferenceRecorder:
    """Records zeta_int per color: the first time the color's vertex count
    or component count jumps by more than one in a single step.  Purely an
    observer; it never alters the dynamics."""

    def __init__(self, g: Graph, xc: ColoredConfig):
        self.g = g
        self.prev = color_counts(g, xc)
        self.zeta_int = {i: None for i in self.prev}

    def observe(self, t: int, after: ColoredConfig):
        now = color_counts(self.g, after)
        for i, (v_now, c_now) in now.items():
            v_prev, c_prev = self.prev[i]
            if self.zeta_int[i] is None and (
                abs(v_now - v_prev) > 1 or abs(c_now - c_prev) > 1
            ):
                self.zeta_int[i] = t
        self.prev = now


def run_colored(
    g: Graph,
    xc: ColoredConfig,
    T: int,
    seed: int,
    density: Density,
    check=None,
    record_interference: bool = False,
):
    """Drive the colored chain T steps from a seeded stream.

    `check`, when given, is called as check(t, before, after) at every
    step.  With record_interference the return value is
    (final, zeta_int dict); otherwise just the final configuration.
    """
    rng = np.random.default_rng(seed)
    n = g.n
    recorder = InterferenceRecorder(g, xc) if record_interference else None
    for t in range(T):
        v = int(rng.integers(0, n))
        p = float(rng.random())
        pick = float(rng.random())
        nxt = colored_kcip_step(g, xc, UpdateDraw(v, p), density, neighbor_pick=pick)
        if check is not None:
            check(t, xc, nxt)
        if recorder is not None:
            recorder.observe(t, nxt)
        xc = nxt
    if recorder is not None:
        return xc, recorder.zeta_int
    return xc


# ---------------------------------------------------------------------------
# triple time

def triple_kernel(n: int, c: float, m: int) -> np.ndarray:
    """Transition matrix of the particle count on {1, 2, >=3} before the
    triple time, valid on m-regular triangle-free graphs."""
    _validate_triple_params(n, c, m)
    grow1 = c * m / n**2
    drop2 = (2.0 / n) * (1 - c / n)
    grow2 = c * (2 * m - 2) / n**2
    return np.array(
        [
            [1 - grow1, grow1, 0.0],
            [drop2, 1 - drop2 - grow2, grow2],
            [0.0, 0.0, 1.0],
        ]
    )


def triple_time_exact(n: int, c: float, m: int):
    """Expected triple times (E_1, E_2) from one particle and from an
    adjacent pair, solved exactly from the three-state chain.

    E_1 = n^2/(cm) + E_2 and (a + b) E_2 = 1 + a E_1 with a = (2/n)(1-c/n),
    b = c(2m-2)/n^2, so b E_2 = 1 + a n^2/(cm).
    """
    _validate_triple_params(n, c, m)
    cf = Fraction(c).limit_denominator(10**12) if not isinstance(c, Fraction) else c
    a = Fraction(2, n) * (1 - cf / n)
    b = cf * (2 * m - 2) / Fraction(n) ** 2
    inv_grow1 = Fraction(n) ** 2 / (cf * m)
    e2 = (1 + a * inv_grow1) / b
    e1 = inv_grow1 + e2
    return float(e1), float(e2)


def triple_time_asymptote(n: int, c: float, m: int) -> float:
    """Leading-order expected triple time n^3 / (c^2 m (m-1))."""
    _validate_triple_params(n, c, m)
    return n**3 / (c**2 * m * (m - 1))


def _validate_triple_params(n, c, m):
    if not (isinstance(m, int) and m > 1):
        raise InvalidParameterError(f"m must be an integer > 1, got {m!r}")
    if not n > c:
        raise InvalidParameterError(f"need n > c, got n={n}, c={c}")
    if c <= 0:
        raise InvalidParameterError(f"c must be positive, got {c}")


def triple_time_for_graph(g: Graph, c: float):
    """Exact expected triple time on g, gated on the m-regular triangle-free
    check.  Returns (E_1, E_2, m)."""
    m, triangle_free = check_regular_triangle_free(g)
    if m is None or m <= 1 or not triangle_free:
        raise InvalidParameterError(
            "exact triple time needs an m-regular (m > 1) triangle-free graph"
        )
    e1, e2 = triple_time_exact(g.n, c, m)
    return e1, e2, m


def triple_time_mc(g: Graph, c: float, seed: int, reps: int, horizon: int | None = None):
    """Monte Carlo triple time: first time the particle count reaches 3,
    started from a single particle at vertex 0.

    Returns (mean, stderr, samples); censored runs (horizon reached first)
    appear as None in samples and are excluded from the moments.
    """
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    density = Density(c)
    n = g.n
    p_dens = density.p(n)
    adj = g.adjacency
    if horizon is None:
        horizon = max(1000, 200 * n**3)
    samples = []
    for rep in range(reps):
        rng = np.random.default_rng(seed + rep)
        bits = 1
        count = 1
        nocc = [0] * n
        for u in adj[0]:
            nocc[u] = 1
        hit = None
        t = 0
        for vs, ps in draw_blocks(rng, n, horizon):
            for i, v in enumerate(vs):
                if nocc[v]:
                    old = (bits >> v) & 1
                    new = 1 if ps[i] <= p_dens else 0
                    if old != new:
                        bits ^= 1 << v
                        delta = 1 if new else -1
                        count += delta
                        for u in adj[v]:
                            nocc[u] += delta
                        if count >= 3:
                            hit = t + i + 1
                            break
            if hit is not None:
                break
            t += len(vs)
        samples.append(hit)
    finished = [s for s in samples if s is not None]
    if not finished:
        return math.nan, math.nan, samples
    arr = np.array(finished, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, stderr, samples
