"""The kinetically constrained Ising process on a finite graph.

A step draws a uniform vertex v and a uniform p in [0,1].  If v has at
least one occupied neighbor, its label becomes 1 when p <= c/n and 0
otherwise; all other vertices are untouched.  Ties at p == c/n flip to 1.
The last particle can never be removed, so the occupied count stays >= 1
along any trajectory started with at least one particle.
"""

from __future__ import annotations

import bisect
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .graph import Graph

RNG_PROTOCOL = "numpy-pcg64-blockwise"
_BLOCK = 1 << 15


@dataclass(frozen=True)
class Density:
    """Low-density parameter: p = c/n on the target graph."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")

    def p(self, n: int) -> float:
        p = self.c / n
        if not 0 < p < 1:
            raise InvalidParameterError(f"p = c/n = {p} outside (0, 1) for n = {n}")
        return p


@dataclass(frozen=True)
class UpdateDraw:
    """One update draw: v uniform over vertices, p uniform over [0,1]."""

    v: int
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"p must lie in [0,1], got {self.p}")


class SpinConfig:
    """Bit-packed {0,1} labeling of the vertices.

    bits is an integer bitmask (bit v = vertex v); occupied_count caches the
    popcount and is maintained on every construction path.
    """

    __slots__ = ("n", "bits", "occupied_count")

    def __init__(self, n: int, bits: int = 0):
        if bits < 0 or bits >> n:
            raise InvalidParameterError(f"bits {bits:#x} out of range for n={n}")
        self.n = n
        self.bits = bits
        self.occupied_count = bin(bits).count("1")

    @classmethod
    def from_occupied(cls, n: int, occupied) -> "SpinConfig":
        bits = 0
        for v in occupied:
            if not 0 <= v < n:
                raise InvalidParameterError(f"vertex {v} out of range")
            bits |= 1 << v
        return cls(n, bits)

    @classmethod
    def from_bits_list(cls, labels) -> "SpinConfig":
        bits = 0
        for v, x in enumerate(labels):
            if x not in (0, 1):
                raise InvalidParameterError(f"label {x!r} at vertex {v} not in {{0,1}}")
            bits |= x << v
        return cls(len(labels), bits)

    def __getitem__(self, v: int) -> int:
        return (self.bits >> v) & 1

    def occupied(self):
        return [v for v in range(self.n) if (self.bits >> v) & 1]

    def to_tuple(self):
        return tuple((self.bits >> v) & 1 for v in range(self.n))

    def with_bit(self, v: int, value: int) -> "SpinConfig":
        if value:
            return SpinConfig(self.n, self.bits | (1 << v))
        return SpinConfig(self.n, self.bits & ~(1 << v))

    def hex(self) -> str:
        return format(self.bits, "x")

    def __eq__(self, other):
        return (
            isinstance(other, SpinConfig)
            and other.n == self.n
            and other.bits == self.bits
        )

    def __hash__(self):
        return hash((self.n, self.bits))

    def __repr__(self):
        return f"SpinConfig(n={self.n}, bits={self.bits:#x})"


def has_occupied_neighbor(g: Graph, bits: int, v: int) -> bool:
    return any((bits >> u) & 1 for u in g.adjacency[v])


def kcip_step(g: Graph, x: SpinConfig, draw: UpdateDraw, density: Density) -> SpinConfig:
    """Apply one KCIP update and return the resulting configuration.

    At most one vertex label changes per call; vertices without an occupied
    neighbor are frozen.
    """
    if x.n != g.n:
        raise InvalidParameterError(f"config length {x.n} != graph size {g.n}")
    g._check_vertex(draw.v)
    if not has_occupied_neighbor(g, x.bits, draw.v):
        return x
    new = 1 if draw.p <= density.p(g.n) else 0
    if new == x[draw.v]:
        return x
    return x.with_bit(draw.v, new)


def stationary_prob(g: Graph, x: SpinConfig, density: Density) -> float:
    """Stationary mass of x: p^|x| (1-p)^(n-|x|) / (1 - (1-p)^n), zero on the
    empty configuration (the law conditions on at least one particle)."""
    if x.n != g.n:
        raise InvalidParameterError(f"config length {x.n} != graph size {g.n}")
    k = x.occupied_count
    if k == 0:
        return 0.0
    n = g.n
    p = density.p(n)
    return p**k * (1 - p) ** (n - k) / (1.0 - (1 - p) ** n)


class Observer:
    """Hook receiving a trajectory as constant segments and transitions.

    Between flips the configuration is constant, so simulate() reports:

      on_segment(t_from, t_to, state)   X_t == state for t_from <= t <= t_to
      on_transition(t, v, p, old_bit, state)  the step at time t flipped
                                        vertex v; state is X_{t+1}
      finish(T, state)                  end of run, state is X_T

    Together these carry every (t, draw, x_t, x_{t+1}) with a changed label.
    Observers that truly need the no-op draws as well set
    needs_every_step = True and additionally receive
    on_step(t, v, p, state) for every t.  State objects passed in are live
    SpinConfigs; copy if retaining.
    """

    name = "observer"
    needs_every_step = False

    def on_segment(self, t_from: int, t_to: int, state: SpinConfig):
        pass

    def on_transition(self, t: int, v: int, p: float, old_bit: int, state: SpinConfig):
        pass

    def on_step(self, t: int, v: int, p: float, state: SpinConfig):
        pass

    def finish(self, T: int, state: SpinConfig):
        pass

    def summary(self):
        return {}


@dataclass
class TrajectoryRecord:
    """Outcome of a seeded run: deterministic given all inputs."""

    graph: str
    c: float
    seed: int | None
    steps: int
    final_state: SpinConfig
    observers: dict
    warnings: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "graph": self.graph,
                "c": self.c,
                "seed": self.seed,
                "T": self.steps,
                "generator": RNG_PROTOCOL,
                "final_state_hex": self.final_state.hex(),
                "observers": self.observers,
                "warnings": self.warnings,
            },
            sort_keys=True,
        )


def draw_blocks(rng, n: int, total: int, block: int = _BLOCK):
    """Yield (v_list, p_list) draw blocks.

    Per block the vertex draws are taken from the generator first, then the
    uniforms; this blockwise order is the documented RNG protocol
    (RNG_PROTOCOL) that fixes cross-run reproducibility for a given seed.
    """
    done = 0
    while done < total:
        b = min(block, total - done)
        vs = rng.integers(0, n, size=b).tolist()
        ps = rng.random(size=b).tolist()
        yield vs, ps
        done += b


def simulate(
    g: Graph,
    x0: SpinConfig,
    T: int,
    seed: int | None,
    density: Density,
    observers=(),
    draws=None,
) -> TrajectoryRecord:
    """Run T KCIP steps from x0 and return a TrajectoryRecord.

    The run is a deterministic function of (g, x0, T, seed, density,
    observers).  `draws` replaces the seeded stream with an explicit
    iterable of (v, p) pairs; used by tests to replay hand traces.
    """
    if T < 0:
        raise InvalidParameterError(f"T must be >= 0, got {T}")
    if x0.n != g.n:
        raise InvalidParameterError(f"config length {x0.n} != graph size {g.n}")
    run_warnings = []
    if x0.occupied_count == 0:
        msg = "all-zero initial configuration is absorbing; trajectory is constant"
        warnings.warn(msg)
        run_warnings.append(msg)

    observers = tuple(observers)
    every_step = tuple(ob for ob in observers if ob.needs_every_step)

    n = g.n
    adj = g.adjacency
    p_dens = density.p(n)
    state = SpinConfig(n, x0.bits)

    # occupied-neighbor counts make the constraint check O(1) per step
    nocc = [0] * n
    for v in range(n):
        if (state.bits >> v) & 1:
            for u in adj[v]:
                nocc[u] += 1

    if draws is None:
        rng = np.random.default_rng(seed)
        blocks = draw_blocks(rng, n, T)
    else:
        explicit = list(draws)
        if len(explicit) != T:
            raise InvalidParameterError(
                f"explicit draw list has {len(explicit)} entries, expected {T}"
            )
        blocks = [
            ([v for v, _ in explicit], [p for _, p in explicit])
        ] if T else []

    seg_start = 0
    t_base = 0
    bits = state.bits
    count = state.occupied_count
    for vs, ps in blocks:
        for i, v in enumerate(vs):
            t = t_base + i
            p = ps[i]
            if every_step:
                state.bits = bits
                state.occupied_count = count
                for ob in every_step:
                    ob.on_step(t, v, p, state)
            if not nocc[v]:
                continue
            old = (bits >> v) & 1
            new = 1 if p <= p_dens else 0
            if old == new:
                continue
            state.bits = bits
            state.occupied_count = count
            if observers:
                for ob in observers:
                    ob.on_segment(seg_start, t, state)
            bits ^= 1 << v
            delta = 1 if new else -1
            count += delta
            for u in adj[v]:
                nocc[u] += delta
            state.bits = bits
            state.occupied_count = count
            if observers:
                for ob in observers:
                    ob.on_transition(t, v, p, old, state)
            seg_start = t + 1
        t_base += len(vs)

    state.bits = bits
    state.occupied_count = count
    if observers and seg_start <= T:
        for ob in observers:
            ob.on_segment(seg_start, T, state)
    for ob in observers:
        ob.finish(T, state)

    return TrajectoryRecord(
        graph=g.spec_string(),
        c=density.c,
        seed=seed,
        steps=T,
        final_state=state,
        observers={ob.name: ob.summary() for ob in observers},
        warnings=run_warnings,
    )


class MinCountObserver(Observer):
    """Tracks the minimum occupied count seen along the run."""

    name = "min_count"

    def __init__(self):
        self.min_count = None

    def on_segment(self, t_from, t_to, state):
        c = state.occupied_count
        if self.min_count is None or c < self.min_count:
            self.min_count = c

    def summary(self):
        return {"min_count": self.min_count}


class VisitFrequencyObserver(Observer):
    """Occupation time per configuration, accumulated from segments.

    Counts X_t for 0 <= t < T (T steps); normalize() returns frequencies.
    Only feasible on small graphs: storage is one dict entry per visited
    configuration.
    """

    name = "visit_frequency"

    def __init__(self):
        self.counts = {}
        self._total = 0

    def on_segment(self, t_from, t_to, state):
        width = t_to - t_from + 1
        self.counts[state.bits] = self.counts.get(state.bits, 0) + width
        self._total += width

    def finish(self, T, state):
        # the final segment covered t = T which is X_T, not a step in [0, T)
        if self._total == T + 1:
            self.counts[state.bits] -= 1
            self._total -= 1

    def normalize(self):
        total = sum(self.counts.values())
        return {bits: c / total for bits, c in self.counts.items()}

    def summary(self):
        return {"visited_states": len(self.counts)}


class ParticleCountSampler(Observer):
    """Records V_t = occupied_count at the requested times."""

    name = "particle_count"

    def __init__(self, times):
        self.times = sorted(set(int(t) for t in times))
        self.samples = {}

    def on_segment(self, t_from, t_to, state):
        lo = bisect.bisect_left(self.times, t_from)
        hi = bisect.bisect_right(self.times, t_to)
        for t in self.times[lo:hi]:
            self.samples[t] = state.occupied_count

    def summary(self):
        return {"samples": {str(t): v for t, v in sorted(self.samples.items())}}
