"""kcip-lab: config-driven experiment runner.

Every experiment writes one schema-1 CSV under --out whose body is a
deterministic function of the resolved configuration; per-replicate seeds
are seed + replicate_index, so any worker count yields the same aggregate.
Exit codes: 0 success, 2 config error, 3 size-cap error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    InvalidParameterError,
    InvalidStateError,
    KcipLabError,
    NumericError,
    SizeCapError,
)
from .graph import Graph, parse_graph_spec
from .kcip import (
    Density,
    ParticleCountSampler,
    RNG_PROTOCOL,
    SpinConfig,
    VisitFrequencyObserver,
    simulate,
    stationary_prob,
)
from .components import CollisionObserver, corrected_count_exact, corrected_count_mc
from .exact_analysis import (
    ClassSequenceObserver,
    RESIDUAL_CLASS,
    StateSpace,
    build_kernel,
    mixing_profile,
    stationary_solve,
    trace_kernel,
    tv_distance,
)
from .reference_chains import (
    CoalescenceState,
    mh_sep_kernel,
    run_coalescence,
    sep_kernel,
    triple_time_asymptote,
    triple_time_exact,
    triple_time_for_graph,
    triple_time_mc,
)
from .reportio import config_hash, write_report

KINDS = (
    "stationarity",
    "mixing-scan",
    "triple-scaling",
    "drift-curve",
    "occupation",
    "collisions",
    "coalescence-meeting",
    "corrected-count",
    "trace-check",
    "sep-check",
)

TOOL = f"kcip-lab/{__version__}"


@dataclass
class ExperimentConfig:
    kind: str
    graph: str = "torus:L=4,d=1"
    c: float = 1.0
    seed: int = 0
    reps: int = 10
    horizon: int | None = None
    k_max: int = 3
    out: str = "."
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.k_max < 1:
            raise ConfigError(f"k_max must be >= 1, got {self.k_max}")
        return self

    def resolved(self) -> dict:
        pairs = {
            "kind": self.kind,
            "graph": self.graph,
            "c": self.c,
            "seed": self.seed,
            "reps": self.reps,
            "horizon": self.horizon,
            "k_max": self.k_max,
            "workers": self.workers,
        }
        pairs.update(self.extra)
        return pairs

    def metadata(self) -> dict:
        pairs = self.resolved()
        meta = {
            "tool": TOOL,
            "kind": self.kind,
            "config_hash": config_hash({k: str(v) for k, v in pairs.items()}),
            "seed": self.seed,
            "generator": RNG_PROTOCOL,
        }
        for key, value in pairs.items():
            if key not in ("kind", "seed") and value is not None:
                meta[key] = value
        return meta


def load_config_file(path: str) -> dict:
    """Flat key=value lines; a [experiment] section header and # comments
    are allowed and ignored."""
    pairs = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        pairs[key.strip().replace("-", "_")] = value.strip()
    return pairs


_INT_KEYS = {"seed", "reps", "horizon", "k_max", "workers", "samples", "m",
             "cases", "h_size", "mc_reps", "k", "near_distance"}
_FLOAT_KEYS = {"c", "epsilon", "q"}


def _coerce(key, value):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def build_config(args) -> ExperimentConfig:
    pairs = {}
    if args.config:
        pairs.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        pairs[key] = value
    cfg = ExperimentConfig(kind=pairs.pop("kind"))
    for key, value in pairs.items():
        value = _coerce(key, value) if isinstance(value, str) else value
        if hasattr(cfg, key) and key != "extra":
            setattr(cfg, key, value)
        else:
            cfg.extra[key] = value
    return cfg.validate()


def _graph(cfg) -> Graph:
    try:
        return parse_graph_spec(cfg.graph)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _out_path(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{cfg.kind}.csv"


def _parallel_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _parse_vertices(text) -> list:
    try:
        return [int(tok) for tok in str(text).split(",") if tok != ""]
    except ValueError as exc:
        raise ConfigError(f"bad vertex list {text!r}") from exc


# ---------------------------------------------------------------------------
# experiments

def run_stationarity(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    density = Density(cfg.c)
    kernel = build_kernel(g, density)
    pi = stationary_solve(kernel)
    T = cfg.horizon if cfg.horizon is not None else 200_000
    obs = VisitFrequencyObserver()
    simulate(g, SpinConfig(g.n, 1), T, cfg.seed, density, observers=[obs])
    freq = obs.normalize()
    rows = []
    empirical = np.zeros(kernel.n_states)
    for i, bits in enumerate(kernel.states):
        empirical[i] = freq.get(bits, 0.0)
        exact = stationary_prob(g, SpinConfig(g.n, bits), density)
        rows.append((format(bits, "x"), exact, empirical[i]))
    meta = cfg.metadata()
    meta["T"] = T
    meta["tv_empirical_vs_exact"] = tv_distance(pi, empirical)
    path = _out_path(cfg)
    write_report(path, meta, ("state_hex", "exact_pi", "empirical_freq"), rows)
    return path


def run_mixing_scan(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    density = Density(cfg.c)
    epsilon = float(cfg.extra.get("epsilon", 0.25))
    horizon = cfg.horizon if cfg.horizon is not None else 100_000
    kernel = build_kernel(g, density)
    pi = stationary_solve(kernel)
    scan = mixing_profile(kernel, pi, epsilon, horizon=horizon)
    meta = cfg.metadata()
    meta["epsilon"] = epsilon
    meta["tau"] = scan.tau
    rows = [(t, d) for t, d in enumerate(scan.d)]
    path = _out_path(cfg)
    write_report(path, meta, ("t", "d_t"), rows)
    return path


def run_triple_scaling(cfg: ExperimentConfig) -> Path:
    m = int(cfg.extra.get("m", 2))
    grid = _parse_vertices(cfg.extra.get("n_grid", "100,1000,10000,100000"))
    if not grid:
        raise ConfigError("n_grid must list at least one n")
    rows = []
    for n in grid:
        e1, _ = triple_time_exact(n, cfg.c, m)
        rows.append((n, e1, triple_time_asymptote(n, cfg.c, m)))
    logs = np.log([r[0] for r in rows])
    vals = np.log([r[1] for r in rows])
    slope = float(np.polyfit(logs, vals, 1)[0]) if len(rows) > 1 else math.nan
    meta = cfg.metadata()
    meta["m"] = m
    meta["n_grid"] = ",".join(str(n) for n in grid)
    meta["loglog_slope"] = slope
    path = _out_path(cfg)
    write_report(path, meta, ("n", "zeta_exact", "asymptote"), rows)

    mc_reps = int(cfg.extra.get("mc_reps", 0))
    if mc_reps > 0:
        # per-run triple-time samples on the configured graph, checked
        # against the gated exact solver
        g = _graph(cfg)
        e1, _, m_graph = triple_time_for_graph(g, cfg.c)
        horizon = cfg.horizon if cfg.horizon is not None else max(1000, 200 * g.n**3)
        _, _, samples = triple_time_mc(g, cfg.c, cfg.seed, mc_reps, horizon=horizon)
        mc_rows = [
            (rep, cfg.seed + rep, s, 0 if s is not None else 1)
            for rep, s in enumerate(samples)
        ]
        mc_meta = cfg.metadata()
        mc_meta["m"] = m_graph
        mc_meta["zeta_exact"] = e1
        mc_meta["horizon_steps"] = horizon
        write_report(
            Path(cfg.out) / "triple-mc.csv",
            mc_meta,
            ("run_id", "seed", "zeta_triple", "censored"),
            mc_rows,
        )
    return path


def _drift_job(job):
    graph_spec, c, seed, rep, T, times = job
    g = parse_graph_spec(graph_spec)
    sampler = ParticleCountSampler(times)
    x0 = SpinConfig(g.n, (1 << g.n) - 1)
    simulate(g, x0, T, seed + rep, Density(c), observers=[sampler])
    return [sampler.samples[t] for t in sampler.times]


def run_drift_curve(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    T = cfg.horizon if cfg.horizon is not None else 20 * g.n**3
    n_samples = int(cfg.extra.get("samples", 50))
    times = sorted({int(round(t)) for t in np.linspace(0, T, n_samples)})
    jobs = [(cfg.graph, cfg.c, cfg.seed, rep, T, times) for rep in range(cfg.reps)]
    results = np.array(_parallel_map(_drift_job, jobs, cfg.workers), dtype=float)
    mean = results.mean(axis=0)
    stderr = (
        results.std(axis=0, ddof=1) / math.sqrt(cfg.reps)
        if cfg.reps > 1
        else np.zeros_like(mean)
    )
    meta = cfg.metadata()
    meta["T"] = T
    meta["start"] = "all-ones"
    rows = [(t, mean[i], stderr[i]) for i, t in enumerate(times)]
    path = _out_path(cfg)
    write_report(path, meta, ("t", "mean_v", "stderr"), rows)
    return path


def _occupation_job(job):
    graph_spec, c, seed, rep, T = job
    g = parse_graph_spec(graph_spec)
    space = StateSpace(g)
    obs = ClassSequenceObserver(space)
    simulate(g, SpinConfig(g.n, 1), T, seed + rep, Density(c), observers=[obs])
    return obs.summary()["kappa"]


def run_occupation(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    T = cfg.horizon if cfg.horizon is not None else 100_000
    jobs = [(cfg.graph, cfg.c, cfg.seed, rep, T) for rep in range(cfg.reps)]
    kappas = _parallel_map(_occupation_job, jobs, cfg.workers)
    classes = [str(k) for k in range(1, cfg.k_max + 1)] + [RESIDUAL_CLASS]
    rows = []
    for rep, kappa in enumerate(kappas):
        folded = {label: 0 for label in classes}
        for label, count in kappa.items():
            folded[label if label in folded else RESIDUAL_CLASS] += count
        for label in classes:
            rows.append((rep, label, folded[label], folded[label] / T))
    meta = cfg.metadata()
    meta["T"] = T
    path = _out_path(cfg)
    write_report(path, meta, ("replicate", "class", "kappa", "fraction"), rows)
    return path


def _collisions_job(job):
    graph_spec, c, seed, rep, T, start = job
    g = parse_graph_spec(graph_spec)
    if start == "ones":
        x0 = SpinConfig(g.n, (1 << g.n) - 1)
    elif start == "single":
        x0 = SpinConfig(g.n, 1)
    else:
        x0 = SpinConfig.from_occupied(g.n, _parse_vertices(start))
    obs = CollisionObserver(g, x0)
    simulate(g, x0, T, seed + rep, Density(c), observers=[obs])
    out = obs.summary()
    return (
        rep,
        seed + rep,
        out["count"],
        max(out["max_sizes"], default=0),
        out["times"][0] if out["times"] else None,
    )


def run_collisions(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    T = cfg.horizon if cfg.horizon is not None else 50 * g.n**2
    start = str(cfg.extra.get("start", "ones"))
    jobs = [(cfg.graph, cfg.c, cfg.seed, rep, T, start) for rep in range(cfg.reps)]
    results = _parallel_map(_collisions_job, jobs, cfg.workers)
    rows = [
        (rep, s, count, max_size, first if first is not None else None,
         0 if first is not None else 1)
        for rep, s, count, max_size, first in results
    ]
    meta = cfg.metadata()
    meta["T"] = T
    meta["start"] = start
    path = _out_path(cfg)
    write_report(
        path,
        meta,
        ("run_id", "seed", "collisions", "max_colM", "first_collision", "censored"),
        rows,
    )
    return path


def _coalescence_job(job):
    graph_spec, seed, rep, horizon, positions, q, near = job
    g = parse_graph_spec(graph_spec)
    state = CoalescenceState(g, positions, q)
    run = run_coalescence(
        g, state, horizon, seed + rep,
        near_distances=(near,) if near else (),
        stop_at_collision=True,
    )
    tau_near = run.near_times.get(near) if near else None
    return (rep, seed + rep, run.collision_time, tau_near)


def run_coalescence_meeting(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    positions = _parse_vertices(cfg.extra.get("particles", "0," + str(g.n // 2)))
    if len(positions) < 2:
        raise ConfigError("coalescence-meeting needs at least two particles")
    q = float(cfg.extra.get("q", 1.0 / (2 * len(positions))))
    near = int(cfg.extra["near_distance"]) if "near_distance" in cfg.extra else None
    horizon = cfg.horizon if cfg.horizon is not None else 400 * g.n**2
    jobs = [
        (cfg.graph, cfg.seed, rep, horizon, tuple(positions), q, near)
        for rep in range(cfg.reps)
    ]
    results = _parallel_map(_coalescence_job, jobs, cfg.workers)
    rows = []
    for rep, s, tau_col, tau_near in results:
        rows.append(
            (
                rep,
                s,
                tau_col,
                0 if tau_col is not None else 1,
                tau_near,
                0 if tau_near is not None else 1,
            )
        )
    meta = cfg.metadata()
    meta["q"] = q
    meta["particles"] = ",".join(str(v) for v in positions)
    meta["horizon_steps"] = horizon
    path = _out_path(cfg)
    write_report(
        path,
        meta,
        ("run_id", "seed", "tau_col", "tau_col_censored", "tau_near", "tau_near_censored"),
        rows,
    )
    return path


def _random_connected_set(g: Graph, size: int, rng) -> list:
    v = int(rng.integers(0, g.n))
    chosen = [v]
    chosen_set = {v}
    while len(chosen) < size:
        frontier = sorted(
            {u for w in chosen for u in g.adjacency[w] if u not in chosen_set}
        )
        if not frontier:
            break
        u = frontier[int(rng.integers(0, len(frontier)))]
        chosen.append(u)
        chosen_set.add(u)
    return chosen


def run_corrected_count(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    mc_reps = int(cfg.extra.get("mc_reps", 2000))
    rng = np.random.default_rng(cfg.seed)
    cases = []
    if "h_set" in cfg.extra:
        cases.append(("given", _parse_vertices(cfg.extra["h_set"])))
    else:
        n_cases = int(cfg.extra.get("cases", 10))
        h_size = int(cfg.extra.get("h_size", 6))
        for i in range(n_cases):
            cases.append((f"random{i}", _random_connected_set(g, h_size, rng)))
    rows = []
    for label, H in cases:
        exact = corrected_count_exact(g, H)
        mean, stderr = corrected_count_mc(g, H, mc_reps, cfg.seed + len(rows) + 1)
        rows.append(
            (
                label,
                len(H),
                ";".join(str(v) for v in H),
                f"{exact.numerator}/{exact.denominator}",
                float(exact),
                mean,
                stderr,
                mc_reps,
            )
        )
    meta = cfg.metadata()
    path = _out_path(cfg)
    write_report(
        path,
        meta,
        ("case", "size", "vertices", "exact_fraction", "exact", "mc_mean", "mc_stderr", "mc_reps"),
        rows,
    )
    return path


def run_trace_check(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    k = int(cfg.extra.get("k", 2))
    kernel = build_kernel(g, Density(cfg.c))
    subset = kernel.space.omega_indices(k)
    if not subset:
        raise ConfigError(f"Omega_{k} is empty on {cfg.graph}")
    traced = trace_kernel(kernel, subset)
    pi = stationary_solve(traced)
    uniform = np.full(traced.n_states, 1.0 / traced.n_states)
    rows = [
        ("states", float(traced.n_states)),
        ("row_sum_max_dev", float(np.abs(traced.row_sums() - 1.0).max())),
        ("stationary_max_dev_uniform", float(np.abs(pi - uniform).max())),
    ]
    meta = cfg.metadata()
    meta["k"] = k
    path = _out_path(cfg)
    write_report(path, meta, ("metric", "value"), rows)
    return path


def run_sep_check(cfg: ExperimentConfig) -> Path:
    g = _graph(cfg)
    k = int(cfg.extra.get("k", 2))
    if math.comb(g.n, k) > 20000:
        raise SizeCapError(f"C({g.n},{k}) subsets exceed the sep-check cap")
    rows = []
    for name, kernel in (("sep", sep_kernel(g, k)), ("mh-sep", mh_sep_kernel(g, k))):
        pi = stationary_solve(kernel)
        uniform = np.full(kernel.n_states, 1.0 / kernel.n_states)
        rows.append(
            (name, kernel.n_states, float(np.abs(pi - uniform).max()))
        )
    meta = cfg.metadata()
    meta["k"] = k
    path = _out_path(cfg)
    write_report(path, meta, ("chain", "states", "stationary_max_dev_uniform"), rows)
    return path


RUNNERS = {
    "stationarity": run_stationarity,
    "mixing-scan": run_mixing_scan,
    "triple-scaling": run_triple_scaling,
    "drift-curve": run_drift_curve,
    "occupation": run_occupation,
    "collisions": run_collisions,
    "coalescence-meeting": run_coalescence_meeting,
    "corrected-count": run_corrected_count,
    "trace-check": run_trace_check,
    "sep-check": run_sep_check,
}


def run(cfg: ExperimentConfig) -> Path:
    """Run one experiment and return the path of its report file."""
    return RUNNERS[cfg.kind](cfg)


def _add_common(parser):
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--graph", help="torus:L=4,d=3 or edges:<path>")
    parser.add_argument("--c", type=float, help="density constant, p = c/n")
    parser.add_argument("--seed", type=int, help="base seed; replicate r uses seed+r")
    parser.add_argument("--reps", type=int, help="number of replicates")
    parser.add_argument("--horizon", type=int, help="steps per trajectory / scan cap")
    parser.add_argument("--k-max", dest="k_max", type=int, help="largest tracked class")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel worker count")


def make_parser():
    parser = argparse.ArgumentParser(prog="kcip-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=TOOL)
    sub = parser.add_subparsers(dest="kind", required=True)
    specific = {
        "mixing-scan": [("--epsilon", float, "TV threshold (default 0.25)")],
        "triple-scaling": [
            ("--n-grid", str, "comma-separated n values"),
            ("--m", int, "regular degree m > 1"),
            ("--mc-reps", int, "also sample zeta_triple on --graph this many times"),
        ],
        "drift-curve": [("--samples", int, "number of sample times")],
        "collisions": [("--start", str, "ones | single | comma-separated vertices")],
        "coalescence-meeting": [
            ("--particles", str, "comma-separated start vertices"),
            ("--q", float, "moving rate, q <= 1/k"),
            ("--near-distance", int, "also record tau_near at this distance"),
        ],
        "corrected-count": [
            ("--h-set", str, "comma-separated vertex set H"),
            ("--cases", int, "number of random H cases"),
            ("--h-size", int, "size of random H"),
            ("--mc-reps", int, "Monte Carlo repetitions per case"),
        ],
        "trace-check": [("--k", int, "particle class k")],
        "sep-check": [("--k", int, "particle count k")],
    }
    for kind in KINDS:
        sp = sub.add_parser(kind)
        _add_common(sp)
        for flag, typ, help_text in specific.get(kind, []):
            sp.add_argument(flag, type=typ, help=help_text, dest=flag[2:].replace("-", "_"))
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        path = run(cfg)
    except (ConfigError, InvalidParameterError, InvalidStateError) as exc:
        print(f"kcip-lab: config error: {exc}", file=sys.stderr)
        return 2
    except SizeCapError as exc:
        print(f"kcip-lab: size cap: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"kcip-lab: numeric error: {exc}", file=sys.stderr)
        return 4
    except KcipLabError as exc:
        print(f"kcip-lab: error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
