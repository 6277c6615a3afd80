"""Exact finite-chain analytics on enumerable state spaces.

States of the KCIP kernel are integer bitmasks 1..2^n-1; the all-zero
configuration is excluded because it is absorbing and unreachable from any
configuration with a particle, matching the conditioning in the stationary
law.  Kernels over other enumerations (exclusion chains, traces) reuse the
same TransitionKernel wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    HorizonError,
    InvalidParameterError,
    NumericError,
    SizeCapError,
)
from .graph import Graph
from .kcip import Density, Observer, SpinConfig

ROW_SUM_TOL = 1e-12
STATIONARY_RESIDUAL_TOL = 1e-10
TRACE_ROW_TOL = 1e-10
SPARSE_N_CAP = 20
DENSE_N_CAP = 12
DENSE_SOLVE_CAP = 4096
RESIDUAL_CLASS = "residual"


class StateSpace:
    """All nonzero configurations of {0,1}^n, indexed by bitmask - 1."""

    def __init__(self, g: Graph, n_cap: int = SPARSE_N_CAP):
        if g.n > n_cap:
            raise SizeCapError(f"state space 2^{g.n}-1 exceeds cap n <= {n_cap}")
        self.g = g
        self.n = g.n
        self.size = (1 << g.n) - 1
        self._classes = None

    def states(self):
        return range(1, self.size + 1)

    def index(self, bits: int) -> int:
        if not 1 <= bits <= self.size:
            raise InvalidParameterError(f"state {bits:#x} outside nonzero range")
        return bits - 1

    def config(self, idx: int) -> SpinConfig:
        return SpinConfig(self.n, idx + 1)

    def class_of(self, bits: int):
        """Partition label: k for the no-two-adjacent k-particle class
        Omega_k (1 <= k <= n//2), RESIDUAL_CLASS otherwise."""
        k = bin(bits).count("1")
        if k < 1 or k > self.n // 2:
            return RESIDUAL_CLASS
        for u, v in self.g.edges():
            if (bits >> u) & 1 and (bits >> v) & 1:
                return RESIDUAL_CLASS
        return k

    def class_labels(self):
        """Class label per state index, cached."""
        if self._classes is None:
            self._classes = [self.class_of(bits) for bits in self.states()]
        return self._classes

    def omega_indices(self, k: int):
        return [i for i, lab in enumerate(self.class_labels()) if lab == k]


class TransitionKernel:
    """Row-stochastic matrix over an enumerated state list."""

    def __init__(self, matrix, states, space=None):
        if sp.issparse(matrix):
            matrix = matrix.tocsr()
            data = matrix.data
            rows = np.asarray(matrix.sum(axis=1)).ravel()
        else:
            matrix = np.asarray(matrix, dtype=float)
            data = matrix
            rows = matrix.sum(axis=1)
        if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != len(states):
            raise InvalidParameterError("kernel must be square over the state list")
        if data.size and data.min() < -ROW_SUM_TOL:
            raise InvalidParameterError("kernel has a negative entry")
        bad = np.abs(rows - 1.0).max() if len(rows) else 0.0
        if bad > ROW_SUM_TOL:
            raise InvalidParameterError(f"row sums deviate from 1 by {bad:.3e}")
        self.P = matrix
        self.states = list(states)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.space = space
        self._stationary = None

    @property
    def n_states(self) -> int:
        return len(self.states)

    def dense(self) -> np.ndarray:
        if sp.issparse(self.P):
            if self.n_states > DENSE_SOLVE_CAP:
                raise SizeCapError(f"{self.n_states} states too large to densify")
            return self.P.toarray()
        return self.P

    def row_sums(self) -> np.ndarray:
        if sp.issparse(self.P):
            return np.asarray(self.P.sum(axis=1)).ravel()
        return self.P.sum(axis=1)

    def stationary(self) -> np.ndarray:
        if self._stationary is None:
            self._stationary = stationary_solve(self)
        return self._stationary

    def save_coo(self, path):
        """Write the kernel as "i j p" coordinate lines under a states= header."""
        coo = sp.coo_matrix(self.P)
        with open(path, "w") as fh:
            fh.write(f"states={self.n_states}\n")
            for i, j, p in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(p)!r}\n")


def save_vector_csv(path, vector, label="p"):
    """Write a probability vector as two CSV columns: index, value."""
    with open(path, "w", newline="") as fh:
        fh.write(f"index,{label}\n")
        for i, v in enumerate(vector):
            fh.write(f"{i},{float(v)!r}\n")


def load_vector_csv(path) -> np.ndarray:
    with open(path) as fh:
        fh.readline()
        return np.array([float(line.split(",")[1]) for line in fh if line.strip()])


def load_coo(path) -> TransitionKernel:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("states="):
            raise InvalidParameterError(f"missing states= header in {path!r}")
        n = int(header.split("=", 1)[1])
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, p = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(p))
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return TransitionKernel(mat, list(range(n)))


def build_kernel(g: Graph, density: Density, n_cap: int = SPARSE_N_CAP) -> TransitionKernel:
    """Exact KCIP kernel on the nonzero configurations.

    P(x, y) sums (1/n) times the per-vertex update law; the diagonal
    aggregates frozen-vertex mass and updates that rewrite a label to its
    current value.
    """
    space = StateSpace(g, n_cap=n_cap)
    n = g.n
    p = density.p(n)
    adj_masks = [sum(1 << u for u in g.adjacency[v]) for v in range(n)]
    rows, cols, vals = [], [], []
    for bits in space.states():
        i = bits - 1
        diag = 0.0
        for v in range(n):
            if not bits & adj_masks[v]:
                diag += 1.0 / n
                continue
            up = bits | (1 << v)
            down = bits & ~(1 << v)
            if up == bits:
                diag += p / n
            else:
                rows.append(i)
                cols.append(up - 1)
                vals.append(p / n)
            if down == bits:
                diag += (1 - p) / n
            else:
                rows.append(i)
                cols.append(down - 1)
                vals.append((1 - p) / n)
        rows.append(i)
        cols.append(i)
        vals.append(diag)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(space.size, space.size))
    if n <= DENSE_N_CAP:
        return TransitionKernel(mat.toarray(), list(space.states()), space=space)
    return TransitionKernel(mat, list(space.states()), space=space)


def stationary_solve(kernel: TransitionKernel, max_iter: int = 200000) -> np.ndarray:
    """Left fixed point of the kernel, validated to max-norm residual 1e-10."""
    N = kernel.n_states
    if N <= DENSE_SOLVE_CAP:
        P = kernel.dense()
        A = P.T - np.eye(N)
        A[-1, :] = 1.0
        b = np.zeros(N)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"stationary solve failed: {exc}") from exc
    else:
        pi = np.full(N, 1.0 / N)
        for _ in range(max_iter):
            nxt = pi @ kernel.P
            if np.abs(nxt - pi).max() < STATIONARY_RESIDUAL_TOL / 4:
                pi = nxt
                break
            pi = nxt
        pi = pi / pi.sum()
    residual = float(np.abs(pi @ kernel.P - pi).max())
    if residual > STATIONARY_RESIDUAL_TOL or pi.min() < -STATIONARY_RESIDUAL_TOL:
        raise NumericError(
            f"stationary residual {residual:.3e} exceeds {STATIONARY_RESIDUAL_TOL}",
            residual=residual,
        )
    return pi


def tv_distance(mu, nu) -> float:
    """Total variation distance, half the L1 norm of the difference."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise InvalidParameterError(f"length mismatch {mu.shape} vs {nu.shape}")
    return 0.5 * float(np.abs(mu - nu).sum())


@dataclass
class MixingScan:
    """Result of a worst-start TV scan: tau is the first t with d(t) < eps."""

    tau: int
    epsilon: float
    d: list


def mixing_profile(kernel: TransitionKernel, pi, epsilon: float, horizon: int = 1_000_000) -> MixingScan:
    """Least t with max_x TV(delta_x P^t, pi) < epsilon, scanning t = 0, 1, ...

    The worst-start distance d(t) is recorded per step and is checked to be
    nonincreasing.  Exceeding the horizon raises HorizonError carrying the
    last d(t).
    """
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    pi = np.asarray(pi, dtype=float)
    N = kernel.n_states
    P = kernel.dense()
    M = np.eye(N)
    d_curve = []
    prev = None
    for t in range(horizon + 1):
        d_t = float(0.5 * np.abs(M - pi[None, :]).sum(axis=1).max())
        if prev is not None and d_t > prev + 1e-12:
            raise NumericError(f"worst-start TV increased at t={t}: {prev} -> {d_t}")
        d_curve.append(d_t)
        prev = d_t
        if d_t < epsilon:
            return MixingScan(tau=t, epsilon=epsilon, d=d_curve)
        M = M @ P
    raise HorizonError(
        f"mixing scan exceeded horizon {horizon} with d(t) = {d_curve[-1]:.4f}",
        last_value=d_curve[-1],
    )


def trace_kernel(kernel: TransitionKernel, subset) -> TransitionKernel:
    """Trace of the chain on a subset A of state indices.

    K_A = P_AA + P_AB (I - P_BB)^{-1} P_BA.  A singular (I - P_BB) block
    signals an absorbing class inside the complement and raises
    NumericError.
    """
    A = sorted(set(subset))
    if not A:
        raise InvalidParameterError("trace subset must be nonempty")
    N = kernel.n_states
    if any(not 0 <= i < N for i in A):
        raise InvalidParameterError("trace subset index out of range")
    a_set = set(A)
    B = [i for i in range(N) if i not in a_set]
    states_A = [kernel.states[i] for i in A]
    if not B:
        return TransitionKernel(kernel.dense().copy(), states_A, space=kernel.space)
    if len(B) <= DENSE_SOLVE_CAP:
        P = kernel.dense()
        PAA = P[np.ix_(A, A)]
        PAB = P[np.ix_(A, B)]
        PBA = P[np.ix_(B, A)]
        PBB = P[np.ix_(B, B)]
        eye = np.eye(len(B))
        try:
            X = np.linalg.solve(eye - PBB, PBA)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                "singular (I - P_BB): complement contains an absorbing class"
            ) from exc
        K = PAA + PAB @ X
    else:
        P = kernel.P.tocsr()
        PAA = P[A][:, A].toarray()
        PAB = P[A][:, B].tocsr()
        PBA = P[B][:, A].tocsc()
        PBB = P[B][:, B].tocsc()
        eye = sp.identity(len(B), format="csc")
        lu = spla.splu(eye - PBB)
        X = np.column_stack(
            [lu.solve(np.asarray(PBA[:, j].todense()).ravel()) for j in range(len(A))]
        )
        K = PAA + PAB @ X
    rows = K.sum(axis=1)
    bad = float(np.abs(rows - 1.0).max())
    if bad > TRACE_ROW_TOL:
        raise NumericError(f"trace rows deviate from 1 by {bad:.3e}", residual=bad)
    K = K / rows[:, None]  # remove residual float drift before validation
    return TransitionKernel(K, states_A, space=kernel.space)


def occupation_counters(classes, labels=None):
    """Visit times and cumulative counts per class over a label sequence.

    `classes[t]` is the partition label of X_t for t = 0..T.  For each label
    k the result holds eta_k, the increasing times t >= 1 with X_t in the
    class, and kappa_k = len(eta_k), the occupation count over 1 <= t <= T.
    """
    if labels is None:
        labels = sorted(set(classes), key=str)
    out = {k: {"eta": [], "kappa": 0} for k in labels}
    for t, lab in enumerate(classes):
        if t == 0:
            continue
        if lab in out:
            out[lab]["eta"].append(t)
            out[lab]["kappa"] += 1
    return out


def hitting_summary(classes, k):
    """Exit-length samples and first entry time for class k.

    An episode starts when the sequence is in class k (at t = 0 or on
    re-entry after the previous episode closed) and ends at the first later
    time lying in a different non-residual class j != k; its length is the
    elapsed time.  rho is the first time the sequence is in class k.
    Episodes cut off by the end of the sequence are reported censored.
    """
    rho = None
    samples = []
    episode_start = None
    for t, lab in enumerate(classes):
        if rho is None and lab == k:
            rho = t
        if episode_start is None:
            if lab == k:
                episode_start = t
        else:
            if lab != k and lab != RESIDUAL_CLASS:
                samples.append({"start": episode_start, "length": t - episode_start, "censored": False})
                episode_start = None
    if episode_start is not None:
        samples.append(
            {
                "start": episode_start,
                "length": len(classes) - 1 - episode_start,
                "censored": True,
            }
        )
    return {"rho": rho, "samples": samples}


class ClassSequenceObserver(Observer):
    """Collects the partition label of X_t for every t of a run."""

    name = "class_sequence"

    def __init__(self, space: StateSpace):
        self.space = space
        self.classes = []

    def on_segment(self, t_from, t_to, state):
        lab = self.space.class_of(state.bits)
        self.classes.extend([lab] * (t_to - t_from + 1))

    def counters(self):
        return occupation_counters(self.classes)

    def summary(self):
        kappa = {}
        for t, lab in enumerate(self.classes):
            if t >= 1:
                kappa[str(lab)] = kappa.get(str(lab), 0) + 1
        return {"kappa": kappa, "T": max(len(self.classes) - 1, 0)}


def functional_forms(kernel: TransitionKernel, pi, f):
    """L2 norm squared, variance, Dirichlet form and entropy form of f."""
    pi = np.asarray(pi, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.n_states,):
        raise InvalidParameterError("f must be a vector over the state space")
    l2 = float(np.sum(f**2 * pi))
    mean = float(np.sum(f * pi))
    variance = float(np.sum((f - mean) ** 2 * pi))
    coo = sp.coo_matrix(kernel.P)
    diff2 = (f[coo.row] - f[coo.col]) ** 2
    dirichlet = 0.5 * float(np.sum(diff2 * coo.data * pi[coo.row]))
    if l2 == 0.0:
        raise InvalidParameterError("entropy form undefined for identically-zero f")
    f2 = f**2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(f2 > 0, f2 * np.log(f2 / l2), 0.0)
    entropy = float(np.sum(terms * pi))
    return l2, variance, dirichlet, entropy


def _check_reversible(P, pi, tol=1e-9):
    flow = pi[:, None] * P
    return float(np.abs(flow - flow.T).max()) <= tol


def spectral_gap(kernel: TransitionKernel, pi=None) -> float:
    """1 minus the second-largest eigenvalue of the symmetrized kernel.

    Requires reversibility; the symmetrization D^{1/2} P D^{-1/2} then has a
    real spectrum.
    """
    P = kernel.dense()
    pi = kernel.stationary() if pi is None else np.asarray(pi, dtype=float)
    if not _check_reversible(P, pi):
        raise InvalidParameterError("spectral_gap requires a reversible kernel")
    root = np.sqrt(pi)
    S = (root[:, None] * P) / root[None, :]
    eigs = np.linalg.eigvalsh((S + S.T) / 2)
    return float(1.0 - eigs[-2]) if len(eigs) > 1 else 1.0


@dataclass
class LogSobolevEstimate:
    """Upper-bound estimate of the log-Sobolev constant.

    alpha is the smallest Rayleigh-type ratio found by multi-start descent;
    the true constant is <= alpha.  converged reports whether any start hit
    the optimizer's own tolerance.
    """

    alpha: float
    converged: bool
    starts: int


def log_sobolev_estimate(
    kernel: TransitionKernel,
    pi=None,
    tolerance: float = 1e-8,
    starts: int = 32,
    seed: int = 0,
    state_cap: int = 64,
) -> LogSobolevEstimate:
    """Minimize Dirichlet(f)/Entropy(f) over f by multi-start local descent."""
    from scipy.optimize import minimize

    if kernel.n_states > state_cap:
        raise SizeCapError(f"{kernel.n_states} states exceeds log-Sobolev cap {state_cap}")
    P = kernel.dense()
    pi = kernel.stationary() if pi is None else np.asarray(pi, dtype=float)
    if not _check_reversible(P, pi):
        raise InvalidParameterError("log-Sobolev estimate requires a reversible kernel")

    def ratio(f):
        f = np.asarray(f, dtype=float)
        norm = math.sqrt(float(np.sum(f**2 * pi)))
        if norm < 1e-300:
            return np.inf
        f = f / norm
        mean = float(np.sum(f * pi))
        g = f - mean
        var = float(np.sum(g**2 * pi))
        if var < 1e-8:
            # near-constant f: both forms vanish quadratically and the
            # direct quotient drowns in float noise, so evaluate the limit
            # E(g,g) / (2 Var(g)) along the direction g instead; it upper
            # bounds the infimum because it is a limit of true ratios
            if var < 1e-24:
                return np.inf
            _, _, dirichlet_g, _ = functional_forms(kernel, pi, g)
            return dirichlet_g / (2.0 * var)
        _, _, dirichlet, entropy = functional_forms(kernel, pi, f)
        if entropy < 1e-14:
            return np.inf
        return dirichlet / entropy

    rng = np.random.default_rng(seed)
    best = np.inf
    converged = False
    for _ in range(starts):
        f0 = rng.normal(size=kernel.n_states)
        res = minimize(ratio, f0, method="Nelder-Mead",
                       options={"xatol": tolerance, "fatol": tolerance, "maxiter": 20000})
        if np.isfinite(res.fun) and res.fun < best:
            best = float(res.fun)
            converged = converged or bool(res.success)
    if not np.isfinite(best):
        raise NumericError("log-Sobolev minimization found no valid ratio")
    return LogSobolevEstimate(alpha=best, converged=converged, starts=starts)


def ensemble_distribution(
    g: Graph,
    x0: SpinConfig,
    density: Density,
    times,
    reps: int,
    seed: int,
    n_cap: int = 16,
):
    """Empirical state distribution of many independent replicas.

    Simulates `reps` chains simultaneously with a tabulated one-step map
    (feasible for n <= n_cap) and returns {t: probability vector indexed by
    StateSpace order} at each requested time.
    """
    if g.n > n_cap:
        raise SizeCapError(f"ensemble table needs n <= {n_cap}, got {g.n}")
    times = sorted(set(int(t) for t in times))
    if times and times[0] < 0:
        raise InvalidParameterError("times must be nonnegative")
    n = g.n
    p = density.p(n)
    size = 1 << n
    adj_masks = np.array([sum(1 << u for u in g.adjacency[v]) for v in range(n)], dtype=np.int64)
    s_grid = np.arange(size, dtype=np.int64)[:, None]
    constrained = (s_grid & adj_masks[None, :]) != 0
    flip_up = s_grid | (np.int64(1) << np.arange(n, dtype=np.int64))[None, :]
    flip_dn = s_grid & ~(np.int64(1) << np.arange(n, dtype=np.int64))[None, :]
    table = np.stack(
        [np.where(constrained, flip_dn, s_grid), np.where(constrained, flip_up, s_grid)],
        axis=2,
    )

    rng = np.random.default_rng(seed)
    state = np.full(reps, x0.bits, dtype=np.int64)
    out = {}
    t_now = 0
    for t_target in times:
        while t_now < t_target:
            v = rng.integers(0, n, size=reps)
            ind = (rng.random(reps) <= p).astype(np.int64)
            state = table[state, v, ind]
            t_now += 1
        counts = np.bincount(state, minlength=size)[1:]
        out[t_target] = counts / reps
    return out
