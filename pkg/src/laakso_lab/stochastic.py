"""Continuous-time Markov chain realization of the diffusion on ``F_n``.

The chain generated by a :class:`~laakso_lab.operators.DiscreteOperator`
holds at node ``v`` for an exponential time of rate ``-L(v, v)`` and then
jumps to ``w`` with probability ``L(v, w) / -L(v, v)``.

Randomness is counter-based: the two uniforms used at step ``k`` of path
``p`` are a hash of ``(seed, p, k, lane)``.  Any partition of the paths into
batches or threads therefore produces identical trajectories.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericError
from .operators import DiscreteOperator

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
CHUNK = 1 << 15


def _splitmix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, path: np.ndarray, step: np.ndarray, lane: int) -> np.ndarray:
    """Uniforms in (0, 1) keyed by ``(seed, path, step, lane)``."""
    key = _splitmix(np.uint64(seed & _MASK64))
    z = _splitmix(key ^ np.asarray(path, dtype=np.uint64))
    with np.errstate(over="ignore"):
        z = _splitmix(z ^ (np.asarray(step, dtype=np.uint64) * np.uint64(2) + np.uint64(lane)))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("LAAKSO_LAB_THREADS", "1")))
    except ValueError:
        return 1


class JumpTable:
    """Holding rates and cumulative jump probabilities in padded dense form."""

    def __init__(self, op: DiscreteOperator):
        L = op.generator.tocsr()
        n = L.shape[0]
        rates = -L.diagonal()
        if np.any(rates <= 0):
            raise NumericError("absorbing node in generator (isolated node)")
        degree = np.diff(L.indptr) - 1
        D = int(degree.max())
        nbr = np.zeros((n, D), dtype=np.int64)
        cum = np.ones((n, D))
        for i in range(n):
            lo, hi = L.indptr[i], L.indptr[i + 1]
            cols = L.indices[lo:hi]
            vals = L.data[lo:hi]
            keep = cols != i
            cols, vals = cols[keep], vals[keep]
            nbr[i, : len(cols)] = cols
            nbr[i, len(cols):] = cols[-1]
            c = np.cumsum(vals / rates[i])
            c[-1] = 1.0
            cum[i, : len(cols)] = c
        self.rates = rates
        self.nbr = nbr
        self.cum = cum

    def jump(self, nodes: np.ndarray, u: np.ndarray) -> np.ndarray:
        slot = np.sum(self.cum[nodes] < u[:, None], axis=1)
        return self.nbr[nodes, np.minimum(slot, self.nbr.shape[1] - 1)]


def _table(op: DiscreteOperator) -> JumpTable:
    table = op.__dict__.get("_jump_table")
    if table is None:
        table = JumpTable(op)
        op.__dict__["_jump_table"] = table
    return table


@dataclass
class PathSample:
    seed: int
    path: int
    nodes: np.ndarray
    times: np.ndarray  # times[0] = 0, then strictly increasing jump times <= T
    T: float

    def position_at(self, t: float) -> int:
        if not 0 <= t <= self.T:
            raise DomainError(f"time {t} outside [0, {self.T}]")
        return int(self.nodes[np.searchsorted(self.times, t, side="right") - 1])


def _run_chunk(table: JumpTable, seed: int, start: np.ndarray, path_ids: np.ndarray, T: float,
               snapshots: np.ndarray, record: bool):
    P = len(path_ids)
    S = len(snapshots)
    snap = np.zeros((S, P), dtype=np.int64)
    idx = np.arange(P)
    node = start.copy()
    time = np.zeros(P)
    step = np.zeros(P, dtype=np.uint64)
    trail = [] if record else None
    while len(idx):
        hold = -np.log(counter_uniforms(seed, path_ids[idx], step[idx], 0)) / table.rates[node[idx]]
        nxt = time[idx] + hold
        for s in range(S):
            # each snapshot time lies in exactly one holding interval [time, nxt)
            inside = (time[idx] <= snapshots[s]) & (nxt > snapshots[s])
            snap[s, idx[inside]] = node[idx[inside]]
        moving = nxt <= T
        idx = idx[moving]
        if not len(idx):
            break
        new = table.jump(node[idx], counter_uniforms(seed, path_ids[idx], step[idx], 1))
        node[idx] = new
        time[idx] = nxt[moving]
        step[idx] += np.uint64(1)
        if record:
            trail.append((idx.copy(), new.copy(), time[idx].copy()))
    return snap, trail


def _chunks(N: int, threads: int) -> list[tuple[int, int]]:
    size = min(CHUNK, max(1, -(-N // threads)))
    return [(lo, min(N, lo + size)) for lo in range(0, N, size)]


def _starts(start: Union[int, Sequence[int]], N: int, n_nodes: int) -> np.ndarray:
    s = np.broadcast_to(np.asarray(start, dtype=np.int64), (N,)).copy()
    if np.any(s < 0) or np.any(s >= n_nodes):
        raise DomainError("start node outside the operator")
    return s


def sample_positions(op: DiscreteOperator, start: Union[int, Sequence[int]], times: Sequence[float], N: int,
                     seed: int, first_path: int = 0, threads: Optional[int] = None) -> np.ndarray:
    """Node occupied at each of ``times`` by ``N`` independent paths; shape ``(len(times), N)``."""
    times = np.asarray(sorted(times), dtype=float)
    if N < 1:
        raise DomainError("need at least one path")
    if len(times) and times[0] < 0:
        raise DomainError("times must be nonnegative")
    T = float(times[-1]) if len(times) else 0.0
    table = _table(op)
    starts = _starts(start, N, op.n_nodes)
    threads = threads or default_threads()
    ids = np.arange(first_path, first_path + N, dtype=np.uint64)

    def work(bounds):
        lo, hi = bounds
        return _run_chunk(table, seed, starts[lo:hi], ids[lo:hi], T, times, False)[0]

    chunks = _chunks(N, threads)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts, axis=1)


def simulate_paths(op: DiscreteOperator, start: Union[int, Sequence[int]], T: float, N: int, seed: int,
                   first_path: int = 0, threads: Optional[int] = None) -> list[PathSample]:
    """Exact CTMC trajectories on ``[0, T]``."""
    if not T > 0:
        raise DomainError("T must be positive")
    if N < 1:
        raise DomainError("need at least one path")
    table = _table(op)
    starts = _starts(start, N, op.n_nodes)
    threads = threads or default_threads()
    ids = np.arange(first_path, first_path + N, dtype=np.uint64)

    def work(bounds):
        lo, hi = bounds
        _, trail = _run_chunk(table, seed, starts[lo:hi], ids[lo:hi], T, np.zeros(0), True)
        nodes = [[int(s)] for s in starts[lo:hi]]
        jt = [[0.0] for _ in range(hi - lo)]
        for idx, new, tm in trail:
            for i, v, t in zip(idx.tolist(), new.tolist(), tm.tolist()):
                nodes[i].append(v)
                jt[i].append(t)
        return [PathSample(seed, int(ids[lo + i]), np.array(nodes[i]), np.array(jt[i]), float(T))
                for i in range(hi - lo)]

    chunks = _chunks(N, threads)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return [p for part in parts for p in part]


def estimate_expectation(samples: Union[Sequence[PathSample], np.ndarray], f: np.ndarray,
                         t: Optional[float] = None) -> tuple[float, float]:
    """Monte Carlo mean of ``f(X_t)`` and its standard error.

    ``samples`` is either a list of paths (then ``t`` is required) or the node
    array returned by :func:`sample_positions` for a single time.
    """
    if isinstance(samples, np.ndarray):
        nodes = samples
    else:
        if t is None:
            raise DomainError("a time is required for path samples")
        nodes = np.array([p.position_at(t) for p in samples])
    values = np.asarray(f, dtype=float)[nodes]
    N = len(values)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(N)) if N > 1 else 0.0
    return mean, se


@dataclass
class EmpiricalKernel:
    start: int
    time: float
    counts: dict[int, int]
    N: int

    def probability(self, node: int) -> float:
        return self.counts.get(node, 0) / self.N


def empirical_kernel(op: DiscreteOperator, start: int, t: float, N: int, seed: int,
                     first_path: int = 0) -> EmpiricalKernel:
    pos = sample_positions(op, start, [t], N, seed, first_path)[0]
    nodes, counts = np.unique(pos, return_counts=True)
    return EmpiricalKernel(int(start), float(t), {int(a): int(b) for a, b in zip(nodes, counts)}, N)


@dataclass
class HarmonicMeasure:
    absorbing: list[int]
    empirical: np.ndarray
    standard_error: np.ndarray
    exact: np.ndarray
    N: int

    def within(self, k: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.empirical - self.exact) <= k * self.standard_error + 1e-12))


def dirichlet_solve(op: DiscreteOperator, absorbing: Sequence[int]) -> np.ndarray:
    """Hitting probabilities ``u[:, b]``: ``L u = 0`` off ``absorbing``, ``u = 1_b`` on it."""
    absorbing = list(absorbing)
    n = op.n_nodes
    mask = np.ones(n, dtype=bool)
    mask[absorbing] = False
    free = np.flatnonzero(mask)
    K = op.stiffness.tocsr()
    Kff = K[free][:, free].tocsc()
    KfA = K[free][:, absorbing].toarray()
    u = np.zeros((n, len(absorbing)))
    u[absorbing, np.arange(len(absorbing))] = 1.0
    if len(free):
        u[free] = splu(Kff).solve(-KfA)
    return u


def harmonic_measure(op: DiscreteOperator, start: int, absorbing: Iterable[int], N: int, seed: int,
                     first_path: int = 0, max_steps: int = 10**7) -> HarmonicMeasure:
    """Empirical hitting distribution on ``absorbing`` plus the exact discrete solve."""
    absorbing = sorted(set(int(a) for a in absorbing))
    if not absorbing:
        raise DomainError("absorbing set must be nonempty")
    if start in absorbing:
        raise DomainError("start must not be absorbing")
    table = _table(op)
    is_abs = np.zeros(op.n_nodes, dtype=bool)
    is_abs[absorbing] = True
    slot = {a: k for k, a in enumerate(absorbing)}
    ids = np.arange(first_path, first_path + N, dtype=np.uint64)
    node = np.full(N, start, dtype=np.int64)
    step = np.zeros(N, dtype=np.uint64)
    idx = np.arange(N)
    for _ in range(max_steps):
        if not len(idx):
            break
        new = table.jump(node[idx], counter_uniforms(seed, ids[idx], step[idx], 1))
        node[idx] = new
        step[idx] += np.uint64(1)
        idx = idx[~is_abs[new]]
    else:
        raise NumericError("paths failed to reach the absorbing set")
    counts = np.zeros(len(absorbing))
    for a, c in zip(*np.unique(node, return_counts=True)):
        counts[slot[int(a)]] = c
    p = counts / N
    se = np.sqrt(p * (1 - p) / N)
    exact = dirichlet_solve(op, absorbing)[start]
    return HarmonicMeasure(absorbing, p, se, exact, N)


@dataclass
class SymmetryReport:
    time: float
    N: int
    seed: int
    rows: list[dict] = field(default_factory=list)

    @property
    def max_discrepancy(self) -> float:
        return max((r["discrepancy"] for r in self.rows), default=0.0)

    @property
    def ok(self) -> bool:
        return all(r["discrepancy"] <= r["bound"] for r in self.rows)


def empirical_symmetry_check(op: DiscreteOperator, t: float, pairs: Iterable[tuple[int, int]], N: int,
                             seed: int) -> SymmetryReport:
    """Compare ``m_x p_t(x, y)`` with ``m_y p_t(y, x)`` from occupation frequencies."""
    if not t > 0:
        raise DomainError("t must be positive")
    report = SymmetryReport(float(t), N, seed)
    for k, (x, y) in enumerate(pairs):
        if x == y:
            report.rows.append({"x": x, "y": y, "lhs": 0.0, "rhs": 0.0, "discrepancy": 0.0, "bound": 0.0})
            continue
        px = np.mean(sample_positions(op, x, [t], N, seed, first_path=2 * k * N)[0] == y)
        py = np.mean(sample_positions(op, y, [t], N, seed, first_path=(2 * k + 1) * N)[0] == x)
        lhs, rhs = op.mass[x] * px, op.mass[y] * py
        se = np.hypot(op.mass[x] * np.sqrt(px * (1 - px) / N), op.mass[y] * np.sqrt(py * (1 - py) / N))
        report.rows.append({"x": int(x), "y": int(y), "lhs": float(lhs), "rhs": float(rhs),
                            "discrepancy": float(abs(lhs - rhs)), "bound": float(3 * se)})
    return report


def paths_to_csv(paths: Sequence[PathSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "step", "node", "time"])
    for p in paths:
        for k, (v, t) in enumerate(zip(p.nodes, p.times)):
            w.writerow([p.path, k, int(v), repr(float(t))])
    return buf.getvalue()
