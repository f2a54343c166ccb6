"""Geodesic distance, metric balls, and dimension/Poincaré diagnostics on ``F_n``.

Vertex-to-vertex distances come from single-source shortest paths.  When
all edges share one length (true for every level graph) the search runs on
hop counts and distances are exact rationals.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import _poly
from ._rational import Number, format_rational
from .construction import ContractionParams
from .errors import DomainError
from .funcspace import PiecewiseFunction, pullback_function, random_function
from .graph import GraphPoint, QuantumGraph, build_graph, build_projection

SLACK = 1e-12


class _Geodesics:
    """Cached single-source searches over the vertex graph."""

    def __init__(self, graph: QuantumGraph):
        self.graph = graph
        n = len(graph.vertices)
        self.unit = graph.edge_length
        rows = [e.lo for e in graph.edges] + [e.hi for e in graph.edges]
        cols = [e.hi for e in graph.edges] + [e.lo for e in graph.edges]
        if self.unit is not None:
            w = np.ones(2 * len(graph.edges))
        else:
            w = np.array([float(e.length) for e in graph.edges] * 2)
        # duplicates (parallel edges) are summed by csr_matrix; keep the minimum instead
        best: dict[tuple[int, int], float] = {}
        for r, c, x in zip(rows, cols, w):
            best[(r, c)] = min(x, best.get((r, c), np.inf))
        keys = list(best)
        self.adj = csr_matrix(([best[k] for k in keys], ([k[0] for k in keys], [k[1] for k in keys])), shape=(n, n))
        self._rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def search(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        row = self._rows.get(v)
        if row is None:
            dist, pred = dijkstra(self.adj, directed=False, indices=v, return_predecessors=True)
            row = (dist, pred)
            self._rows[v] = row
        return row

    def distances(self, v: int) -> list[Number]:
        """Exact (when possible) distances from vertex ``v`` to every vertex."""
        dist = self.search(v)[0]
        if self.unit is not None:
            return [self.unit * int(d) for d in dist]
        return dist.tolist()

    def float_distances(self, v: int) -> np.ndarray:
        dist = self.search(v)[0]
        return dist * float(self.unit) if self.unit is not None else dist

    def vertex_path(self, u: int, v: int) -> list[int]:
        pred = self.search(u)[1]
        path = [v]
        while path[-1] != u:
            path.append(int(pred[path[-1]]))
        return path[::-1]

    @cached_property
    def diameter(self) -> Number:
        g = self.graph
        lo = np.array([e.lo for e in g.edges])
        hi = np.array([e.hi for e in g.edges])
        if self.unit is not None:
            # hop counts are integers, so the maximum is found exactly before scaling
            best = 0
            for v in range(len(g.vertices)):
                d = self.search(v)[0].astype(np.int64)
                best = max(best, int(np.max(d[lo] + d[hi])) + 1)
            return self.unit * Fraction(best, 2)
        L = np.array([float(e.length) for e in g.edges])
        return max(float(np.max(self.search(v)[0][lo] + self.search(v)[0][hi] + L)) / 2
                   for v in range(len(g.vertices)))


def _geo(graph: QuantumGraph) -> _Geodesics:
    geo = graph.__dict__.get("_geodesics")
    if geo is None:
        geo = _Geodesics(graph)
        graph.__dict__["_geodesics"] = geo
    return geo


def diameter(graph: QuantumGraph) -> Number:
    """Largest distance from a vertex to any point of the graph.

    The farthest point of an edge whose ends lie at distances ``d1, d2`` is at
    distance ``(d1 + d2 + L) / 2``.
    The point-to-point diameter lies between this value and this value plus
    half an edge length.
    """
    return _geo(graph).diameter


def _point_distances(graph: QuantumGraph, p: GraphPoint) -> list[Number]:
    """Distances from ``p`` to every vertex."""
    graph.check_point(p)
    geo = _geo(graph)
    e = graph.edges[p.edge]
    d_lo = geo.distances(e.lo)
    d_hi = geo.distances(e.hi)
    a, b = p.offset, e.length - p.offset
    return [min(a + x, b + y) for x, y in zip(d_lo, d_hi)]


def _float_point_distances(graph: QuantumGraph, p: GraphPoint) -> np.ndarray:
    geo = _geo(graph)
    e = graph.edges[p.edge]
    a = float(p.offset)
    return np.minimum(a + geo.float_distances(e.lo), float(e.length) - a + geo.float_distances(e.hi))


def _best_route(graph: QuantumGraph, p: GraphPoint, q: GraphPoint):
    e, f = graph.edges[p.edge], graph.edges[q.edge]
    geo = _geo(graph)
    ends_p = ((e.lo, p.offset), (e.hi, e.length - p.offset))
    ends_q = ((f.lo, q.offset), (f.hi, f.length - q.offset))
    best, route = None, None
    if p.edge == q.edge:
        best, route = abs(p.offset - q.offset), None
    for u, du in ends_p:
        dist = geo.distances(u)
        for v, dv in ends_q:
            d = du + dist[v] + dv
            if best is None or d < best:
                best, route = d, (u, v)
    return best, route


def geodesic_distance(graph: QuantumGraph, p: GraphPoint, q: GraphPoint) -> Number:
    """Length of a shortest path between two graph points."""
    graph.check_point(p)
    graph.check_point(q)
    return _best_route(graph, p, q)[0]


def geodesic_path(graph: QuantumGraph, p: GraphPoint, q: GraphPoint) -> list[tuple[int, Number, Number]]:
    """A shortest path as edge traversals ``(edge, s_from, s_to)``."""
    graph.check_point(p)
    graph.check_point(q)
    _, route = _best_route(graph, p, q)
    if route is None:
        return [(p.edge, p.offset, q.offset)] if p.offset != q.offset else []
    u, v = route
    e, f = graph.edges[p.edge], graph.edges[q.edge]
    out: list[tuple[int, Number, Number]] = []
    start = 0 if u == e.lo else e.length
    if p.offset != start:
        out.append((e.id, p.offset, start))
    verts = _geo(graph).vertex_path(u, v)
    for a, b in zip(verts, verts[1:]):
        link = min((graph.edges[i] for i in graph.incident(a) if {graph.edges[i].lo, graph.edges[i].hi} == {a, b}),
                   key=lambda ed: ed.length)
        out.append((link.id, 0, link.length) if link.lo == a else (link.id, link.length, 0))
    end = 0 if v == f.lo else f.length
    if q.offset != end:
        out.append((f.id, end, q.offset))
    return out


def path_length(path: Sequence[tuple[int, Number, Number]]) -> Number:
    return sum((abs(b - a) for _, a, b in path), Fraction(0))


# -- balls ------------------------------------------------------------------


@dataclass
class Ball:
    center: GraphPoint
    radius: Number
    content: list[tuple[int, Number, Number]]
    graph: QuantumGraph = field(repr=False)

    def contains(self, p: GraphPoint) -> bool:
        return any(edge == p.edge and a <= p.offset <= b for edge, a, b in self.content)

    def to_json(self) -> dict:
        def enc(v):
            return format_rational(v) if isinstance(v, (Fraction, int)) else repr(float(v))

        return {
            "center": {"edge": self.center.edge, "offset": enc(self.center.offset)},
            "radius": enc(self.radius),
            "content": [[edge, enc(a), enc(b)] for edge, a, b in self.content],
            "measure": enc(ball_measure(self)),
        }


def _merge(intervals: list[tuple[Number, Number]], exact: bool) -> list[tuple[Number, Number]]:
    intervals = sorted(iv for iv in intervals if iv[0] <= iv[1])
    out: list[list[Number]] = []
    slack = 0 if exact else SLACK
    for a, b in intervals:
        if out and a <= out[-1][1] + slack:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _edge_intervals(length: Number, r: Number, d_lo: Number, d_hi: Number) -> list[tuple[Number, Number]]:
    parts = []
    if r >= d_lo:
        parts.append((0 * length, min(length, r - d_lo)))
    if r >= d_hi:
        parts.append((max(0 * length, length - (r - d_hi)), length))
    return parts


def ball(graph: QuantumGraph, center: GraphPoint, r: Number) -> Ball:
    """Closed ball ``{q : d(center, q) <= r}`` as a union of edge sub-intervals."""
    if r < 0:
        raise DomainError("radius must be nonnegative")
    graph.check_point(center)
    dv = _point_distances(graph, center)
    exact = all(isinstance(v, (Fraction, int)) for v in (r, center.offset)) and graph.edge_length is not None
    content = []
    for e in graph.edges:
        parts = _edge_intervals(e.length, r, dv[e.lo], dv[e.hi])
        if e.id == center.edge:
            parts.append((max(0 * e.length, center.offset - r), min(e.length, center.offset + r)))
        for a, b in _merge(parts, exact):
            content.append((e.id, a, b))
    return Ball(center, r, content, graph)


def ball_measure(b: Ball) -> Number:
    return b.graph.measure_of(b.content)


def ball_measures(graph: QuantumGraph, center: GraphPoint, radii: Sequence[float]) -> np.ndarray:
    """Floating-point ``mu(B(center, r))`` for many radii at once."""
    dv = _float_point_distances(graph, center)
    lo = np.array([e.lo for e in graph.edges])
    hi = np.array([e.hi for e in graph.edges])
    L = np.array([float(e.length) for e in graph.edges])
    rho = np.array([float(e.density) for e in graph.edges])
    r = np.asarray(radii, dtype=float)[:, None]
    alpha = np.clip(r - dv[lo][None, :], 0, L)
    beta = np.clip(r - dv[hi][None, :], 0, L)
    covered = np.minimum(L, alpha + beta)
    # the center's own edge also holds the window [a - r, a + r]
    k, a, Lk = center.edge, float(center.offset), L[center.edge]
    for i, ri in enumerate(r[:, 0]):
        parts = [(0.0, alpha[i, k]), (Lk - beta[i, k], Lk), (max(0.0, a - ri), min(Lk, a + ri))]
        covered[i, k] = sum(b - a_ for a_, b in _merge([p for p in parts if p[1] > p[0]], False))
    return covered @ rho


# -- Ahlfors regularity ------------------------------------------------------


@dataclass
class AhlforsFit:
    exponent: float
    residual: float
    intercept: float
    rows: list[tuple[int, float, float, float]]  # (center index, r, measure, fit residual)

    def __iter__(self) -> Iterator[float]:
        yield self.exponent
        yield self.residual

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["center", "r", "measure", "log_r", "log_measure", "residual"])
        for c, r, m, res in self.rows:
            w.writerow([c, repr(r), repr(m), repr(float(np.log(r))), repr(float(np.log(m))), repr(res)])
        return buf.getvalue()


def effective_resolution(graph: QuantumGraph, g: int = 6) -> Fraction:
    """Grid step of the default discretization, ``min_length / 2**g``."""
    return graph.min_edge_length / 2**g


def _interior_point(graph: QuantumGraph, rng: np.random.Generator, margin: float) -> GraphPoint:
    while True:
        p = graph.random_point(rng)
        x = float(graph.coords(p)[0])
        if margin <= x <= 1 - margin:
            return p


def ahlfors_exponent(graph: QuantumGraph, samples: int, r_range: tuple[float, float], seed: int,
                     radii: int = 9, interior: bool = True) -> AhlforsFit:
    """Pooled log-log slope of ball measure against radius over random centers.

    With ``interior`` the centers are drawn from the measure restricted to
    ``r_max <= x <= 1 - r_max``, so no ball is truncated by the ends of the
    interval; truncation changes the measure by a bounded factor but biases
    the slope over a finite range of radii.
    """
    r0, r1 = float(r_range[0]), float(r_range[1])
    lower, upper = 2 * float(effective_resolution(graph)), float(diameter(graph)) / 4
    if not (0 < r0 < r1) or radii < 2 or samples < 1:
        raise DomainError(f"degenerate radius range {r_range}")
    if r0 < lower * (1 - SLACK) or r1 > upper * (1 + SLACK):
        raise DomainError(f"radius range {r_range} outside [{lower}, {upper}]")
    rng = np.random.default_rng(seed)
    rs = np.geomspace(r0, r1, radii)
    xs, ys, rows = [], [], []
    for c in range(samples):
        center = _interior_point(graph, rng, r1) if interior else graph.random_point(rng)
        m = ball_measures(graph, center, rs)
        for r, mu in zip(rs, m):
            rows.append([c, float(r), float(mu), 0.0])
        xs.append(np.log(rs))
        ys.append(np.log(m))
    X, Y = np.concatenate(xs), np.concatenate(ys)
    slope, intercept = np.polyfit(X, Y, 1)
    res = Y - (slope * X + intercept)
    for row, e in zip(rows, res):
        row[3] = float(e)
    return AhlforsFit(float(slope), float(np.sqrt(np.mean(res**2))), float(intercept),
                      [tuple(r) for r in rows])


# -- Poincaré inequality -----------------------------------------------------


@dataclass
class PoincareReport:
    constant: float
    pairs: int
    skipped: int
    violations: int
    ratios: list[float]

    @property
    def finite(self) -> bool:
        return self.violations == 0 and np.isfinite(self.constant)


def _ball_integral(f: PiecewiseFunction, b: Ball, c: Number = 0) -> float:
    g = f.graph
    return float(sum(g.edges[e].density * _poly.integral(_poly.add(f.coeffs[e], (-c,)), a, s)
                     for e, a, s in b.content))


def mean_oscillation(f: PiecewiseFunction, b: Ball) -> float:
    """``int_B |f - f_B| dmu``."""
    mu = float(ball_measure(b))
    if mu == 0:
        return 0.0
    f_b = _ball_integral(f, b) / mu
    g = f.graph
    return float(sum(float(g.edges[e].density) * _poly.abs_integral(_poly.add(f.coeffs[e], (-f_b,)), a, s)
                     for e, a, s in b.content))


def gradient_mass(f: PiecewiseFunction, b: Ball) -> float:
    """``int_B |df/dx| dmu``."""
    g = f.graph
    return float(sum(float(g.edges[e].density) * _poly.total_variation(f.coeffs[e], a, s)
                     for e, a, s in b.content))


def poincare_check(graph: QuantumGraph, functions: Sequence[PiecewiseFunction],
                   balls: Sequence[Ball], C_geom: Number = 1) -> PoincareReport:
    """Largest ratio ``int_B |u - u_B| / (diam(B) int_{CB} |u'|)`` over all pairs.

    ``diam(B)`` is taken as ``2 r`` capped at the graph diameter.
    """
    if C_geom < 1:
        raise DomainError("expansion factor must be at least 1")
    diam = float(diameter(graph))
    ratios, skipped, violations = [], 0, 0
    enlarged = [ball(graph, b.center, b.radius * C_geom) if C_geom != 1 else b for b in balls]
    for f in functions:
        if f.mode != "poly" or f.graph is not graph:
            raise DomainError("functions must be polynomial pieces on this graph")
        for b, cb in zip(balls, enlarged):
            num = mean_oscillation(f, b)
            den = min(2 * float(b.radius), diam) * gradient_mass(f, cb)
            if den == 0:
                if num > SLACK:
                    violations += 1
                else:
                    skipped += 1
                continue
            ratios.append(num / den)
    const = max(ratios) if ratios else 0.0
    if violations:
        const = float("inf")
    return PoincareReport(const, len(ratios), skipped, violations, ratios)


def limit_point_on(graph: QuantumGraph, x: Number, address: str) -> GraphPoint:
    """Image in ``F_n`` of a point given by its coordinate and a (finer) address."""
    if len(address) < graph.level:
        raise DomainError("address shorter than the graph level")
    return graph.point(x, address[: graph.level])


def standard_poincare_suite(params: ContractionParams, n: int, functions: int = 50, balls: int = 30,
                            seed: int = 0, C_geom: Number = 1, base_level: int = 1,
                            r_range: tuple[float, float] = (1 / 16, 1 / 4)) -> PoincareReport:
    """Level-independent Poincaré sweep.

    Test functions are random members of ``G_base`` pulled back to ``F_n``;
    centers are random points of the limit space given at the finest level
    considered.  Both families are identical for every ``n >= base_level``,
    so constants at different levels are directly comparable.
    """
    if n < base_level:
        raise DomainError(f"level {n} below base level {base_level}")
    rng = np.random.default_rng(seed)
    base = build_graph(params, base_level)
    graph = build_graph(params, n)
    fs = [pullback_function(random_function(base, rng), n) if n > base_level else random_function(base, rng)
          for _ in range(functions)]
    depth = params.depth_limit
    centers = []
    for _ in range(balls):
        x = Fraction(int(rng.integers(0, 2**20 + 1)), 2**20)
        addr = "".join(rng.choice(["0", "1"], size=depth))
        r = float(np.exp(rng.uniform(np.log(r_range[0]), np.log(r_range[1]))))
        centers.append((x, addr, r))
    bs = [ball(graph, limit_point_on(graph, x, addr), r) for x, addr, r in centers]
    return poincare_check(graph, fs, bs, C_geom)


# -- limit distances ---------------------------------------------------------


@dataclass
class DistanceBracket:
    levels: list[int]
    distances: list[Number]

    @property
    def estimate(self) -> Number:
        return self.distances[-1]

    @property
    def increment(self) -> Number:
        return self.distances[-1] - self.distances[-2] if len(self.distances) > 1 else 0


def limit_distance(params: ContractionParams, x: Number, a: str, y: Number, b: str,
                   levels: Optional[Sequence[int]] = None) -> DistanceBracket:
    """Distances ``d_{F_n}`` between projections of two limit points.

    Addresses ``a`` and ``b`` fix the points at level ``len(a)``; the sequence
    is nondecreasing in ``n`` and its last increment serves as an error proxy.
    """
    if len(a) != len(b):
        raise DomainError("addresses must have equal length")
    if levels is None:
        levels = list(range(len(a) + 1))
    out = []
    for n in levels:
        if n > len(a):
            raise DomainError(f"level {n} finer than the given addresses")
        g = build_graph(params, n)
        out.append(geodesic_distance(g, g.point(x, a[:n]), g.point(y, b[:n])))
    return DistanceBracket(list(levels), out)


def project_point(params: ContractionParams, p: GraphPoint, n: int, m: int) -> GraphPoint:
    """Image of a level-``n`` point under the projection to level ``m``."""
    return build_projection(params, n, m).apply(p)


__all__ = [
    "AhlforsFit",
    "Ball",
    "DistanceBracket",
    "PoincareReport",
    "ahlfors_exponent",
    "ball",
    "ball_measure",
    "ball_measures",
    "diameter",
    "geodesic_distance",
    "geodesic_path",
    "gradient_mass",
    "limit_distance",
    "mean_oscillation",
    "poincare_check",
    "standard_poincare_suite",
]
