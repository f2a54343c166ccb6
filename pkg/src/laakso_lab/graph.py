"""Quantum graphs ``F_n`` of the projective system, their projections and measures.

``F_n`` consists of ``2**n`` sheets (copies of [0, 1] indexed by length-``n``
addresses) cut at every wormhole of level <= n and glued along the
identification classes.  All cut points are multiples of ``1/J_n``, so every
edge of ``F_n`` has length ``1/J_n`` and weight ``2**-n / J_n``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._rational import Number, format_rational, parse_rational
from .construction import (
    CantorAddress,
    ContractionParams,
    addresses,
    canonical_sheet,
    wormhole_level,
)
from .errors import DomainError, RangeError


@dataclass(frozen=True)
class Vertex:
    id: int
    x: Fraction
    sheet: CantorAddress  # canonical representative of the identification class


@dataclass(frozen=True)
class Edge:
    id: int
    lo: int
    hi: int
    length: Fraction
    weight: Fraction
    sheet: CantorAddress
    x_lo: Fraction

    @property
    def density(self) -> Fraction:
        return self.weight / self.length


@dataclass(frozen=True)
class GraphPoint:
    edge: int
    offset: Number


class QuantumGraph:
    """Level-``n`` approximating graph with exact geometry and measure."""

    def __init__(self, level: int, params: Optional[ContractionParams],
                 vertices: Sequence[Vertex], edges: Sequence[Edge]):
        self.level = level
        self.params = params
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self._vertex_index = {(v.x, v.sheet): v.id for v in self.vertices}
        self._edge_index = {(e.sheet, e.x_lo): e.id for e in self.edges}
        incident: list[list[int]] = [[] for _ in self.vertices]
        for e in self.edges:
            incident[e.lo].append(e.id)
            incident[e.hi].append(e.id)
        self._incident = tuple(tuple(sorted(ids)) for ids in incident)

    def __repr__(self) -> str:
        return f"QuantumGraph(level={self.level}, vertices={len(self.vertices)}, edges={len(self.edges)})"

    # -- structure -----------------------------------------------------------

    def incident(self, v: int) -> tuple[int, ...]:
        return self._incident[v]

    def degree(self, v: int) -> int:
        return len(self._incident[v])

    @cached_property
    def partition(self) -> tuple[Fraction, ...]:
        return tuple(sorted({v.x for v in self.vertices}))

    @cached_property
    def _inner_cuts(self) -> np.ndarray:
        return np.array([float(c) for c in self.partition[1:-1]])

    @cached_property
    def sheets(self) -> tuple[CantorAddress, ...]:
        return tuple(sorted({e.sheet for e in self.edges}))

    @cached_property
    def edge_length(self) -> Optional[Fraction]:
        """Common edge length, or None if the lengths differ."""
        lengths = {e.length for e in self.edges}
        return lengths.pop() if len(lengths) == 1 else None

    @property
    def min_edge_length(self) -> Fraction:
        return min(e.length for e in self.edges)

    def total_measure(self) -> Fraction:
        return sum((e.weight for e in self.edges), Fraction(0))

    def is_connected(self) -> bool:
        rows = [e.lo for e in self.edges]
        cols = [e.hi for e in self.edges]
        n = len(self.vertices)
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        count, _ = connected_components(adj, directed=False)
        return count == 1

    # -- coordinates ---------------------------------------------------------

    def vertex_at(self, x: Fraction, sheet: CantorAddress) -> Optional[int]:
        """Vertex id at ``(x, sheet)`` if that point is a vertex."""
        x = Fraction(x)
        key = (x, self._canonical(x, sheet))
        return self._vertex_index.get(key)

    def _canonical(self, x: Fraction, sheet: CantorAddress) -> CantorAddress:
        if self.params is None:
            return sheet
        return canonical_sheet(self.params, x, sheet)

    def edge_at(self, x: Number, sheet: CantorAddress) -> int:
        """Edge on ``sheet`` whose closed interval contains ``x`` (lowest if two)."""
        if len(sheet) != self.level:
            raise DomainError(f"sheet {sheet!r} does not have length {self.level}")
        if not 0 <= x <= 1:
            raise DomainError(f"x = {x} outside [0, 1]")
        cuts = self.partition
        k = int(np.searchsorted(self._inner_cuts, float(x), side="left"))
        # floats only pick a candidate; confirm with the exact comparison
        while k > 0 and x <= cuts[k]:
            k -= 1
        while k < len(cuts) - 2 and x > cuts[k + 1]:
            k += 1
        return self._edge_index[(sheet, cuts[k])]

    def point(self, x: Number, sheet: CantorAddress) -> GraphPoint:
        """Graph point for the coordinates ``(x, sheet)``, canonicalized."""
        e = self.edges[self.edge_at(x, sheet)]
        return self.canonical(GraphPoint(e.id, x - e.x_lo))

    def coords(self, p: GraphPoint) -> tuple[Number, CantorAddress]:
        e = self.edges[p.edge]
        return e.x_lo + p.offset, e.sheet

    def vertex_of(self, p: GraphPoint) -> Optional[int]:
        e = self.edges[p.edge]
        if p.offset == 0:
            return e.lo
        if p.offset == e.length:
            return e.hi
        return None

    def canonical(self, p: GraphPoint) -> GraphPoint:
        """Vertex points move to their lowest incident edge; others are unchanged."""
        self.check_point(p)
        v = self.vertex_of(p)
        if v is None:
            return p
        e = self.edges[self.incident(v)[0]]
        return GraphPoint(e.id, type(p.offset)(0) if e.lo == v else e.length)

    def vertex_point(self, v: int) -> GraphPoint:
        e = self.edges[self.incident(v)[0]]
        return GraphPoint(e.id, Fraction(0) if e.lo == v else e.length)

    def check_point(self, p: GraphPoint) -> None:
        if not 0 <= p.edge < len(self.edges):
            raise DomainError(f"edge {p.edge} does not exist")
        if not 0 <= p.offset <= self.edges[p.edge].length:
            raise DomainError(f"offset {p.offset} outside edge {p.edge}")

    def random_point(self, rng: np.random.Generator, exact: bool = False) -> GraphPoint:
        """Point drawn from the normalized measure (all edges share a density class)."""
        weights = np.array([float(e.weight) for e in self.edges])
        e = self.edges[int(rng.choice(len(self.edges), p=weights / weights.sum()))]
        if exact:
            return GraphPoint(e.id, e.length * Fraction(int(rng.integers(0, 2**20 + 1)), 2**20))
        return GraphPoint(e.id, float(e.length) * float(rng.random()))

    # -- measure -------------------------------------------------------------

    def measure_of(self, segments: Iterable[tuple[int, Number, Number]]) -> Number:
        """Measure of a union of edge sub-intervals ``(edge, a, b)``.

        Segments on the same edge may touch but must not overlap.
        """
        per_edge: dict[int, list[tuple[Number, Number]]] = {}
        for edge, a, b in segments:
            length = self.edges[edge].length
            if not 0 <= a <= b <= length:
                raise DomainError(f"segment [{a}, {b}] not within edge {edge}")
            per_edge.setdefault(edge, []).append((a, b))
        total: Number = Fraction(0)
        for edge, parts in per_edge.items():
            parts.sort()
            for (a0, b0), (a1, _) in zip(parts, parts[1:]):
                if a1 < b0:
                    raise DomainError(f"overlapping segments on edge {edge}")
            density = self.edges[edge].density
            total += sum((b - a for a, b in parts), Fraction(0)) * density
        return total

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        data = {
            "level": self.level,
            "vertices": [
                {"id": v.id, "x": format_rational(v.x), "sheet": v.sheet} for v in self.vertices
            ],
            "edges": [
                {
                    "id": e.id,
                    "lo": e.lo,
                    "hi": e.hi,
                    "length": format_rational(e.length),
                    "weight": format_rational(e.weight),
                    "sheet": e.sheet,
                }
                for e in self.edges
            ],
        }
        if self.params is not None:
            data["params"] = self.params.to_json()
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "QuantumGraph":
        try:
            level = int(data["level"])
            params = ContractionParams.from_json(data["params"]) if "params" in data else None
            vertices = [
                Vertex(int(v["id"]), parse_rational(v["x"]), str(v["sheet"])) for v in data["vertices"]
            ]
            edges = [
                Edge(int(e["id"]), int(e["lo"]), int(e["hi"]), parse_rational(e["length"]),
                     parse_rational(e["weight"]), str(e["sheet"]), vertices[int(e["lo"])].x)
                for e in data["edges"]
            ]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DomainError(f"malformed graph object: {exc}") from exc
        for i, v in enumerate(vertices):
            if v.id != i:
                raise DomainError("vertex ids must be 0..V-1 in order")
        for i, e in enumerate(edges):
            if e.id != i:
                raise DomainError("edge ids must be 0..E-1 in order")
        return cls(level, params, vertices, edges)


@lru_cache(maxsize=32)
def build_graph(params: ContractionParams, n: int) -> QuantumGraph:
    """Materialize ``F_n``: vertices at every wormhole of level <= n plus sheet ends."""
    if n < 0 or n > params.depth_limit:
        raise RangeError(f"level {n} outside 0..{params.depth_limit}")
    J = params.grid_denominator(n)
    cuts = [Fraction(k, J) for k in range(J + 1)]
    levels = [None] + [wormhole_level(params, x, n) for x in cuts[1:-1]] + [None]
    length = Fraction(1, J)
    weight = length / 2**n

    vertex_ids: dict[tuple[Fraction, str], int] = {}
    vertices: list[Vertex] = []
    edges: list[Edge] = []

    def vertex(k: int, sheet: str) -> int:
        l = levels[k]
        canon = sheet if l is None or sheet[l - 1] == "0" else sheet[: l - 1] + "0" + sheet[l:]
        key = (cuts[k], canon)
        if key not in vertex_ids:
            vertex_ids[key] = len(vertices)
            vertices.append(Vertex(len(vertices), cuts[k], canon))
        return vertex_ids[key]

    for sheet in addresses(n):
        for k in range(J):
            lo, hi = vertex(k, sheet), vertex(k + 1, sheet)
            edges.append(Edge(len(edges), lo, hi, length, weight, sheet, cuts[k]))
    return QuantumGraph(n, params, vertices, edges)


class Projection:
    """The map ``phi_{n,m}: F_n -> F_m`` (drop the trailing ``n - m`` address bits).

    Each source edge lands inside a single target edge by a translation, so
    ``edge_map[e] = (target_edge, shift)`` with ``offset' = offset + shift``.
    """

    def __init__(self, source: QuantumGraph, target: QuantumGraph):
        if target.level >= source.level:
            raise DomainError("projection target level must be below the source level")
        self.source = source
        self.target = target
        self.edge_map: list[tuple[int, Fraction]] = []
        for e in source.edges:
            t_edge = target.edge_at(e.x_lo + e.length / 2, e.sheet[: target.level])
            self.edge_map.append((t_edge, e.x_lo - target.edges[t_edge].x_lo))
        self.vertex_map: list[GraphPoint] = [self.apply(source.vertex_point(v.id)) for v in source.vertices]
        self._preimage: dict[int, list[int]] = {}
        for e, (t_edge, _) in enumerate(self.edge_map):
            self._preimage.setdefault(t_edge, []).append(e)

    @property
    def n(self) -> int:
        return self.source.level

    @property
    def m(self) -> int:
        return self.target.level

    def apply(self, p: GraphPoint) -> GraphPoint:
        t_edge, shift = self.edge_map[p.edge]
        return self.target.canonical(GraphPoint(t_edge, p.offset + shift))

    def preimage_edges(self, target_edge: int) -> list[int]:
        return self._preimage.get(target_edge, [])

    def pull_segments(self, segments: Iterable[tuple[int, Number, Number]]) -> list[tuple[int, Number, Number]]:
        """Preimage of a union of target edge sub-intervals, as source sub-intervals."""
        out = []
        for t_edge, a, b in segments:
            for e in self.preimage_edges(t_edge):
                shift = self.edge_map[e][1]
                length = self.source.edges[e].length
                lo, hi = max(a - shift, 0), min(b - shift, length)
                if lo < hi:
                    out.append((e, lo, hi))
        return out


@lru_cache(maxsize=64)
def build_projection(params: ContractionParams, n: int, m: int) -> Projection:
    if m >= n:
        raise DomainError(f"projection needs m < n, got m={m}, n={n}")
    if m < 0:
        raise DomainError("levels are nonnegative")
    return Projection(build_graph(params, n), build_graph(params, m))


def measure_of(graph: QuantumGraph, segments: Iterable[tuple[int, Number, Number]]) -> Number:
    return graph.measure_of(segments)
