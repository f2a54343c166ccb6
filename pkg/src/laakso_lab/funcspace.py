"""Piecewise-smooth functions on ``F_n`` and the upper-gradient Dirichlet form.

A function in the class G_n is, on ``F_n``, one smooth function per edge that
is continuous across every vertex.  Two representations are supported:

* ``"poly"``: per-edge polynomial coefficients in the edge arclength
  coordinate ``s = x - x_lo`` (Fractions give exact energies and pullbacks);
* ``"samples"``: per-edge values on a uniform grid of step ``h``.

Upper gradients of G_n functions are ``|d f / d x|`` edge by edge, and the
energy is ``sum_e density_e * int_e (f')^2 ds``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import _poly
from ._rational import Number, format_rational
from .errors import DomainError, ResolutionError
from .graph import GraphPoint, QuantumGraph, build_projection

MAX_DEGREE = 6


class PiecewiseFunction:
    """A member of G_n (or its upper gradient) living on a quantum graph."""

    def __init__(
        self,
        graph: QuantumGraph,
        coeffs: Optional[Sequence[Sequence[Number]]] = None,
        values: Optional[Sequence[np.ndarray]] = None,
        h: Optional[Fraction] = None,
        continuous: bool = True,
        absolute: bool = False,
    ):
        if (coeffs is None) == (values is None):
            raise DomainError("give exactly one of coeffs or values")
        self.graph = graph
        self.continuous = continuous
        self.absolute = absolute
        self.h = None if h is None else Fraction(h)
        if coeffs is not None:
            if len(coeffs) != len(graph.edges):
                raise DomainError("need one coefficient list per edge")
            self.coeffs = tuple(_poly.trim(c) for c in coeffs)
            if max(len(c) for c in self.coeffs) - 1 > MAX_DEGREE:
                raise DomainError(f"polynomial degree exceeds {MAX_DEGREE}")
            self.values = None
        else:
            if self.h is None:
                raise DomainError("sample mode needs a grid step h")
            if len(values) != len(graph.edges):
                raise DomainError("need one sample array per edge")
            self.values = tuple(np.asarray(v, dtype=float) for v in values)
            for e, v in zip(graph.edges, self.values):
                if len(v) != _grid_count(e.length, self.h) + 1:
                    raise DomainError(f"edge {e.id} needs {_grid_count(e.length, self.h) + 1} samples")
            self.coeffs = None

    @property
    def mode(self) -> str:
        return "poly" if self.coeffs is not None else "samples"

    @property
    def level(self) -> int:
        return self.graph.level

    def __repr__(self) -> str:
        return f"PiecewiseFunction(level={self.level}, mode={self.mode!r})"

    # -- evaluation ----------------------------------------------------------

    def on_edge(self, edge: int, s: Number):
        if self.coeffs is not None:
            value = _poly.evaluate(self.coeffs[edge], s)
        else:
            grid = self.values[edge]
            u = float(s) / float(self.h)
            k = min(int(np.floor(u)), len(grid) - 2)
            k = max(k, 0)
            w = u - k
            value = (1 - w) * grid[k] + w * grid[k + 1]
        return abs(value) if self.absolute else value

    def __call__(self, p: GraphPoint):
        return self.on_edge(p.edge, p.offset)

    def at(self, x: Number, sheet: str):
        return self(self.graph.point(x, sheet))

    def vertex_traces(self, v: int) -> list:
        """Values of the incident edge pieces at vertex ``v``."""
        out = []
        for eid in self.graph.incident(v):
            e = self.graph.edges[eid]
            if e.lo == v:
                out.append(self.on_edge(eid, Fraction(0) if self.mode == "poly" else 0.0))
            if e.hi == v:
                out.append(self.on_edge(eid, e.length if self.mode == "poly" else float(e.length)))
        return out

    def continuity_defect(self) -> float:
        """Largest disagreement between incident traces over all vertices."""
        worst = 0.0
        for v in self.graph.vertices:
            traces = self.vertex_traces(v.id)
            worst = max(worst, float(max(traces) - min(traces)))
        return worst

    def is_continuous(self, tol: Optional[float] = None) -> bool:
        if tol is None:
            tol = 0.0 if self.mode == "poly" else 1e-12
        return self.continuity_defect() <= tol

    # -- linear structure ----------------------------------------------------

    def _check_compatible(self, other: "PiecewiseFunction") -> None:
        if other.graph is not self.graph and other.graph.to_json() != self.graph.to_json():
            raise DomainError("functions live on different graphs")
        if other.mode != self.mode or (self.mode == "samples" and self.h != other.h):
            raise DomainError("functions use different representations")
        if self.absolute or other.absolute:
            raise DomainError("absolute-value functions are not a vector space")

    def __add__(self, other: "PiecewiseFunction") -> "PiecewiseFunction":
        self._check_compatible(other)
        if self.mode == "poly":
            return PiecewiseFunction(self.graph, [_poly.add(a, b) for a, b in zip(self.coeffs, other.coeffs)])
        return PiecewiseFunction(self.graph, values=[a + b for a, b in zip(self.values, other.values)], h=self.h)

    def __mul__(self, r: Number) -> "PiecewiseFunction":
        if self.absolute:
            raise DomainError("absolute-value functions are not a vector space")
        if self.mode == "poly":
            return PiecewiseFunction(self.graph, [_poly.scale(c, r) for c in self.coeffs])
        return PiecewiseFunction(self.graph, values=[float(r) * v for v in self.values], h=self.h)

    __rmul__ = __mul__

    def __neg__(self) -> "PiecewiseFunction":
        return self * -1

    def __sub__(self, other: "PiecewiseFunction") -> "PiecewiseFunction":
        return self + (-other)

    # -- conversion ----------------------------------------------------------

    def to_samples(self, h: Number) -> "PiecewiseFunction":
        """Sample on a uniform grid; exact evaluation of each polynomial piece."""
        h = Fraction(h)
        if self.mode == "samples":
            if h == self.h:
                return self
            raise DomainError("resampling a sampled function is not supported")
        values = []
        for e, c in zip(self.graph.edges, self.coeffs):
            N = _grid_count(e.length, h)
            s = np.arange(N + 1) * float(h)
            vals = np.polynomial.polynomial.polyval(s, np.array([float(a) for a in c]))
            values.append(np.abs(vals) if self.absolute else vals)
        return PiecewiseFunction(self.graph, values=values, h=h,
                                 continuous=self.continuous)

    def to_json(self) -> dict:
        data: dict = {"level": self.level, "mode": self.mode}
        if self.mode == "poly":
            data["edges"] = [
                {"id": i, "coeffs": [_encode_number(a) for a in c]} for i, c in enumerate(self.coeffs)
            ]
        else:
            data["h"] = format_rational(self.h)
            data["edges"] = [{"id": i, "values": [float(v) for v in vals]} for i, vals in enumerate(self.values)]
        return data

    @classmethod
    def from_json(cls, data: dict, graph: QuantumGraph) -> "PiecewiseFunction":
        try:
            if int(data["level"]) != graph.level:
                raise DomainError("function level does not match graph level")
            edges = sorted(data["edges"], key=lambda e: int(e["id"]))
            if data["mode"] == "poly":
                return cls(graph, [[_decode_number(a) for a in e["coeffs"]] for e in edges])
            if data["mode"] == "samples":
                return cls(graph, values=[np.array(e["values"], dtype=float) for e in edges],
                           h=Fraction(data["h"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed function object: {exc}") from exc
        raise DomainError(f"unknown mode {data.get('mode')!r}")


def _encode_number(a: Number):
    if isinstance(a, Rational):
        return format_rational(a)
    return float(a)


def _decode_number(a) -> Number:
    if isinstance(a, str):
        return Fraction(a)
    if isinstance(a, int):
        return Fraction(a)
    return float(a)


def _grid_count(length: Fraction, h: Fraction) -> int:
    if h > length:
        raise ResolutionError(f"grid step {h} exceeds edge length {length}")
    ratio = Fraction(length) / Fraction(h)
    if ratio.denominator != 1:
        raise ResolutionError(f"grid step {h} does not divide edge length {length}")
    return int(ratio)


# -- constructors --------------------------------------------------------------


def constant_function(graph: QuantumGraph, c: Number = Fraction(1)) -> PiecewiseFunction:
    return PiecewiseFunction(graph, [(c,) for _ in graph.edges])


def from_x_polynomial(graph: QuantumGraph, coeffs_in_x: Sequence[Number]) -> PiecewiseFunction:
    """Sheet-independent function ``f(x, w) = p(x)``."""
    return PiecewiseFunction(graph, [_poly.shift(tuple(coeffs_in_x), e.x_lo) for e in graph.edges])


def coordinate_function(graph: QuantumGraph) -> PiecewiseFunction:
    """``f(x, w) = x`` on every sheet."""
    return from_x_polynomial(graph, (Fraction(0), Fraction(1)))


def random_function(graph: QuantumGraph, rng: np.random.Generator, degree: int = 4,
                    denominator: int = 8) -> PiecewiseFunction:
    """Random member of G_n with rational coefficients.

    Vertex values are drawn first; each edge then carries the linear
    interpolant plus a bubble ``s (L - s) q(s)`` with ``deg q <= degree - 2``.
    """
    if degree > MAX_DEGREE:
        raise DomainError(f"degree must be <= {MAX_DEGREE}")
    vertex_value = [Fraction(int(rng.integers(-denominator, denominator + 1)), denominator)
                    for _ in graph.vertices]
    coeffs = []
    for e in graph.edges:
        a, b = vertex_value[e.lo], vertex_value[e.hi]
        L = e.length
        piece = (a, (b - a) / L)
        if degree >= 2:
            q = tuple(Fraction(int(rng.integers(-denominator, denominator + 1)), denominator) / L**k
                      for k in range(degree - 1))
            bubble = _poly.multiply((Fraction(0), L, Fraction(-1)), q)
            piece = _poly.add(piece, _poly.scale(bubble, 1 / L**2))
        coeffs.append(piece)
    return PiecewiseFunction(graph, coeffs)


def separating_function(graph: QuantumGraph, p: GraphPoint, q: GraphPoint) -> PiecewiseFunction:
    """Function with ``f(p) = -f(q) != 0`` for two points over the same ``x``.

    On the edge of ``p`` it is ``(x - y)(x - z)`` where ``y < x < z`` are the
    bracketing cut points (nearest wormholes, or 0 and 1); on the edge of ``q``
    the negative of that; zero everywhere else.
    """
    p, q = graph.canonical(p), graph.canonical(q)
    if p == q:
        raise DomainError("points must be distinct")
    xp, sheet_p = graph.coords(p)
    xq, sheet_q = graph.coords(q)
    if xp != xq:
        raise DomainError("points must share the x coordinate; use the coordinate function otherwise")
    if graph.vertex_of(p) is not None or graph.vertex_of(q) is not None:
        raise DomainError(f"x = {xp} is a cut point of level <= {graph.level}; use a finer level")
    zero = (Fraction(0),)
    coeffs = [zero] * len(graph.edges)
    L = graph.edges[p.edge].length
    bump = (Fraction(0), -L, Fraction(1))  # s (s - L) = (x - y)(x - z)
    coeffs[p.edge] = bump
    coeffs[q.edge] = _poly.scale(bump, -1)
    return PiecewiseFunction(graph, coeffs)


# -- calculus ------------------------------------------------------------------


def upper_gradient(f: PiecewiseFunction) -> PiecewiseFunction:
    """Minimal upper gradient ``|df/dx|``, defined off the vertex set."""
    if f.absolute:
        raise DomainError("upper gradient of an absolute-value function is not supported")
    if f.mode == "poly":
        return PiecewiseFunction(f.graph, [_poly.derivative(c) for c in f.coeffs],
                                 continuous=False, absolute=True)
    h = float(f.h)
    grads = []
    for e, v in zip(f.graph.edges, f.values):
        if f.h > e.length:
            raise ResolutionError("grid step exceeds edge length")
        grads.append(np.abs(np.gradient(v, h)))
    return PiecewiseFunction(f.graph, values=grads, h=f.h, continuous=False)


def dirichlet_energy(f: PiecewiseFunction) -> Number:
    """``sum_e density_e * int_e (df/dx)^2 ds`` (exact for rational polynomials)."""
    if f.mode == "poly":
        total: Number = Fraction(0)
        for e, c in zip(f.graph.edges, f.coeffs):
            d = _poly.derivative(c)
            total += e.density * _poly.integral(_poly.multiply(d, d), 0, e.length)
        return total
    h = float(f.h)
    return float(sum(float(e.density) * np.sum(np.diff(v) ** 2) / h for e, v in zip(f.graph.edges, f.values)))


def integral(f: PiecewiseFunction) -> Number:
    """``int f dmu``."""
    if f.mode == "poly" and not f.absolute:
        return sum((e.density * _poly.integral(c, 0, e.length) for e, c in zip(f.graph.edges, f.coeffs)),
                   Fraction(0))
    if f.mode == "poly":
        return sum(float(e.density) * _poly.abs_integral(c, 0, e.length) for e, c in zip(f.graph.edges, f.coeffs))
    h = float(f.h)
    return float(sum(float(e.density) * h * (v.sum() - (v[0] + v[-1]) / 2)
                     for e, v in zip(f.graph.edges, f.values)))


def l2_inner(f: PiecewiseFunction, g: PiecewiseFunction) -> Number:
    if f.mode != "poly" or g.mode != "poly":
        raise DomainError("L2 inner products are computed in polynomial mode")
    return sum((e.density * _poly.integral(_poly.multiply(a, b), 0, e.length)
                for e, a, b in zip(f.graph.edges, f.coeffs, g.coeffs)), Fraction(0))


def l2_norm_squared(f: PiecewiseFunction) -> Number:
    return l2_inner(f, f)


def pullback_function(f: PiecewiseFunction, n: int) -> PiecewiseFunction:
    """``f o phi_{n,m}`` on ``F_n`` for ``f`` on ``F_m``, ``n > m``."""
    params = f.graph.params
    if params is None:
        raise DomainError("pullback needs a graph built from contraction parameters")
    if n == f.level:
        return f
    proj = build_projection(params, n, f.level)
    if f.mode == "poly":
        coeffs = [_poly.shift(f.coeffs[t_edge], shift) for t_edge, shift in proj.edge_map]
        return PiecewiseFunction(proj.source, coeffs, continuous=f.continuous, absolute=f.absolute)
    values = []
    for e, (t_edge, shift) in zip(proj.source.edges, proj.edge_map):
        start = _grid_count(shift, f.h) if shift else 0
        values.append(f.values[t_edge][start:start + _grid_count(e.length, f.h) + 1].copy())
    return PiecewiseFunction(proj.source, values=values, h=f.h, continuous=f.continuous)


def unit_contraction(f: PiecewiseFunction, h: Optional[Number] = None) -> PiecewiseFunction:
    """``(f v 0) ^ 1``, evaluated in sample mode (default step ``min(L)/2**10``)."""
    if f.mode == "poly":
        f = f.to_samples(h if h is not None else f.graph.min_edge_length / 2**10)
    return PiecewiseFunction(f.graph, values=[np.clip(v, 0.0, 1.0) for v in f.values], h=f.h)


@dataclass
class UpperGradientReport:
    trials: int
    violations: int
    min_slack: float
    max_slack: float
    tolerance: float
    seed: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def path_integral_of_gradient(f: PiecewiseFunction, path: Sequence[tuple[int, Number, Number]]) -> float:
    """``int_gamma |df/dx| dm`` along a path given as edge traversals."""
    if f.mode != "poly":
        g = upper_gradient(f)
        total = 0.0
        for edge, a, b in path:
            lo, hi = sorted((float(a), float(b)))
            s = np.linspace(lo, hi, 65)
            total += float(trapezoid([g.on_edge(edge, x) for x in s], s))
        return total
    return float(sum(_poly.total_variation(f.coeffs[edge], a, b) for edge, a, b in path))


def verify_upper_gradient_inequality(f: PiecewiseFunction, trials: int, seed: int,
                                     tol: float = 1e-9) -> UpperGradientReport:
    """Check ``|f(x) - f(y)| <= int_gamma |df/dx|`` along geodesics between random points."""
    from .metric import geodesic_path

    rng = np.random.default_rng(seed)
    slacks = []
    for _ in range(trials):
        p = f.graph.random_point(rng)
        q = f.graph.random_point(rng)
        path = geodesic_path(f.graph, p, q)
        slacks.append(path_integral_of_gradient(f, path) - abs(float(f(p)) - float(f(q))))
    violations = sum(1 for s in slacks if s < -tol)
    return UpperGradientReport(trials, violations, min(slacks, default=0.0), max(slacks, default=0.0), tol, seed)


__all__ = [
    "PiecewiseFunction",
    "constant_function",
    "coordinate_function",
    "dirichlet_energy",
    "from_x_polynomial",
    "integral",
    "l2_inner",
    "l2_norm_squared",
    "pullback_function",
    "random_function",
    "separating_function",
    "unit_contraction",
    "upper_gradient",
    "verify_upper_gradient_inequality",
]
