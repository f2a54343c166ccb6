from __future__ import annotations

from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from laakso_lab.errors import DomainError
from laakso_lab.funcspace import constant_function, coordinate_function, random_function
from laakso_lab.graph import GraphPoint, build_graph, build_projection
from laakso_lab.metric import (ahlfors_exponent, ball, ball_measure, ball_measures, diameter, geodesic_distance,
                               geodesic_path, limit_distance, path_length, poincare_check,
                               standard_poincare_suite)


def oracle_distance(graph, p, q):
    """Dijkstra on a copy of the graph with p and q inserted as extra nodes."""
    G = nx.Graph()

    def link(a, b, w):
        if G.has_edge(a, b):
            w = min(w, G[a][b]["weight"])
        G.add_edge(a, b, weight=w)

    cuts: dict[int, list] = {}
    for name, pt in (("p", p), ("q", q)):
        cuts.setdefault(pt.edge, []).append((pt.offset, name))
    for e in graph.edges:
        pts = [(Fraction(0), ("v", e.lo))] + sorted(cuts.get(e.id, [])) + [(e.length, ("v", e.hi))]
        for (s0, a), (s1, b) in zip(pts, pts[1:]):
            link(a, b, s1 - s0)
    return nx.dijkstra_path_length(G, "p", "q") if "p" != "q" else 0


def test_examples(half):
    g = build_graph(half, 1)
    p = g.point(Fraction(1, 4), "0")
    assert geodesic_distance(g, p, p) == 0
    assert geodesic_distance(g, p, g.point(Fraction(3, 4), "0")) == Fraction(1, 2)
    assert geodesic_distance(g, g.point(0, "0"), g.point(0, "1")) == 1


@pytest.mark.parametrize("fixture,n", [("half", 2), ("half", 3), ("third", 2)])
def test_distance_matches_oracle(fixture, n, request):
    g = build_graph(request.getfixturevalue(fixture), n)
    rng = np.random.default_rng(n)
    for _ in range(60):
        p, q = g.random_point(rng, exact=True), g.random_point(rng, exact=True)
        if p == q:
            continue
        d = geodesic_distance(g, p, q)
        assert d == oracle_distance(g, p, q)
        path = geodesic_path(g, p, q)
        assert path_length(path) == d
        # consecutive traversals meet at a common vertex
        for (e0, _, b0), (e1, a1, _) in zip(path, path[1:]):
            v0 = g.vertex_of(GraphPoint(e0, b0))
            assert v0 is not None and v0 == g.vertex_of(GraphPoint(e1, a1))


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_triangle_inequality(third, n):
    g = build_graph(third, n)
    rng = np.random.default_rng(100 + n)
    for _ in range(200):
        p, q, r = (g.random_point(rng) for _ in range(3))
        assert geodesic_distance(g, p, r) <= geodesic_distance(g, p, q) + geodesic_distance(g, q, r) + 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_projection_one_lipschitz(half, n):
    proj = build_projection(half, n, n - 1)
    rng = np.random.default_rng(n)
    for _ in range(100):
        p, q = proj.source.random_point(rng, exact=True), proj.source.random_point(rng, exact=True)
        assert geodesic_distance(proj.target, proj.apply(p), proj.apply(q)) <= geodesic_distance(proj.source, p, q)


@given(x=st.fractions(0, 1, max_denominator=97), y=st.fractions(0, 1, max_denominator=97),
       a=st.text("01", min_size=4, max_size=4), b=st.text("01", min_size=4, max_size=4))
def test_lifted_distances_nondecreasing(half, x, y, a, b):
    br = limit_distance(half, x, a, y, b)
    assert all(d0 <= d1 for d0, d1 in zip(br.distances, br.distances[1:]))
    assert br.increment >= 0 and br.estimate == br.distances[-1]


def test_ball_examples(half):
    g0, g1 = build_graph(half, 0), build_graph(half, 1)
    assert ball_measure(ball(g0, g0.point(Fraction(1, 2), ""), Fraction(1, 4))) == Fraction(1, 2)
    w = g1.point(Fraction(1, 2), "0")
    b = ball(g1, w, Fraction(1, 4))
    # four arms of length 1/4; every F_1 edge has density 1/2 so that the total mass is 1
    assert ball_measure(b) == 4 * Fraction(1, 4) * Fraction(1, 2) and len(b.content) == 4
    assert ball_measure(ball(g1, g1.point(0, "1"), diameter(g1))) == 1
    with pytest.raises(DomainError):
        ball(g1, w, -1)


@pytest.mark.parametrize("fixture,n", [("half", 2), ("third", 2)])
def test_ball_content_is_exact_sublevel_set(fixture, n, request):
    g = build_graph(request.getfixturevalue(fixture), n)
    rng = np.random.default_rng(9)
    for _ in range(10):
        c = g.random_point(rng, exact=True)
        r = Fraction(int(rng.integers(1, 40)), 64)
        b = ball(g, c, r)
        for _ in range(40):
            q = g.random_point(rng, exact=True)
            assert b.contains(q) == (geodesic_distance(g, c, q) <= r)
        assert float(ball_measure(b)) == pytest.approx(ball_measures(g, c, [float(r)])[0], abs=1e-12)


def test_ball_measure_monotone(third):
    g = build_graph(third, 2)
    c = g.random_point(np.random.default_rng(1), exact=True)
    D = diameter(g)
    ms = [ball_measure(ball(g, c, D * Fraction(k, 20))) for k in range(21)]
    assert all(a <= b for a, b in zip(ms, ms[1:])) and ms[-1] == 1


def test_ahlfors_interval(half):
    fit = ahlfors_exponent(build_graph(half, 0), 50, (1 / 32, 1 / 4), 0)
    assert fit.exponent == pytest.approx(1.0, abs=1e-9)
    assert fit.to_csv().splitlines()[0] == "center,r,measure,log_r,log_measure,residual"
    exponent, residual = fit
    assert residual < 1e-9


def test_ahlfors_range_checks(half):
    g = build_graph(half, 2)
    for bad in ((0.2, 0.1), (0.0, 0.1), (1e-5, 0.1), (0.1, 0.9)):
        with pytest.raises(DomainError):
            ahlfors_exponent(g, 10, bad, 0)


def test_poincare_examples(half):
    g0 = build_graph(half, 0)
    b = ball(g0, g0.point(Fraction(1, 2), ""), Fraction(1, 4))
    # int_{1/4}^{3/4} |x - 1/2| dx = 1/16 against diam * int |u'| = (1/2)(1/2)
    assert poincare_check(g0, [coordinate_function(g0)], [b]).constant == pytest.approx(0.25, abs=1e-14)
    rep = poincare_check(g0, [constant_function(g0)], [b])
    assert rep.skipped == 1 and rep.pairs == 0 and rep.violations == 0


def test_poincare_random_suite_finite(third):
    for n in (1, 2, 3):
        rep = standard_poincare_suite(third, n, functions=10, balls=10, seed=4)
        assert rep.finite and rep.violations == 0 and 0 < rep.constant < np.inf


def test_poincare_on_level_functions(half):
    g = build_graph(half, 3)
    rng = np.random.default_rng(0)
    fs = [random_function(g, rng) for _ in range(50)]
    bs = [ball(g, g.random_point(rng), float(rng.uniform(0.05, 0.5))) for _ in range(30)]
    rep = poincare_check(g, fs, bs)
    assert rep.finite and rep.pairs == 1500
