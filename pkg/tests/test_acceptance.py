"""Acceptance criteria 1-11, one test each.

Every test prints a single ``ACCEPTANCE <k> PASS|FAIL`` line (shown even
without ``-s``) before asserting, so a run of this file doubles as a report.
"""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from laakso_lab.construction import params_from_ratio, wormhole_locations
from laakso_lab.funcspace import dirichlet_energy, random_function, verify_upper_gradient_inequality
from laakso_lab.graph import build_graph, build_projection
from laakso_lab.metric import ahlfors_exponent, standard_poincare_suite
from laakso_lab.operators import (discretize, eigenresidual, eigensolve, heat_apply, link_terms, operator_form,
                                  pullback_operator_pair, resolvent_apply, unit_contraction)
from laakso_lab.stochastic import estimate_expectation, sample_positions
from laakso_lab.verify import _random_segments, enumerate_w

HALF = params_from_ratio(Fraction(1, 2), 6)
THIRD = params_from_ratio(Fraction(1, 3), 6)


@pytest.fixture
def verdict(capsys):
    """Print one status line, then assert both the check and its time budget."""
    t0 = time.perf_counter()

    def emit(k: int, ok: bool, detail: str, budget: float) -> None:
        elapsed = time.perf_counter() - t0
        fast = elapsed < budget
        status = "PASS" if ok and fast else "FAIL"
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2} {status}: {detail} [{elapsed:.2f}s / {budget:g}s]")
        assert ok, detail
        assert fast, f"took {elapsed:.2f}s, budget {budget}s"

    return emit


def test_01_wormholes_match_enumeration(verdict):
    ok, sizes = True, []
    for P in (HALF, THIRD):
        for l in range(1, 6):
            locs = set(wormhole_locations(P, l).locations)
            expected = (P.j_seq[l - 1] - 1) * int(np.prod(P.j_seq[: l - 1], dtype=object))
            ok &= locs == enumerate_w(P.j_seq, l) and len(locs) == expected
            sizes.append(len(locs))
    verdict(1, ok, f"wormhole sets exact for t in {{1/2,1/3}}, l<=5, sizes {sizes}", 1.0)


def test_02_measure_projectivity(verdict):
    rng = np.random.default_rng(2)
    worst = Fraction(0)
    for n in range(1, 5):
        proj = build_projection(HALF, n, n - 1)
        fine = proj.source
        for _ in range(200):
            segs = _random_segments(proj.target, rng, int(rng.integers(1, 6)))
            worst = max(worst, abs(fine.measure_of(proj.pull_segments(segs)) - proj.target.measure_of(segs)))
    verdict(2, worst == 0, f"max |mu_n(pullback A) - mu_(n-1)(A)| = {worst} over 4x200 sets", 5.0)


def test_03_neumann_baseline(verdict):
    op = discretize(build_graph(HALF, 0), g=10)
    lam = eigensolve(op, 11).eigenvalues[1:]
    k = np.arange(1, 11)
    rel = float(np.max(np.abs(lam - (k * np.pi) ** 2) / (k * np.pi) ** 2))
    verdict(3, rel <= 1e-4, f"F_0 g=10 max relative error to k^2 pi^2 (k<=10) = {rel:.2e}", 10.0)


def test_04_spectral_pullback(verdict):
    worst_res, worst_gap = 0.0, 0.0
    for n in range(1, 4):
        h = build_graph(HALF, n - 1).min_edge_length / 2 ** 6
        fine, coarse = pullback_operator_pair(HALF, n, n - 1, h)
        sc = eigensolve(coarse, 10)
        sf = eigensolve(fine, 30).eigenvalues
        for i, lam in enumerate(sc.eigenvalues):
            psi = fine.pullback(coarse, sc.eigenvectors[:, i])
            worst_res = max(worst_res, eigenresidual(fine, lam, psi))
            worst_gap = max(worst_gap, float(np.min(np.abs(sf - lam))) / max(1.0, lam))
    ok = worst_res <= 1e-6 and worst_gap <= 1e-6
    verdict(4, ok, f"pullback eigenresidual {worst_res:.2e}, eigenvalue gap {worst_gap:.2e} (n<=3, g=6)", 120.0)


def test_05_form_equality(verdict):
    rng = np.random.default_rng(5)
    worst, min_ratio = 0.0, np.inf
    for k in range(20):
        graph = build_graph(HALF, k % 3)
        f = random_function(graph, rng, degree=4)
        E = float(dirichlet_energy(f))
        errs = []
        for g in (8, 10):
            op = discretize(graph, g=g)
            u = op.sample(f)
            errs.append(abs(operator_form(op, u, u) - E))
        worst = max(worst, errs[0])
        min_ratio = min(min_ratio, errs[0] / errs[1] if errs[1] > 0 else np.inf)
    ok = worst <= 5e-3 and min_ratio >= 3
    verdict(5, ok, f"max |form - energy| at g=8 = {worst:.2e}, min error ratio g=8/g=10 = {min_ratio:.2f}", 120.0)


def test_06_resolvent_intertwining(verdict):
    rng = np.random.default_rng(6)
    h = build_graph(HALF, 1).min_edge_length / 2 ** 6
    fine, coarse = pullback_operator_pair(HALF, 2, 1, h)
    worst = 0.0
    for alpha in (1.0, 10.0):
        for _ in range(20):
            f = rng.standard_normal(coarse.n_nodes)
            lhs = resolvent_apply(fine, alpha, fine.pullback(coarse, f))
            rhs = fine.pullback(coarse, resolvent_apply(coarse, alpha, f))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    verdict(6, worst <= 1e-6, f"max sup-norm commutator F_1 -> F_2, alpha in {{1,10}} = {worst:.2e}", 60.0)


def test_07_markov_properties(verdict):
    rng = np.random.default_rng(7)
    row_max, excess, bad = 0.0, 0.0, 0
    for n in range(0, 3):
        op = discretize(build_graph(HALF, n), g=4)
        row_max = max(row_max, float(np.abs(np.asarray(op.generator.sum(axis=1))).max()))
        for _ in range(5):
            f = rng.random(op.n_nodes)
            for tau in (0.01, 0.1, 1.0):
                u = heat_apply(op, tau, f)
                excess = max(excess, float(-u.min()), float(u.max() - 1.0))
        for _ in range(50):
            u = 2.0 * rng.standard_normal(op.n_nodes)
            bad += int(np.sum(link_terms(op, unit_contraction(u)) > link_terms(op, u)))
    ok = row_max == 0 and excess <= 1e-10 and bad == 0
    verdict(7, ok, f"row sums max {row_max}, [0,1] excess {excess:.1e}, contraction violations {bad}", 30.0)


def test_08_monte_carlo_vs_spectral(verdict):
    op = discretize(build_graph(HALF, 1), g=2)
    rng = np.random.default_rng(8)
    tests = [rng.standard_normal(op.n_nodes) for _ in range(5)]
    starts = [op.node_of(0, "0"), op.node_of(Fraction(1, 2), "0"), op.node_of(Fraction(3, 4), "1")]
    times = (0.05, 0.1, 0.5)
    exact = {(s, t): [heat_apply(op, t, f)[s] for f in tests] for s in starts for t in times}
    hits = cells = 0
    N = 100_000
    for seed in range(20):
        for i, s in enumerate(starts):
            pos = sample_positions(op, s, times, N, seed, first_path=i * N)
            for j, t in enumerate(times):
                for f, ref in zip(tests, exact[(s, t)]):
                    mean, se = estimate_expectation(pos[j], f)
                    hits += abs(mean - ref) <= 3 * se
                    cells += 1
    frac = hits / cells
    verdict(8, frac >= 0.95, f"{hits}/{cells} cells within 3 SE ({frac:.3f})", 300.0)


def test_09_ahlfors_exponent(verdict):
    fits = {}
    for label, P, target in (("1/2", HALF, 2.0), ("1/3", THIRD, 1.631)):
        fit = ahlfors_exponent(build_graph(P, 4), 200, (2.0 ** -4, 2.0 ** -2), seed=9)
        fits[label] = (fit.exponent, target)
    ok = all(abs(q - target) <= 0.15 for q, target in fits.values())
    detail = ", ".join(f"t={k}: {q:.3f} (target {t})" for k, (q, t) in fits.items())
    verdict(9, ok, f"F_4 fitted exponents {detail}", 120.0)


def test_10_upper_gradient(verdict):
    rng = np.random.default_rng(10)
    violations = trials = 0
    for n in range(0, 4):
        graph = build_graph(HALF, n)
        for k in range(50):
            rep = verify_upper_gradient_inequality(random_function(graph, rng), 100, seed=1000 * n + k, tol=1e-9)
            violations += rep.violations
            trials += rep.trials
    verdict(10, violations == 0, f"{violations} violations over {trials} pair checks (n<=3, tol 1e-9)", 120.0)


def test_11_poincare_stability(verdict):
    consts = [standard_poincare_suite(HALF, n, seed=11).constant for n in (1, 2, 3)]
    finite = all(np.isfinite(c) and c > 0 for c in consts)
    spread = (max(consts) - min(consts)) / min(consts) if finite else np.inf
    shown = ", ".join(f"{c:.3f}" for c in consts)
    verdict(11, finite and spread < 0.5, f"constants n=1,2,3: {shown}; spread {spread:.1%}", 120.0)
