"""Invariant suites with machine-readable reports.

Each suite runs a family of checks over configured parameters and records,
per check, the measured value, its tolerance, the seed that drove it and a
short formula anchor naming the statement being tested.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Callable, Optional

import numpy as np

from ._rational import format_rational, parse_rational
from .construction import (ContractionParams, addresses, balance_holds, identified, params_from_dimension,
                           params_from_ratio, wormhole_locations)
from .errors import UsageError
from .funcspace import dirichlet_energy, random_function, unit_contraction, verify_upper_gradient_inequality
from .graph import build_graph, build_projection
from .metric import ahlfors_exponent, ball, ball_measure, diameter, geodesic_distance, standard_poincare_suite
from .operators import (discretize, eigensolve, eigenresidual, heat_apply, link_terms, operator_form,
                        pullback_operator_pair, resolvent_apply, unit_contraction as clip01)
from .stochastic import harmonic_measure

SUITES = ("construction", "measure", "spectral", "intertwine", "form-equality", "markov", "metric")

DEFAULTS: dict[str, dict[str, Any]] = {
    "construction": {"ratios": ["1/2", "1/3"], "levels": 5},
    "measure": {"levels": 3, "sets": 200},
    "spectral": {"levels": 2, "grid": 6, "eigs": 10, "baseline_grid": 10},
    "intertwine": {"levels": 2, "grid": 6, "alphas": [1, 10], "functions": 20},
    "form-equality": {"levels": 2, "grid": 8, "functions": 5},
    "markov": {"levels": 2, "grid": 4, "functions": 50, "paths": 20000},
    "metric": {"levels": 3, "triples": 200, "ahlfors_level": 4, "functions": 10, "pairs": 100,
               "poincare_functions": 20, "poincare_balls": 10},
}
COMMON = {"t": "1/2", "seed": 0}


@dataclass
class CheckRecord:
    name: str
    anchor: str
    status: str  # "pass", "fail" or "report"
    value: Any
    tol: Any
    seed: Optional[int]

    def to_json(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "status": self.status,
                "value": _encode(self.value), "tol": _encode(self.tol), "seed": self.seed}


def _encode(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    return v


@dataclass
class VerificationReport:
    suite: str
    config: dict
    checks: list[CheckRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def add(self, name: str, anchor: str, passed: Optional[bool], value, tol=None, seed=None) -> None:
        status = "report" if passed is None else ("pass" if passed else "fail")
        self.checks.append(CheckRecord(name, anchor, status, value, tol, seed))

    def to_json(self) -> dict:
        return {"suite": self.suite, "config": self.config, "checks": [c.to_json() for c in self.checks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    def render_text(self) -> str:
        lines = [f"suite {self.suite}: {'PASS' if self.ok else 'FAIL'} ({len(self.checks)} checks)"]
        for c in self.checks:
            tol = "" if c.tol is None else f" tol={_encode(c.tol)}"
            lines.append(f"  [{c.status:6}] {c.name}: {_encode(c.value)}{tol}  ({c.anchor})")
        return "\n".join(lines) + "\n"


def _params(config: dict, t: Optional[str] = None, depth: int = 6) -> ContractionParams:
    if t is None and config.get("Q") is not None:
        return params_from_dimension(float(config["Q"]), depth)
    return params_from_ratio(parse_rational(str(t if t is not None else config["t"])), depth)


def resolve_config(name: str, config: Optional[dict]) -> dict:
    """Suite defaults overlaid with ``config``; for ``"all"`` one entry per suite."""
    if name not in SUITES and name != "all":
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
    config = dict(config or {})
    if "Q" in config and "t" in config:
        raise UsageError("give Q or t, not both")
    names = SUITES if name == "all" else (name,)
    known = set(COMMON) | {"Q"} | {k for n in names for k in DEFAULTS[n]}
    unknown = set(config) - known
    if unknown:
        raise UsageError(f"unknown config keys for suite {name!r}: {sorted(unknown)}")

    def one(suite: str) -> dict:
        out = dict(COMMON)
        if "Q" in config:
            out.pop("t")
        out.update(DEFAULTS[suite])
        out.update({k: v for k, v in config.items() if k in out or k == "Q"})
        return out

    if name != "all":
        return one(name)
    return {n: one(n) for n in SUITES}


# -- construction ------------------------------------------------------------


def enumerate_w(j_seq: tuple[int, ...], l: int) -> set[Fraction]:
    """All values of ``sum_i m_i / (j_1 ... j_i)`` with ``0 <= m_i < j_i`` and ``m_l > 0``."""
    ranges = [range(j) for j in j_seq[: l - 1]] + [range(1, j_seq[l - 1])]
    out = set()
    for ms in product(*ranges):
        acc, denom = Fraction(0), 1
        for m, j in zip(ms, j_seq):
            denom *= j
            acc += Fraction(m, denom)
        out.add(acc)
    return out


def _suite_construction(report: VerificationReport, cfg: dict) -> None:
    for t in cfg["ratios"]:
        P = _params(cfg, t, max(6, cfg["levels"]))
        for l in range(1, cfg["levels"] + 1):
            locs = wormhole_locations(P, l).locations
            report.add(f"t={t} level {l} wormholes match enumeration", "w(m_1,...,m_l)",
                       set(locs) == enumerate_w(P.j_seq, l), len(locs))
            expected = (P.j_seq[l - 1] - 1) * int(np.prod(P.j_seq[: l - 1], dtype=object))
            report.add(f"t={t} level {l} wormhole count", "(j_l - 1) prod_{i<l} j_i", len(locs) == expected,
                       len(locs), expected)
        ok = all(balance_holds(P.j, P.j_seq[:m], P.t_bracket) for m in range(1, P.depth_limit + 1))
        report.add(f"t={t} j-sequence balance", "j/(j+1) <= t^m prod j_i <= (j+1)/j", ok, list(P.j_seq))
        levels = [set(wormhole_locations(P, l).locations) for l in range(1, cfg["levels"] + 1)]
        disjoint = all(not (a & b) for i, a in enumerate(levels) for b in levels[i + 1:])
        report.add(f"t={t} levels disjoint", "W_l cap W_k = empty", disjoint, disjoint)
        n = min(3, cfg["levels"])
        pts = sorted(set().union(*levels[:n]))
        addr = list(addresses(n))
        good = True
        for x in pts:
            rel = {(a, b) for a in addr for b in addr if identified(P, x, a, b, n)}
            good &= all((a, a) in rel for a in addr) and all((b, a) in rel for a, b in rel)
            good &= all((a, c) in rel for a, b in rel for b2, c in rel if b == b2)
        report.add(f"t={t} identification is an equivalence (n={n})", "x ~ y equivalence", good, len(pts))


# -- measure -----------------------------------------------------------------


def _random_segments(graph, rng: np.random.Generator, k: int):
    edges = rng.choice(len(graph.edges), size=min(k, len(graph.edges)), replace=False)
    out = []
    for e in sorted(int(i) for i in edges):
        L = graph.edges[e].length
        a, b = sorted(int(v) for v in rng.integers(0, 65, size=2))
        out.append((e, L * Fraction(a, 64), L * Fraction(b, 64)))
    return out


def _suite_measure(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"]))
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    for n in range(0, cfg["levels"] + 1):
        g = build_graph(P, n)
        total = g.total_measure()
        report.add(f"F_{n} total measure", "mu_n(F_n) = 1", total == 1, total, 0)
        report.add(f"F_{n} connected", "F_n connected", g.is_connected(), g.is_connected())
        if n == 0:
            continue
        proj = build_projection(P, n, n - 1)
        worst = Fraction(0)
        for _ in range(cfg["sets"]):
            segs = _random_segments(proj.target, rng, int(rng.integers(1, 6)))
            worst = max(worst, abs(g.measure_of(proj.pull_segments(segs)) - proj.target.measure_of(segs)))
        report.add(f"F_{n} -> F_{n - 1} measure projectivity ({cfg['sets']} sets)",
                   "mu_n(phi^* A) = mu_{n-1}(A)", worst == 0, worst, 0, seed)


# -- spectral ----------------------------------------------------------------


def _suite_spectral(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"]))
    g0 = build_graph(P, 0)
    op0 = discretize(g0, g=cfg["baseline_grid"])
    spec = eigensolve(op0, 11)
    k = np.arange(1, 11)
    rel = float(np.max(np.abs(spec.eigenvalues[1:] - (k * np.pi) ** 2) / (k * np.pi) ** 2))
    report.add(f"F_0 Neumann spectrum (g={cfg['baseline_grid']})", "lambda_k = k^2 pi^2", rel <= 1e-4, rel, 1e-4)
    for n in range(1, cfg["levels"] + 1):
        h = build_graph(P, n - 1).min_edge_length / 2 ** cfg["grid"]
        fine, coarse = pullback_operator_pair(P, n, n - 1, h)
        m = min(cfg["eigs"], coarse.n_nodes)
        sc = eigensolve(coarse, m)
        worst = max(eigenresidual(fine, lam, fine.pullback(coarse, sc.eigenvectors[:, i]))
                    for i, lam in enumerate(sc.eigenvalues))
        report.add(f"F_{n - 1} eigenvectors pulled back to F_{n}", "L_n phi^* = phi^* L_{n-1}",
                   worst <= 1e-6, worst, 1e-6)
        sf = eigensolve(fine, min(3 * m, fine.n_nodes)).eigenvalues
        gap = max(float(np.min(np.abs(sf - lam))) / max(1.0, lam) for lam in sc.eigenvalues)
        report.add(f"F_{n - 1} eigenvalues found in F_{n} spectrum", "spec L_{n-1} subset spec L_n",
                   gap <= 1e-6, gap, 1e-6)


# -- intertwining --------------------------------------------------------------


def _suite_intertwine(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"]))
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    for n in range(1, cfg["levels"] + 1):
        h = build_graph(P, n - 1).min_edge_length / 2 ** cfg["grid"]
        fine, coarse = pullback_operator_pair(P, n, n - 1, h)
        fs = [rng.standard_normal(coarse.n_nodes) for _ in range(cfg["functions"])]
        for alpha in cfg["alphas"]:
            worst = max(float(np.max(np.abs(resolvent_apply(fine, alpha, fine.pullback(coarse, f))
                                            - fine.pullback(coarse, resolvent_apply(coarse, alpha, f)))))
                        for f in fs)
            report.add(f"F_{n - 1} -> F_{n} resolvent intertwining, alpha={alpha}", "U_a phi^* = phi^* U_a",
                       worst <= 1e-6, worst, 1e-6, seed)


# -- form equality -------------------------------------------------------------


def _suite_form(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"]))
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    g_ = cfg["grid"]
    for n in range(0, cfg["levels"] + 1):
        graph = build_graph(P, n)
        ops = discretize(graph, g=g_), discretize(graph, g=g_ + 2)
        worst, ratio = 0.0, np.inf
        for _ in range(cfg["functions"]):
            f = random_function(graph, rng, degree=4)
            E = float(dirichlet_energy(f))
            errs = [abs(operator_form(o, o.sample(f), o.sample(f)) - E) for o in ops]
            worst = max(worst, errs[0])
            ratio = min(ratio, errs[0] / errs[1] if errs[1] > 0 else np.inf)
        report.add(f"F_{n} discrete form vs energy (g={g_})", "E(u) = E~(u) on G_n", worst <= 5e-3, worst, 5e-3, seed)
        report.add(f"F_{n} form error decrease g={g_}->{g_ + 2}", "E_h -> E", ratio >= 3, ratio, 3, seed)
        energies = []
        for _ in range(cfg["functions"]):
            f = random_function(graph, rng, degree=4)
            energies.append(float(dirichlet_energy(f)) - float(dirichlet_energy(unit_contraction(f))))
        report.add(f"F_{n} unit contraction lowers energy", "E((0 v u) ^ 1) <= E(u)",
                   min(energies) >= -1e-9, min(energies), -1e-9, seed)


# -- Markov ----------------------------------------------------------------------


def _suite_markov(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"]))
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    for n in range(0, cfg["levels"] + 1):
        op = discretize(build_graph(P, n), g=cfg["grid"])
        L = op.generator.tocsr()
        rows = np.abs(np.asarray(L.sum(axis=1))).max()
        report.add(f"F_{n} generator rows sum to zero", "L 1 = 0", rows == 0, float(rows), 0)
        ML = (L.multiply(op.mass[:, None])).tocsr()
        asym = float(abs(ML - ML.T).max()) / float(abs(ML).max())
        report.add(f"F_{n} reversibility", "m_v L(v,w) = m_w L(w,v)", asym <= 1e-12, asym, 1e-12)
        lo, hi = 0.0, 1.0
        for _ in range(5):
            f = rng.random(op.n_nodes)
            for tau in (0.01, 0.1, 1.0):
                u = heat_apply(op, tau, f)
                lo, hi = min(lo, float(u.min())), max(hi, float(u.max()))
        excess = max(-lo, hi - 1.0)
        report.add(f"F_{n} heat semigroup preserves [0,1]", "0 <= f <= 1 => 0 <= P_t f <= 1",
                   excess <= 1e-10, excess, 1e-10, seed)
        bad = 0
        for _ in range(cfg["functions"]):
            u = 2.0 * rng.standard_normal(op.n_nodes)
            bad += int(np.sum(link_terms(op, clip01(u)) > link_terms(op, u)))
        report.add(f"F_{n} unit contraction termwise ({cfg['functions']} functions)",
                   "E(u^#) <= E(u)", bad == 0, bad, 0, seed)
    op = discretize(build_graph(P, 0), g=cfg["grid"])
    start = op.node_of(Fraction(1, 4), "")
    hm = harmonic_measure(op, start, [op.node_of(0, ""), op.node_of(1, "")], cfg["paths"], seed)
    report.add("F_0 harmonic measure from 1/4 (exact solve)", "P(hit 0) = 1 - x",
               bool(np.allclose(hm.exact, [0.75, 0.25], atol=1e-12)), list(hm.exact), 1e-12)
    report.add("F_0 harmonic measure Monte Carlo", "P(hit 0) = 1 - x", hm.within(3.0),
               list(hm.empirical), "3 SE", seed)


# -- metric ------------------------------------------------------------------------


def _suite_metric(report: VerificationReport, cfg: dict) -> None:
    P = _params(cfg, depth=max(6, cfg["levels"], cfg["ahlfors_level"]))
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    for n in range(0, cfg["levels"] + 1):
        g = build_graph(P, n)
        worst = Fraction(0)
        for _ in range(cfg["triples"]):
            p, q, r = (g.random_point(rng, exact=True) for _ in range(3))
            worst = max(worst, geodesic_distance(g, p, r) - geodesic_distance(g, p, q) - geodesic_distance(g, q, r))
        report.add(f"F_{n} triangle inequality", "d(p,r) <= d(p,q) + d(q,r)", worst <= 0, worst, 0, seed)
        if n:
            proj = build_projection(P, n, n - 1)
            gap = Fraction(-10**9)
            for _ in range(cfg["triples"]):
                p, q = g.random_point(rng, exact=True), g.random_point(rng, exact=True)
                d_coarse = geodesic_distance(proj.target, proj.apply(p), proj.apply(q))
                gap = max(gap, d_coarse - geodesic_distance(g, p, q))
            report.add(f"F_{n} -> F_{n - 1} projection is 1-Lipschitz", "d(phi p, phi q) <= d(p, q)",
                       gap <= 0, gap, 0, seed)
        D = diameter(g)
        c = g.random_point(rng, exact=True)
        radii = [D * Fraction(k, 8) for k in range(9)]
        ms = [ball_measure(ball(g, c, r)) for r in radii]
        mono = all(a <= b for a, b in zip(ms, ms[1:])) and ms[-1] == 1
        report.add(f"F_{n} ball measure monotone, full at diameter", "mu(B(x, diam)) = 1", mono, ms[-1], None, seed)
        viol = 0
        for k in range(cfg["functions"]):
            rep = verify_upper_gradient_inequality(random_function(g, rng), cfg["pairs"], seed + k)
            viol += rep.violations
        report.add(f"F_{n} upper gradient inequality", "|u(x) - u(y)| <= int_gamma |u'|", viol == 0, viol, 0, seed)
    n_a = cfg["ahlfors_level"]
    ga = build_graph(P, n_a)
    fit = ahlfors_exponent(ga, 200, (1 / 16, float(diameter(ga)) / 4), seed)
    report.add(f"F_{n_a} Ahlfors exponent", "mu(B(x,r)) ~ r^Q", None, [fit.exponent, P.Q], None, seed)
    consts = []
    for n in range(1, cfg["levels"] + 1):
        rep = standard_poincare_suite(P, n, cfg["poincare_functions"], cfg["poincare_balls"], seed)
        consts.append(rep.constant)
        report.add(f"F_{n} Poincare constant", "int_B |u - u_B| <= C diam(B) int_CB p_u", None, rep.constant,
                   None, seed)
    if consts:
        spread = (max(consts) - min(consts)) / min(consts)
        report.add("Poincare constant spread across levels", "C independent of n", None, spread, None, seed)


_RUNNERS: dict[str, Callable[[VerificationReport, dict], None]] = {
    "construction": _suite_construction,
    "measure": _suite_measure,
    "spectral": _suite_spectral,
    "intertwine": _suite_intertwine,
    "form-equality": _suite_form,
    "markov": _suite_markov,
    "metric": _suite_metric,
}


def run_suite(name: str, config: Optional[dict] = None) -> VerificationReport:
    """Run one suite (or ``"all"``) deterministically from ``config``."""
    cfg = resolve_config(name, config)
    report = VerificationReport(name, cfg)
    if name == "all":
        for suite in SUITES:
            _RUNNERS[suite](report, cfg[suite])
    else:
        _RUNNERS[name](report, cfg)
    return report


__all__ = ["CheckRecord", "SUITES", "VerificationReport", "enumerate_w", "resolve_config", "run_suite"]
