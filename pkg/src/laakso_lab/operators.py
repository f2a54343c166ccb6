"""Discrete Kirchhoff Laplacian on ``F_n`` and its spectral calculus.

Every edge is cut into cells of width ``h``.  Consecutive grid nodes on an
edge of density ``rho`` are joined with conductance ``rho / h``; node masses
are ``rho * h`` in the interior of an edge and ``sum rho * h / 2`` at a graph
vertex.  The generator is ``L = -M^{-1} K`` with ``K`` the weighted graph
Laplacian, so on a vertex of degree ``d``::

    (L u)_v = 2 / (d h^2) * sum_i (u_i - u_v)

which is the Kirchhoff (sum of outgoing derivatives = 0) condition at
interior vertices and Neumann reflection at the degree-one ends.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import eigsh, expm_multiply, factorized

from ._rational import Number
from .errors import DomainError, GridError, NumericError
from .funcspace import PiecewiseFunction
from .graph import QuantumGraph, build_projection

logger = logging.getLogger(__name__)

DENSE_LIMIT = 3000
HEAT_CUTOFF = 1e-14


class DiscreteOperator:
    """Mass-weighted grid Laplacian discretizing the generator on ``F_n``."""

    def __init__(self, graph: QuantumGraph, h: Fraction):
        self.graph = graph
        self.h = Fraction(h)
        counts = []
        for e in graph.edges:
            ratio = e.length / self.h
            if self.h <= 0 or ratio.denominator != 1:
                raise GridError(f"h = {self.h} does not divide edge length {e.length}")
            counts.append(int(ratio))
        self.cells_per_edge = np.array(counts, dtype=np.int64)

        V = len(graph.vertices)
        # first interior node of each edge; interior nodes are laid out edge by edge
        self.edge_start = V + np.concatenate(([0], np.cumsum(self.cells_per_edge - 1)[:-1])).astype(np.int64)
        self.n_nodes = int(V + np.sum(self.cells_per_edge - 1))

        hf = float(self.h)
        mass = np.zeros(self.n_nodes)
        rows, cols, cond = [], [], []
        node_edge = np.full(self.n_nodes, -1, dtype=np.int64)
        node_step = np.zeros(self.n_nodes, dtype=np.int64)
        for e, N in zip(graph.edges, counts):
            rho = float(e.density)
            start = int(self.edge_start[e.id])
            interior = np.arange(start, start + N - 1)
            chain = np.concatenate(([e.lo], interior, [e.hi]))
            rows.append(chain[:-1])
            cols.append(chain[1:])
            cond.append(np.full(N, rho / hf))
            mass[interior] = rho * hf
            mass[e.lo] += rho * hf / 2
            mass[e.hi] += rho * hf / 2
            node_edge[interior] = e.id
            node_step[interior] = np.arange(1, N)
        self.mass = mass
        self.link_i = np.concatenate(rows)
        self.link_j = np.concatenate(cols)
        self.link_c = np.concatenate(cond)
        self.node_edge = node_edge
        self.node_step = node_step

        n = self.n_nodes
        K = sparse.coo_matrix((self.link_c, (self.link_i, self.link_j)), shape=(n, n)).tocsr()
        K = K + K.T
        offdiag = sparse.diags(1.0 / mass) @ K
        offdiag = offdiag.tocsr()
        diag = -np.asarray(offdiag.sum(axis=1)).ravel()
        self.generator = (offdiag + sparse.diags(diag)).tocsr()
        self.generator.sort_indices()
        self._stiffness = (sparse.diags(np.asarray(K.sum(axis=1)).ravel()) - K).tocsr()
        self._solvers: dict[float, Callable] = {}
        self._spectrum: Optional[Spectrum] = None

    def __repr__(self) -> str:
        return f"DiscreteOperator(level={self.graph.level}, h={self.h}, nodes={self.n_nodes})"

    # -- geometry of the grid ------------------------------------------------

    def node_coords(self, i: int) -> tuple[Fraction, str]:
        """Exact ``(x, sheet)`` of node ``i`` (vertices report their canonical sheet)."""
        V = len(self.graph.vertices)
        if i < V:
            v = self.graph.vertices[i]
            return v.x, v.sheet
        e = self.graph.edges[int(self.node_edge[i])]
        return e.x_lo + int(self.node_step[i]) * self.h, e.sheet

    @cached_property
    def node_x(self) -> np.ndarray:
        return np.array([float(self.node_coords(i)[0]) for i in range(self.n_nodes)])

    def node_of(self, x: Number, sheet: str) -> int:
        x = Fraction(x)
        v = self.graph.vertex_at(x, sheet)
        if v is not None:
            return v
        e = self.graph.edges[self.graph.edge_at(x, sheet)]
        k = (x - e.x_lo) / self.h
        if k.denominator != 1:
            raise GridError(f"x = {x} is not a grid point of step {self.h}")
        return int(self.edge_start[e.id]) + int(k) - 1

    def neighbors(self, i: int) -> np.ndarray:
        row = self.generator.getrow(i)
        return np.array([j for j in row.indices if j != i])

    # -- conversions ---------------------------------------------------------

    def sample(self, f: Union[PiecewiseFunction, Callable[[np.ndarray, str], np.ndarray]]) -> np.ndarray:
        """Node values of a function (a G_n function or a callable ``(x, sheet)``)."""
        u = np.zeros(self.n_nodes)
        V = len(self.graph.vertices)
        hf = float(self.h)
        if isinstance(f, PiecewiseFunction):
            if f.graph.level != self.graph.level:
                raise DomainError("function and operator live on different levels")
            for e in self.graph.edges:
                N = int(self.cells_per_edge[e.id])
                s = np.arange(N + 1) * hf
                if f.mode == "poly":
                    vals = np.polynomial.polynomial.polyval(s, np.array([float(a) for a in f.coeffs[e.id]]))
                else:
                    vals = np.array([f.on_edge(e.id, x) for x in s], dtype=float)
                start = int(self.edge_start[e.id])
                u[start:start + N - 1] = vals[1:-1]
                u[e.lo] = vals[0]
                u[e.hi] = vals[-1]
            return u
        for i in range(V):
            v = self.graph.vertices[i]
            u[i] = f(np.array([float(v.x)]), v.sheet)[0]
        for e in self.graph.edges:
            N = int(self.cells_per_edge[e.id])
            start = int(self.edge_start[e.id])
            x = float(e.x_lo) + np.arange(1, N) * hf
            u[start:start + N - 1] = f(x, e.sheet)
        return u

    def projection_index(self, coarse: "DiscreteOperator") -> np.ndarray:
        """For each node here, the node of ``coarse`` it projects onto (equal grids)."""
        if coarse.h != self.h:
            raise GridError("pullback between operators needs matching grid steps")
        m = coarse.graph.level
        if m >= self.graph.level:
            raise DomainError("coarse operator must live on a lower level")
        return np.array([coarse.node_of(x, sheet[:m]) for x, sheet in map(self.node_coords, range(self.n_nodes))],
                        dtype=np.int64)

    def pullback(self, coarse: "DiscreteOperator", u: np.ndarray) -> np.ndarray:
        """Node vector ``u o phi`` for ``u`` on the coarse operator."""
        key = id(coarse)
        cache = self.__dict__.setdefault("_pullback_cache", {})
        if key not in cache:
            cache[key] = (coarse, self.projection_index(coarse))
        return np.asarray(u)[cache[key][1]]

    # -- matrices ------------------------------------------------------------

    @property
    def stiffness(self) -> sparse.csr_matrix:
        """Symmetric ``K`` with ``<u, -L v>_m = u^T K v``."""
        return self._stiffness

    def symmetric(self) -> sparse.csr_matrix:
        """``M^{1/2} (-L) M^{-1/2}``; symmetric positive semidefinite."""
        r = sparse.diags(1.0 / np.sqrt(self.mass))
        return (r @ self._stiffness @ r).tocsr()

    def solver(self, alpha: float) -> Callable[[np.ndarray], np.ndarray]:
        if alpha not in self._solvers:
            A = (alpha * sparse.diags(self.mass) + self._stiffness).tocsc()
            self._solvers[alpha] = factorized(A)
        return self._solvers[alpha]

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.mass * u * v))


def discretize(graph: QuantumGraph, h: Optional[Number] = None, g: Optional[int] = None) -> DiscreteOperator:
    """Assemble the operator with step ``h`` or ``h = min_length / 2**g`` (default g=6)."""
    if h is None:
        h = graph.min_edge_length / 2 ** (6 if g is None else g)
    elif g is not None:
        raise DomainError("give h or g, not both")
    return DiscreteOperator(graph, Fraction(h))


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, mass-orthonormal
    residuals: np.ndarray
    method: str = "dense"
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for k, (lam, res) in enumerate(zip(self.eigenvalues, self.residuals)):
            w.writerow([k, repr(float(lam)), repr(float(res))])
        return buf.getvalue()

    def vectors_json(self, op: DiscreteOperator) -> dict:
        return {
            "nodes": [f"{x.numerator}/{x.denominator}@{sheet}" for x, sheet in map(op.node_coords, range(op.n_nodes))],
            "vectors": [[float(v) for v in self.eigenvectors[:, k]] for k in range(len(self))],
        }


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        big = np.abs(col) > 1e-10 * np.max(np.abs(col))
        first = int(np.argmax(big))
        if col[first] < 0:
            vectors[:, k] = -col
    return vectors


def eigenresidual(op: DiscreteOperator, lam: float, psi: np.ndarray) -> float:
    """``||(-L) psi - lam psi||_m / ||psi||_m``."""
    r = -(op.generator @ psi) - lam * psi
    return float(np.sqrt(op.inner(r, r) / op.inner(psi, psi)))


def eigensolve(op: DiscreteOperator, m: int, tol: float = 1e-8) -> Spectrum:
    """The ``m`` smallest eigenpairs of ``-L`` via the mass-symmetrized matrix.

    Residuals are measured relative to the operator scale ``max(1, ||L||)``
    when compared against ``tol``.
    """
    n = op.n_nodes
    if not 1 <= m <= n:
        raise DomainError(f"eigen count must be in 1..{n}")
    S = op.symmetric()
    if n <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(S.toarray(), subset_by_index=[0, m - 1])
        method = "dense"
    else:
        # shift-invert Lanczos below the spectrum (S is singular at 0)
        v0 = np.linspace(1.0, 2.0, n)
        try:
            vals, vecs = eigsh(S, k=m, sigma=-1.0, which="LM", v0=v0, tol=1e-13)
        except Exception as exc:  # ARPACK raises its own error classes
            raise NumericError(f"Lanczos eigensolve did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        method = "lanczos"
    psi = vecs / np.sqrt(op.mass)[:, None]
    psi = _fix_signs(psi)
    residuals = np.array([eigenresidual(op, lam, psi[:, k]) for k, lam in enumerate(vals)])
    scale = max(1.0, float(np.max(np.abs(op.generator.diagonal()))))
    if np.any(residuals > tol * scale):
        raise NumericError(f"eigen residuals too large: max {residuals.max():.3e}")
    return Spectrum(vals, psi, residuals, method)


def full_spectrum(op: DiscreteOperator) -> Spectrum:
    if op._spectrum is None:
        op._spectrum = eigensolve(op, op.n_nodes)
    return op._spectrum


def resolvent_apply(op: DiscreteOperator, alpha: float, f: np.ndarray) -> np.ndarray:
    """Solve ``(alpha - L) u = f``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    u = op.solver(float(alpha))(op.mass * np.asarray(f, dtype=float))
    if not np.all(np.isfinite(u)):
        raise NumericError("singular resolvent solve")
    return u


def heat_apply(op: DiscreteOperator, tau: float, f: np.ndarray, spectrum: Optional[Spectrum] = None) -> np.ndarray:
    """``exp(tau L) f`` by spectral expansion, dropping modes with ``exp(-lam tau) < 1e-14``."""
    f = np.asarray(f, dtype=float)
    if tau < 0:
        raise DomainError("time must be nonnegative")
    if tau == 0:
        return f.copy()
    if spectrum is None:
        if op.n_nodes > DENSE_LIMIT:
            logger.info("heat_apply: %d nodes, using Krylov exponential instead of spectral sum", op.n_nodes)
            return expm_multiply(op.generator * tau, f)
        spectrum = full_spectrum(op)
    keep = np.exp(-spectrum.eigenvalues * tau) >= HEAT_CUTOFF
    psi = spectrum.eigenvectors[:, keep]
    coef = psi.T @ (op.mass * f)
    return psi @ (np.exp(-spectrum.eigenvalues[keep] * tau) * coef)


def operator_form(op: DiscreteOperator, u: np.ndarray, v: np.ndarray) -> float:
    """``<u, -L v>_m``."""
    return float(np.sum(op.mass * u * -(op.generator @ v)))


def link_energy(op: DiscreteOperator, u: np.ndarray) -> float:
    """The same quadratic form written as ``sum_links c (u_i - u_j)^2``."""
    return float(np.sum(link_terms(op, u)))


def link_terms(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    d = u[op.link_i] - u[op.link_j]
    return op.link_c * d * d


def unit_contraction(u: np.ndarray) -> np.ndarray:
    """Nodewise ``(u v 0) ^ 1``."""
    return np.clip(u, 0.0, 1.0)


def pullback_operator_pair(params, n: int, m: int, h: Number) -> tuple[DiscreteOperator, DiscreteOperator]:
    """Operators on ``F_n`` and ``F_m`` sharing the grid step ``h``."""
    proj = build_projection(params, n, m)
    return DiscreteOperator(proj.source, Fraction(h)), DiscreteOperator(proj.target, Fraction(h))
