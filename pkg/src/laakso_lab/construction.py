"""Exact combinatorics of the Laakso construction (single Cantor factor).

The contraction ratio ``t`` fixes the Cantor dimension ``ln 2 / ln(1/t) = Q - 1``.
Wormholes of level ``l`` sit at the points ``w(m_1, ..., m_l)``; with
``J_l = j_1 * ... * j_l`` these are exactly the fractions ``k / J_l`` whose
numerator is not a multiple of ``j_l``.  All locations are kept as
:class:`fractions.Fraction`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterator, Optional

from ._rational import Number
from .errors import ConstructionError, DomainError, RangeError

# A Cantor address is a string over {"0", "1"}; bit l is ``address[l - 1]``.
CantorAddress = str

_SNAP_DENOMINATOR = 1000
_DIMENSION_TOL = 1e-12


@dataclass(frozen=True)
class ContractionParams:
    """Parameters that seed the whole construction.

    ``t_bracket`` is a rational interval known to contain the true ratio; it
    collapses to a point when ``t`` is rational.
    """

    Q: float
    t: float
    j: int
    j_seq: tuple[int, ...]
    t_bracket: tuple[Fraction, Fraction]

    @property
    def depth_limit(self) -> int:
        return len(self.j_seq)

    @property
    def t_exact(self) -> Optional[Fraction]:
        lo, hi = self.t_bracket
        return lo if lo == hi else None

    def grid_denominator(self, n: int) -> int:
        """``J_n``: every wormhole of level <= n is a multiple of ``1/J_n``."""
        self.check_level(n)
        return math.prod(self.j_seq[:n])

    def check_level(self, n: int) -> None:
        if n < 0 or n > self.depth_limit:
            raise RangeError(f"level {n} outside 0..{self.depth_limit}")

    def to_json(self) -> dict:
        return {
            "Q": self.Q,
            "t_num_approx": self.t,
            "j": self.j,
            "j_seq": list(self.j_seq),
            "depth": self.depth_limit,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ContractionParams":
        try:
            Q = float(data["Q"])
            depth = int(data["depth"])
            j_seq = tuple(int(v) for v in data["j_seq"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed params object: {exc}") from exc
        params = params_from_dimension(Q, depth)
        if params.j_seq == j_seq:
            return params
        if len(j_seq) != depth:
            raise DomainError("j_seq length does not match depth")
        for m in range(1, depth + 1):
            if j_seq[m - 1] not in (params.j, params.j + 1) or not balance_holds(
                params.j, j_seq[:m], params.t_bracket
            ):
                raise ConstructionError(f"j_seq prefix of length {m} violates the balance bound")
        return ContractionParams(params.Q, params.t, params.j, j_seq, params.t_bracket)


def _bracket_for_dimension(Q: float, t: float) -> tuple[Fraction, Fraction]:
    # snap to a small-denominator rational when it reproduces Q to 1e-12
    snapped = Fraction(t).limit_denominator(_SNAP_DENOMINATOR)
    if 0 < snapped < 1 and abs(math.log(2) / math.log(1 / snapped) - (Q - 1)) <= _DIMENSION_TOL:
        return snapped, snapped
    lo = math.nextafter(math.nextafter(t, 0.0), 0.0)
    hi = math.nextafter(math.nextafter(t, 1.0), 1.0)
    return Fraction(lo), Fraction(hi)


def _bracket(t: Number | str) -> tuple[Fraction, Fraction]:
    if isinstance(t, (Fraction, int, str)):
        q = Fraction(t)
        return q, q
    # a float given by the caller is read as the decimal it prints as
    q = Fraction(repr(float(t)))
    return q, q


def _base_integer(bracket: tuple[Fraction, Fraction]) -> int:
    lo, hi = bracket
    j = math.floor(1 / ((lo + hi) / 2))
    if not (Fraction(1, j + 1) < lo and hi <= Fraction(1, j)):
        raise ConstructionError(f"ratio bracket [{lo}, {hi}] straddles 1/{j}")
    return j


def balance_holds(j: int, prefix: tuple[int, ...] | list[int], bracket: tuple[Fraction, Fraction]) -> bool:
    """Exact check of ``j/(j+1) / P <= t^m <= (j+1)/j / P`` with ``P = prod(prefix)``.

    The inequality must hold for every ``t`` in ``bracket``.
    """
    m = len(prefix)
    P = math.prod(prefix)
    lo, hi = bracket
    return Fraction(j, (j + 1) * P) <= lo**m and hi**m <= Fraction(j + 1, j * P)


def _balanced_sequence(j: int, bracket: tuple[Fraction, Fraction], depth: int) -> tuple[int, ...]:
    ln_t = math.log(float((bracket[0] + bracket[1]) / 2))
    seq: list[int] = []
    log_sum = 0.0
    for m in range(1, depth + 1):
        # ties go to the smaller value because sorted() is stable
        options = sorted((j, j + 1), key=lambda c: abs(log_sum + math.log(c) + m * ln_t))
        for choice in options:
            if balance_holds(j, seq + [choice], bracket):
                seq.append(choice)
                log_sum += math.log(choice)
                break
        else:
            raise ConstructionError(f"no admissible j_{m} for t in [{bracket[0]}, {bracket[1]}]")
    return tuple(seq)


def j_sequence(t: Number | str, depth: int) -> list[int]:
    """Canonical sequence ``j_1..j_depth`` with every prefix balanced against ``t^m``.

    At each step the candidate in ``{j, j+1}`` minimizing
    ``|sum(ln j_i) + m ln t|`` is taken, ties to the smaller integer.
    """
    bracket = _bracket(t)
    if not (0 < bracket[0] and bracket[1] <= Fraction(1, 2)):
        raise DomainError(f"t must lie in (0, 1/2], got {t}")
    if depth < 1:
        raise DomainError("depth must be positive")
    return list(_balanced_sequence(_base_integer(bracket), bracket, depth))


def params_from_ratio(t: Number | str, depth: int) -> ContractionParams:
    bracket = _bracket(t)
    if not (0 < bracket[0] and bracket[1] <= Fraction(1, 2)):
        raise DomainError(f"t must lie in (0, 1/2], got {t}")
    if depth < 1:
        raise DomainError("depth must be positive")
    j = _base_integer(bracket)
    t_float = float(bracket[0])
    Q = 1 + math.log(2) / math.log(1 / t_float)
    return ContractionParams(Q, t_float, j, _balanced_sequence(j, bracket, depth), bracket)


def params_from_dimension(Q: float, depth: int) -> ContractionParams:
    """Solve ``ln 2 / ln(1/t) = Q - 1`` and build the balanced j-sequence."""
    if not (1 < Q <= 2):
        raise DomainError(f"Q must lie in (1, 2], got {Q}")
    if depth < 1:
        raise DomainError("depth must be positive")
    t = 2.0 ** (-1.0 / (Q - 1.0))
    bracket = _bracket_for_dimension(Q, t)
    if bracket[0] == bracket[1]:
        t = float(bracket[0])
    j = _base_integer(bracket)
    return ContractionParams(float(Q), t, j, _balanced_sequence(j, bracket, depth), bracket)


@dataclass(frozen=True)
class WormholeSet:
    level: int
    locations: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.locations)

    def __contains__(self, x: object) -> bool:
        return x in self.locations


@lru_cache(maxsize=None)
def wormhole_locations(params: ContractionParams, l: int) -> WormholeSet:
    """Sorted exact locations of the level-``l`` wormholes."""
    if l < 1:
        raise DomainError("wormhole levels start at 1")
    if l > params.depth_limit:
        raise RangeError(f"level {l} exceeds depth limit {params.depth_limit}")
    J = params.grid_denominator(l)
    jl = params.j_seq[l - 1]
    return WormholeSet(l, tuple(Fraction(k, J) for k in range(1, J) if k % jl))


def wormhole_level(params: ContractionParams, x: Fraction, max_level: Optional[int] = None) -> Optional[int]:
    """Level of the wormhole at ``x``, or None if ``x`` is not one (up to ``max_level``)."""
    x = Fraction(x)
    if not 0 < x < 1:
        return None
    top = params.depth_limit if max_level is None else min(max_level, params.depth_limit)
    J = 1
    for l in range(1, top + 1):
        J *= params.j_seq[l - 1]
        if (x * J).denominator == 1:
            return l
    return None


def addresses(n: int) -> Iterator[CantorAddress]:
    """All length-``n`` addresses in lexicographic order."""
    for bits in product("01", repeat=n):
        yield "".join(bits)


def flip_bit(a: CantorAddress, l: int) -> CantorAddress:
    return a[: l - 1] + ("1" if a[l - 1] == "0" else "0") + a[l:]


def _check_address(a: CantorAddress) -> None:
    if any(c not in "01" for c in a):
        raise DomainError(f"address {a!r} is not a binary string")


def identified(params: ContractionParams, x: Fraction, a: CantorAddress, b: CantorAddress, n: int) -> bool:
    """Whether ``(x, a)`` and ``(x, b)`` are glued in the level-``n`` space.

    They are glued iff ``a == b`` or ``x`` is a wormhole of some level ``l <= n``
    and the addresses differ exactly in bit ``l``.
    """
    _check_address(a)
    _check_address(b)
    if len(a) != n or len(b) != n:
        raise DomainError(f"addresses must both have length {n}")
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise DomainError(f"x = {x} outside [0, 1]")
    if a == b:
        return True
    l = wormhole_level(params, x, n)
    return l is not None and b == flip_bit(a, l)


def canonical_sheet(params: ContractionParams, x: Fraction, a: CantorAddress) -> CantorAddress:
    """Smallest address in the identification class of ``(x, a)``."""
    l = wormhole_level(params, x, len(a))
    if l is None or a[l - 1] == "0":
        return a
    return flip_bit(a, l)


def refines(a: CantorAddress, b: CantorAddress) -> bool:
    """True if the cell ``K_a`` is contained in ``K_b``."""
    return a.startswith(b)
