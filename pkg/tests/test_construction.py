from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import mpmath
import pytest
from hypothesis import given, strategies as st

from laakso_lab.construction import (ContractionParams, addresses, balance_holds, canonical_sheet, flip_bit,
                                     identified, j_sequence, params_from_dimension, params_from_ratio,
                                     wormhole_level, wormhole_locations)
from laakso_lab.errors import DomainError, RangeError


def balance_oracle(t: float, seq) -> bool:
    """Eq.-style balance check in 50-digit arithmetic, independent of the package."""
    with mpmath.workdps(50):
        t = mpmath.mpf(t)
        j = int(mpmath.floor(1 / t))
        m = len(seq)
        ratio = t**m * math.prod(seq)
        return mpmath.mpf(j) / (j + 1) <= ratio <= mpmath.mpf(j + 1) / j


def exhaustive_sequence(t: float, depth: int) -> tuple[int, ...]:
    """Greedy rule re-derived by brute force over all candidate prefixes."""
    j = int(1 / t)
    seq: tuple[int, ...] = ()
    for m in range(1, depth + 1):
        options = [seq + (c,) for c in (j, j + 1) if balance_oracle(t, seq + (c,))]
        options.sort(key=lambda s: (abs(sum(math.log(v) for v in s) + m * math.log(t)), s[-1]))
        seq = options[0]
    return seq


def brute_wormholes(j_seq, l):
    ranges = [range(j) for j in j_seq[: l - 1]] + [range(1, j_seq[l - 1])]
    out = set()
    for ms in product(*ranges):
        out.add(sum(Fraction(m, math.prod(j_seq[: i + 1])) for i, m in enumerate(ms)))
    return out


def test_dimension_two_gives_binary_sequence():
    p = params_from_dimension(2.0, 5)
    assert p.t == 0.5 and p.j == 2 and p.j_seq == (2,) * 5
    assert p.t_exact == Fraction(1, 2)


def test_ternary_dimension_recovers_one_third(third):
    assert third.t_exact == Fraction(1, 3)
    assert third.j == 3 and third.j_seq == (3,) * 6


def test_ratio_045_mixes_twos_and_threes():
    seq = j_sequence(0.45, 4)
    assert set(seq) <= {2, 3} and 3 in seq
    assert tuple(seq) == exhaustive_sequence(0.45, 4)
    # every candidate sequence in {2,3}^4 that keeps all prefixes balanced
    valid = [s for s in product((2, 3), repeat=4) if all(balance_oracle(0.45, s[:m]) for m in range(1, 5))]
    assert tuple(seq) in valid


@pytest.mark.parametrize("t,depth,expected", [(Fraction(1, 2), 3, [2, 2, 2]), (Fraction(1, 3), 3, [3, 3, 3])])
def test_j_sequence_examples(t, depth, expected):
    assert j_sequence(t, depth) == expected


@given(st.floats(min_value=0.05, max_value=0.5), st.integers(min_value=1, max_value=8))
def test_j_sequence_matches_independent_oracle(t, depth):
    seq = tuple(j_sequence(t, depth))
    assert len(seq) == depth
    assert all(balance_oracle(float(Fraction(repr(t))), seq[:m]) for m in range(1, depth + 1))


@given(st.floats(min_value=1.05, max_value=2.0))
def test_every_prefix_balanced_exactly(Q):
    p = params_from_dimension(Q, 6)
    assert 1 / (p.j + 1) < p.t <= 1 / p.j
    assert all(balance_holds(p.j, p.j_seq[:m], p.t_bracket) for m in range(1, 7))


@pytest.mark.parametrize("Q", [1.0, 0.5, 2.5, float("nan")])
def test_dimension_out_of_range(Q):
    with pytest.raises(DomainError):
        params_from_dimension(Q, 3)


def test_wormhole_examples(half):
    assert wormhole_locations(half, 1).locations == (Fraction(1, 2),)
    assert wormhole_locations(half, 2).locations == (Fraction(1, 4), Fraction(3, 4))


@pytest.mark.parametrize("fixture", ["half", "third"])
def test_wormholes_match_enumeration(fixture, request):
    p = request.getfixturevalue(fixture)
    for l in range(1, 7):
        locs = wormhole_locations(p, l)
        assert set(locs.locations) == brute_wormholes(p.j_seq, l)
        assert len(locs) == (p.j_seq[l - 1] - 1) * math.prod(p.j_seq[: l - 1])
        assert list(locs.locations) == sorted(locs.locations)


def test_wormhole_level_beyond_depth(half):
    with pytest.raises(RangeError):
        wormhole_locations(half, 7)
    with pytest.raises(DomainError):
        wormhole_locations(half, 0)


def test_wormhole_levels_disjoint(third):
    seen = set()
    for l in range(1, 6):
        s = set(wormhole_locations(third, l).locations)
        assert not (s & seen)
        assert all(wormhole_level(third, x) == l for x in s)
        seen |= s


def test_identified_examples(half):
    assert identified(half, Fraction(1, 2), "01", "11", 2)
    assert not identified(half, Fraction(1, 2), "01", "00", 2)
    assert identified(half, Fraction(1, 4), "01", "00", 2)
    assert identified(half, Fraction(1, 3), "10", "10", 2)
    with pytest.raises(DomainError):
        identified(half, Fraction(1, 2), "0", "11", 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_identification_is_equivalence(third, n):
    addr = list(addresses(n))
    xs = sorted({x for l in range(1, n + 1) for x in wormhole_locations(third, l).locations}) + [Fraction(1, 7)]
    for x in xs:
        rel = {(a, b) for a in addr for b in addr if identified(third, x, a, b, n)}
        assert all((a, a) in rel for a in addr)
        assert all((b, a) in rel for a, b in rel)
        assert all((a, c) in rel for a, b in rel for b2, c in rel if b == b2)
        for a in addr:
            c = canonical_sheet(third, x, a)
            assert identified(third, x, a, c, n) and c <= a


def test_flip_and_addresses():
    assert list(addresses(2)) == ["00", "01", "10", "11"]
    assert flip_bit("010", 2) == "000"


def test_params_json_roundtrip(half, third):
    for p in (half, third, params_from_ratio(0.45, 5)):
        q = ContractionParams.from_json(p.to_json())
        assert q.j_seq == p.j_seq and q.j == p.j


def test_grid_denominator(third):
    assert third.grid_denominator(3) == 27
    with pytest.raises(RangeError):
        third.grid_denominator(7)
