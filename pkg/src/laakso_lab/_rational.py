"""Helpers for exact rationals and their text form."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[Fraction, float, int]


def format_rational(q: Fraction) -> str:
    """Serialize as ``"p/q"``, always with an explicit denominator."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(str(text).strip())


def as_exact(value: Number) -> Fraction:
    """Exact rational for ints, Fractions and the binary value of a float."""
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(float(value))


def is_exact(value: object) -> bool:
    return isinstance(value, Rational)
