"""Dense univariate polynomials as coefficient tuples (ascending powers).

Coefficients may be Fractions (exact) or floats; every routine here is
generic over the number type except the root finders, which go through numpy.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

Coeffs = tuple


def trim(c: Sequence) -> Coeffs:
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c) if c else (Fraction(0),)


def evaluate(c: Sequence, s):
    acc = 0 * s
    for a in reversed(c):
        acc = acc * s + a
    return acc


def derivative(c: Sequence) -> Coeffs:
    if len(c) <= 1:
        return (0 * c[0],) if c else (Fraction(0),)
    return tuple(k * c[k] for k in range(1, len(c)))


def antiderivative(c: Sequence) -> Coeffs:
    return (0 * c[0],) + tuple(a / (k + 1) if isinstance(a, float) else Fraction(a) / (k + 1)
                               for k, a in enumerate(c))


def add(a: Sequence, b: Sequence) -> Coeffs:
    n = max(len(a), len(b))
    return tuple((a[k] if k < len(a) else 0) + (b[k] if k < len(b) else 0) for k in range(n))


def scale(a: Sequence, r) -> Coeffs:
    return tuple(r * v for v in a)


def multiply(a: Sequence, b: Sequence) -> Coeffs:
    out = [0 * a[0] * b[0]] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return tuple(out)


def shift(c: Sequence, d) -> Coeffs:
    """Coefficients of ``s -> p(s + d)``."""
    out = [0 * d * c[0]] * len(c)
    for k, a in enumerate(c):
        for i in range(k + 1):
            out[i] = out[i] + a * comb(k, i) * d ** (k - i)
    return tuple(out)


def integral(c: Sequence, a, b):
    F = antiderivative(c)
    return evaluate(F, b) - evaluate(F, a)


def real_roots_in(c: Sequence, a: float, b: float) -> list[float]:
    """Sorted real roots strictly inside ``(a, b)`` (floating point)."""
    coeffs = np.array([float(v) for v in trim(c)])
    if len(coeffs) <= 1:
        return []
    roots = np.polynomial.polynomial.polyroots(coeffs)
    scale_ = max(1.0, abs(a), abs(b))
    out = [float(r.real) for r in roots if abs(r.imag) <= 1e-10 * scale_ and a < r.real < b]
    return sorted(out)


def total_variation(c: Sequence, a, b) -> float:
    """``int_a^b |p'(s)| ds``, summed over the monotone pieces of ``p``."""
    if b < a:
        a, b = b, a
    knots = [a, *real_roots_in(derivative(c), float(a), float(b)), b]
    return sum(abs(evaluate(c, knots[i + 1]) - evaluate(c, knots[i])) for i in range(len(knots) - 1))


def abs_integral(c: Sequence, a, b) -> float:
    """``int_a^b |p(s)| ds`` with the sign changes of ``p`` located numerically."""
    if b < a:
        a, b = b, a
    F = antiderivative(c)
    knots = [a, *real_roots_in(c, float(a), float(b)), b]
    return sum(abs(evaluate(F, knots[i + 1]) - evaluate(F, knots[i])) for i in range(len(knots) - 1))
