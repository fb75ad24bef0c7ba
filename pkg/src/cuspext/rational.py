"""Exact exponent bookkeeping.

Exponents travel as :class:`fractions.Fraction`; the only non-rational value
allowed is ``math.inf``.
"""

import math
from fractions import Fraction
from typing import Union

Exponent = Union[Fraction, float]

INF = math.inf
_INF_WORDS = {"inf", "infinity", "oo", "∞", "+inf"}


def parse_exponent(value) -> Exponent:
    """Parse ``"7/3"``, ``"2"``, ``"1.5"``, ``"inf"`` (or numbers) exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not an exponent: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return INF
        if not math.isfinite(value):
            raise ValueError(f"not an exponent: {value!r}")
        # decimal literal semantics: 1.5 -> 3/2, 0.1 -> 1/10
        return Fraction(repr(value))
    text = str(value).strip().lower()
    if text in _INF_WORDS:
        return INF
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exponent: {value!r}") from exc


def is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def format_exponent(x) -> str:
    if is_inf(x):
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def to_float(x) -> float:
    return math.inf if is_inf(x) else float(x)
