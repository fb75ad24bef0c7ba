from fractions import Fraction

import pytest

from cuspext.errors import DomainError
from cuspext.rational import INF, format_exponent, parse_exponent
from cuspext.thresholds import (
    distortion_q_star,
    distortion_threshold,
    fiber_critical_Q,
    fiber_exponent,
    inward_threshold,
    outward_threshold,
)


@pytest.mark.parametrize("text, value", [
    ("7/3", Fraction(7, 3)), ("2", Fraction(2)), ("1.5", Fraction(3, 2)), (0.1, Fraction(1, 10)),
    (3, Fraction(3)), ("inf", INF), ("∞", INF), (float("inf"), INF),
])
def test_parse(text, value):
    assert parse_exponent(text) == value


@pytest.mark.parametrize("bad", ["x", "1/0", float("nan"), True])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_exponent(bad)


def test_format():
    assert format_exponent(Fraction(8, 5)) == "8/5"
    assert format_exponent(Fraction(4)) == "4"
    assert format_exponent(INF) == "inf"


def test_rules_at_p4_q2():
    assert outward_threshold(4, 2) == 3
    assert inward_threshold(4, 2) == 2
    assert distortion_threshold(4, 2) == 4


@pytest.mark.parametrize("q", [Fraction(3, 2), 2, 3, 7])
def test_infinite_p_limits(q):
    q = Fraction(q)
    # large finite p approaches the p = inf value
    big = Fraction(10**12)
    assert abs(inward_threshold(big, q) - inward_threshold(INF, q)) < Fraction(1, 10**9)
    assert abs(distortion_threshold(big, q) - distortion_threshold(INF, q)) < Fraction(1, 10**9)
    assert inward_threshold(INF, q) == (q + 1) / (q - 1)


def test_infinite_q_limits():
    big = Fraction(10**12)
    for p in (Fraction(3), Fraction(5, 2)):
        assert abs(inward_threshold(p, big) - inward_threshold(p, INF)) < Fraction(1, 10**9)
        assert abs(distortion_threshold(p, big) - distortion_threshold(p, INF)) < Fraction(1, 10**9)
    assert inward_threshold(INF, INF) == 1
    assert outward_threshold(INF, 2) == INF


def test_q_star_and_fiber():
    assert distortion_q_star(2) == 3
    assert fiber_critical_Q(2) == Fraction(3, 2)
    assert fiber_exponent(Fraction(1, 10), 2, Fraction(7, 5)) == Fraction(-33, 50)


@pytest.mark.parametrize("fn", [outward_threshold, inward_threshold, distortion_threshold])
def test_exponents_above_one(fn):
    with pytest.raises(DomainError):
        fn(1, 2)
