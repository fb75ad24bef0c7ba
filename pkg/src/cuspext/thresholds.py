"""Exact threshold formulas shared by the extension and sharpness modules.

All functions take and return :class:`fractions.Fraction` (``math.inf`` is the
only non-rational value) so that identities between them hold exactly.
"""

from fractions import Fraction

from .errors import DomainError
from .rational import INF, Exponent, is_inf, parse_exponent


def _pq(p, q):
    p, q = parse_exponent(p), parse_exponent(q)
    for name, v in (("p", p), ("q", q)):
        if not is_inf(v) and v <= 1:
            raise DomainError(f"{name} must exceed 1, got {v}")
    return p, q


def outward_threshold(p, q) -> Exponent:
    """Outward power cusp: admissible degrees ``s < 2p/q - 1``."""
    p, q = _pq(p, q)
    if is_inf(p):
        return INF
    if is_inf(q):
        return Fraction(-1)
    return 2 * p / q - 1


def inward_threshold(p, q) -> Exponent:
    """Inward power cusp: admissible degrees ``s < (pq + p - 2q)/(pq - p)``."""
    p, q = _pq(p, q)
    if is_inf(p) and is_inf(q):
        return Fraction(1)
    if is_inf(p):
        return (q + 1) / (q - 1)
    if is_inf(q):
        return (p - 2) / p
    return (p * q + p - 2 * q) / (p * q - p)


def distortion_threshold(p, q) -> Exponent:
    """Distortion rule: degrees ``s < (pq + p + 2q)/(pq - p)``."""
    p, q = _pq(p, q)
    if is_inf(p) and is_inf(q):
        return Fraction(1)
    if is_inf(p):
        return (q + 1) / (q - 1)
    if is_inf(q):
        return (p + 2) / p
    return (p * q + p + 2 * q) / (p * q - p)


def distortion_q_star(s) -> Exponent:
    """Largest admissible exponent ``q* = (s+1)/(s-1)`` for ``int K**q`` on the cusp complement."""
    s = parse_exponent(s)
    if is_inf(s):
        return Fraction(1)
    if s <= 1:
        raise DomainError("degree must exceed 1")
    return (s + 1) / (s - 1)


def fiber_critical_Q(s) -> Exponent:
    """Fiber-oracle critical exponent ``Q*(s) = (s+1)/s`` (sharpest member ``gamma -> 0``)."""
    s = parse_exponent(s)
    if is_inf(s):
        return Fraction(1)
    if s <= 1:
        raise DomainError("degree must exceed 1")
    return (s + 1) / s


def fiber_exponent(gamma, s, Q):
    """Exponent ``gamma Q + s(1 - Q)`` of the fiber integrand; divergence iff ``<= -1``."""
    return gamma * Q + s * (1 - Q)
