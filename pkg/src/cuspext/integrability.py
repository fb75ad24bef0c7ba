"""Distortion integrability through cutoff series.

An improper integral over a region touching a cusp tip is represented by the
partial integrals ``I_k`` over the region minus ``B(0, eps_k)``.  The verdict
(finite, divergent or inconclusive) is read off the trend of the increments.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError, InsufficientDataError
from .geometry import Domain, QuadratureSpec, cusp_complement, graded_mesh
from .maps import AngularStretch, PlanarMap
from .rational import INF, Exponent, format_exponent, is_inf, parse_exponent, to_float

FINITE = "finite"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"
INSUFFICIENT = "insufficient-data"

RATIO_MAX = 0.9
FINAL_INCREMENT_REL = 1e-4
GROWTH_FACTOR = 10.0


@dataclass(frozen=True)
class IntegralSeries:
    """Partial integrals ``I_0..I_K`` over nested cutoff regions.

    Attributes
    ----------
    values : tuple of float
        ``I_k`` for ``k = 0..K``.
    cutoffs : tuple of float
        Tip radii ``eps_k``.
    verdict : str
        ``finite``, ``divergent``, ``inconclusive`` or ``insufficient-data``.
    flags : tuple of str
        Notes such as ``overflow`` or ``ess-sup estimate``.
    """

    values: Tuple[float, ...]
    cutoffs: Tuple[float, ...] = ()
    exponent: Optional[Exponent] = None
    region: str = ""
    verdict: str = INCONCLUSIVE
    flags: Tuple[str, ...] = ()
    label: str = ""

    @classmethod
    def build(cls, values: Sequence[float], cutoffs=(), exponent=None, region="", flags=(), label=""):
        values = tuple(float(v) for v in values)
        flags = tuple(flags)
        if any(math.isinf(v) for v in values) and "overflow" not in flags:
            flags = flags + ("overflow",)
        try:
            verdict = classify_integrability(values)
        except InsufficientDataError:
            verdict = INSUFFICIENT
        return cls(values, tuple(cutoffs), exponent, region, verdict, flags, label)

    @property
    def levels(self) -> int:
        return len(self.values) - 1

    @property
    def final(self) -> float:
        return self.values[-1]

    @property
    def increments(self) -> Tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.values, self.values[1:]))

    def map_values(self, fn, label=None) -> "IntegralSeries":
        """Series of transformed values (e.g. a P-th root); the verdict is kept."""
        vals = tuple(float(fn(v)) for v in self.values)
        return IntegralSeries(vals, self.cutoffs, self.exponent, self.region, self.verdict,
                              self.flags, self.label if label is None else label)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "region": self.region,
            "exponent": None if self.exponent is None else format_exponent(self.exponent),
            "cutoffs": list(self.cutoffs),
            "values": list(self.values),
            "verdict": self.verdict,
            "flags": list(self.flags),
        }


def _ratio(num, den):
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def _nondecreasing(a, b):
    # tolerate rounding in increments that are equal in exact arithmetic
    return a <= b + 1e-12 * max(abs(a), abs(b))


def classify_integrability(series) -> str:
    """Verdict for a cutoff series (an :class:`IntegralSeries` or a value list).

    Finite: the last two ratios among the last three increments are below 0.9
    and the final increment is at most ``1e-4 * |I_K|``.  Divergent: the last
    three increments are non-decreasing (up to rounding) with a positive final one and
    ``I_K > 10 * I_0``.  Anything else is inconclusive.  Non-finite values
    count as divergent (overflow).
    """
    values = series.values if isinstance(series, IntegralSeries) else tuple(float(v) for v in series)
    if len(values) < 4:
        raise InsufficientDataError(f"classification needs at least 4 cutoff levels, got {len(values)}")
    if any(not math.isfinite(v) for v in values):
        return DIVERGENT
    d = [b - a for a, b in zip(values, values[1:])]
    d1, d2, d3 = d[-3], d[-2], d[-1]
    total = values[-1]
    if (_ratio(d2, d1) < RATIO_MAX and _ratio(d3, d2) < RATIO_MAX
            and abs(d3) <= FINAL_INCREMENT_REL * abs(total)):
        return FINITE
    if _nondecreasing(d1, d2) and _nondecreasing(d2, d3) and d3 > 0 and total > GROWTH_FACTOR * values[0]:
        return DIVERGENT
    return INCONCLUSIVE


def _region_label(region: Domain) -> str:
    cfg = region.to_config()
    return ",".join(f"{k}={v}" for k, v in cfg.items())


def integrate_distortion(planar_map: PlanarMap, region: Domain, p, spec: QuadratureSpec = QuadratureSpec(),
                         r_max: Optional[float] = None) -> IntegralSeries:
    """Cutoff series of ``int K**p`` over ``region``.

    ``p = inf`` yields the running maximum of ``K`` over the sampled cells,
    flagged as an essential-supremum estimate.
    """
    p = parse_exponent(p)
    if not is_inf(p) and p < 1:
        raise DomainError(f"distortion exponent must be >= 1, got {format_exponent(p)}")
    mesh = graded_mesh(region, spec, r_max=r_max)
    K = planar_map.distortion(mesh.centers) if len(mesh) else np.empty(0)
    if is_inf(p):
        return IntegralSeries.build(mesh.level_max(K), mesh.cutoffs, p, _region_label(region),
                                    flags=("ess-sup estimate",), label="sup K")
    with np.errstate(over="ignore"):
        integrand = np.power(K, to_float(p)) * mesh.areas
    return IntegralSeries.build(mesh.level_sums(integrand), mesh.cutoffs, p, _region_label(region),
                                label=f"int K^{format_exponent(p)}")


def closed_form_threshold(family: str, p) -> Exponent:
    """Critical degree ``s* = (p+1)/(p-1)`` of ``int K**p`` near the tip.

    Both the angular stretch on the cusp complement and the vertical stretch
    on a power channel have ``K ~ r**(1-s)`` against an area weight
    ``r**s dr``.  For ``p <= 1`` every degree is admissible (``inf``).
    """
    if family not in ("angular-stretch", "vertical-stretch-power"):
        raise ConfigurationError(f"no closed-form threshold for family {family!r}")
    p = parse_exponent(p)
    if is_inf(p):
        return Fraction(1)
    if p <= 1:
        return INF
    return (p + 1) / (p - 1)


def radial_profile_oracle(s, p) -> Exponent:
    """``int_0^1 r**(p(1-s)+s) dr = 1/((1-s)p+s+1)``; ``inf`` when it diverges."""
    s = parse_exponent(s)
    p = parse_exponent(p)
    e1 = (1 - s) * p + s + 1
    if e1 <= 0:
        return INF
    return 1 / e1


def radial_profile_quadrature(s, p, spec: QuadratureSpec = QuadratureSpec()) -> IntegralSeries:
    """Mesh sums of ``r**(p(1-s))`` over the cusp complement, divided by ``pi``.

    The complement has angular width ``2 alpha(r) = pi r**(s-1)``, so this is
    a two-dimensional quadrature of the radial profile integral.
    """
    s_f, p_f = to_float(parse_exponent(s)), to_float(parse_exponent(p))
    region = cusp_complement(s_f)
    mesh = graded_mesh(region, spec)
    r = np.hypot(mesh.centers[:, 0], mesh.centers[:, 1])
    with np.errstate(over="ignore"):
        vals = np.power(r, p_f * (1.0 - s_f)) * mesh.areas / math.pi
    return IntegralSeries.build(mesh.level_sums(vals), mesh.cutoffs, parse_exponent(p),
                                _region_label(region), label="radial profile")


def angular_stretch_series(s, p, spec: QuadratureSpec = QuadratureSpec()) -> IntegralSeries:
    """``int K**p`` for the angular stretch over its cusp complement."""
    return integrate_distortion(AngularStretch(to_float(parse_exponent(s))), cusp_complement(to_float(parse_exponent(s))), p, spec)


def exp_integrability(planar_map: PlanarMap, region: Domain, lam: float,
                      spec: QuadratureSpec = QuadratureSpec(), r_max: Optional[float] = None) -> IntegralSeries:
    """Cutoff series of ``int exp(lam K)``; overflow counts as divergence and is flagged."""
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    mesh = graded_mesh(region, spec, r_max=r_max)
    K = planar_map.distortion(mesh.centers) if len(mesh) else np.empty(0)
    with np.errstate(over="ignore"):
        integrand = np.exp(lam * K) * mesh.areas
    return IntegralSeries.build(mesh.level_sums(integrand), mesh.cutoffs, None, _region_label(region),
                                label=f"int exp({lam:g} K)")
