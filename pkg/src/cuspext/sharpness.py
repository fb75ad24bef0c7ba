"""Necessity oracles: fiber lower bounds, threshold tables and the exponential cusp.

Fiber bound: along a fiber of length ``w`` crossing the cusp (an arc for the
model cusp, a vertical segment for a channel), one-dimensional Hölder gives
``osc**Q <= w**(Q-1) * int_fiber |grad v|**Q``.  Integrating over the fibers,
``int osc**Q w**(1-Q)`` bounds from below the ``L^Q`` gradient norm of every
extension whose boundary values jump by ``osc`` across the cusp.
"""

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .geometry import CuspChannel, CuspProfile, QuadratureSpec, cusp_angle, graded_mesh
from .integrability import DIVERGENT, FINITE, IntegralSeries, integrate_distortion
from .maps import VerticalCuspStretch
from .rational import format_exponent, is_inf, parse_exponent, to_float
from .thresholds import (
    distortion_q_star,
    distortion_threshold,
    fiber_critical_Q,
    inward_threshold,
    outward_threshold,
)

ADMISSIBLE = "admissible"
EXCLUDED = "excluded"
CRITICAL = "critical"

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

#: One-dimensional fiber integrals are cheap, so they default to deep cutoffs.
FIBER_SPEC = QuadratureSpec(levels=40, stride=4)


def _fiber_width(profile: CuspProfile, fibers: str):
    if fibers == "angular":
        if profile.kind != "power":
            raise ConfigurationError("angular fibers need the power (model) cusp")
        s = profile.s
        return lambda r: 2.0 * cusp_angle(r, s) * r
    if fibers == "vertical":
        return lambda x: 2.0 * profile(x)
    raise ConfigurationError(f"fibers must be 'angular' or 'vertical', got {fibers!r}")


def model_oscillation(gamma):
    """``2 r**gamma``: trace oscillation model of the angular-jump family."""
    return lambda r: 2.0 * np.power(r, gamma)


def exact_oscillation(gamma, s):
    """``2 r**gamma (1 - alpha(r)/pi)``: exact edge jump of the angular-jump function."""
    return lambda r: 2.0 * np.power(r, gamma) * (1.0 - cusp_angle(r, s) / math.pi)


def fiber_lower_bound(gamma: float, profile: CuspProfile, Q, spec: QuadratureSpec = FIBER_SPEC,
                      fibers: Optional[str] = None, osc: Union[str, Callable] = "model",
                      r_max: float = 1.0) -> IntegralSeries:
    """Cutoff series of ``int_eps^r_max osc(r)**Q width(r)**(1-Q) dr``.

    Parameters
    ----------
    gamma : float
        Exponent of the oscillation model.
    profile : CuspProfile
        A power profile of degree ``s`` means the model polar cusp (angular
        fibers of length ``pi r**s``); other profiles use vertical fibers of
        length ``2 rho(x)``.
    Q : rational
        Target exponent.  ``Q <= 1`` is flagged: the width factor no longer
        penalizes thin fibers.
    osc : {"model", "exact"} or callable
        ``model`` is ``2 r**gamma``; ``exact`` is the edge jump of the
        angular-jump function (model cusp only).
    """
    Q = parse_exponent(Q)
    Qf = to_float(Q)
    if fibers is None:
        fibers = "angular" if profile.kind == "power" else "vertical"
    width = _fiber_width(profile, fibers)
    if callable(osc):
        osc_fn = osc
    elif osc == "model":
        osc_fn = model_oscillation(gamma)
    elif osc == "exact":
        if fibers != "angular":
            raise ConfigurationError("exact oscillation is defined for the model cusp only")
        osc_fn = exact_oscillation(gamma, profile.s)
    else:
        raise ConfigurationError(f"unknown oscillation model {osc!r}")
    flags = []
    if Qf <= 1:
        flags.append("Q <= 1: width factor is trivial")
    m = spec.layers_per_octave * spec.stride
    shells = []
    for j in range(spec.levels):
        hi = min(spec.cutoff(j), r_max)
        lo = spec.cutoff(j + 1)
        if lo >= hi:
            shells.append(0.0)
            continue
        edges = hi * (lo / hi) ** (np.arange(m + 1) / m)
        a, b = edges[1:], edges[:-1]
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        x = mid[:, None] + half[:, None] * _GL_X[None, :]
        with np.errstate(over="ignore", divide="ignore"):
            vals = np.power(osc_fn(x), Qf) * np.power(width(x), 1.0 - Qf)
        contrib = half[:, None] * _GL_W[None, :] * vals
        total = contrib.ravel()
        if not np.all(np.isfinite(total)):
            shells.append(math.inf)
        else:
            shells.append(math.fsum(total.tolist()))
    values = [0.0]
    acc = []
    for v in shells:
        acc.append(v)
        values.append(math.inf if any(math.isinf(t) for t in acc) else math.fsum(acc))
    label = f"fiber bound Q={format_exponent(Q)} gamma={gamma:g}"
    return IntegralSeries.build(values, spec.cutoffs(), Q, f"{fibers} fibers", flags=flags, label=label)


def fiber_verdict_symbolic(gamma, s, Q) -> str:
    """``finite`` iff ``gamma Q + s(1-Q) > -1`` (power cusp of degree ``s``)."""
    e = gamma * float(Q) + float(s) * (1.0 - float(Q))
    if e > -1:
        return FINITE
    return DIVERGENT


# ---------------------------------------------------------------------------
# Threshold tables


def _verdict(s, bound) -> str:
    if is_inf(bound):
        return ADMISSIBLE
    if s < bound:
        return ADMISSIBLE
    if s == bound:
        return CRITICAL
    return EXCLUDED


def fiber_s_critical(p, q):
    """Degree where the fiber exponent vanishes for the sharpest ``W^{1,p}`` member.

    The angular-jump function with ``gamma`` just above ``1 - 2/p`` lies in
    ``W^{1,p}`` of the cusp domain; its fiber bound in ``L^q`` diverges iff
    ``s >= (1 + gamma q)/(q - 1)``.
    """
    p, q = parse_exponent(p), parse_exponent(q)
    gamma = Fraction(1) if is_inf(p) else 1 - 2 / p
    if is_inf(q):
        return gamma
    return (1 + gamma * q) / (q - 1)


@dataclass(frozen=True)
class RegionTable:
    """Per-cell verdicts of every threshold rule on a rational ``(p, q, s)`` grid."""

    rows: List[dict]

    COLUMNS = ("p", "q", "s", "outward_bound", "outward", "inward_bound", "inward",
               "distortion_bound", "distortion", "fiber_bound", "fiber", "Q_star", "q_star")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row[k] if isinstance(row[k], str) else format_exponent(row[k])
                             for k in self.COLUMNS})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def lookup(self, p, q, s) -> dict:
        p, q, s = parse_exponent(p), parse_exponent(q), parse_exponent(s)
        for row in self.rows:
            if row["p"] == p and row["q"] == q and row["s"] == s:
                return row
        raise KeyError((p, q, s))


def threshold_scan(p_values: Sequence, q_values: Sequence, s_values: Sequence) -> RegionTable:
    """Exact verdicts of the outward, inward, distortion and fiber rules."""
    rows = []
    for p in map(parse_exponent, p_values):
        for q in map(parse_exponent, q_values):
            out_b = outward_threshold(p, q)
            in_b = inward_threshold(p, q)
            dist_b = distortion_threshold(p, q)
            fib_b = fiber_s_critical(p, q)
            for s in map(parse_exponent, s_values):
                if is_inf(s) or s <= 1:
                    raise ConfigurationError("degrees must be finite rationals > 1")
                rows.append({
                    "p": p, "q": q, "s": s,
                    "outward_bound": out_b, "outward": _verdict(s, out_b),
                    "inward_bound": in_b, "inward": _verdict(s, in_b),
                    "distortion_bound": dist_b, "distortion": _verdict(s, dist_b),
                    "fiber_bound": fib_b, "fiber": _verdict(s, fib_b),
                    "Q_star": fiber_critical_Q(s), "q_star": distortion_q_star(s),
                })
    return RegionTable(rows)


def phase_diagram(p, path, q_min: float = 1.05, q_max: float = 8.0, s_max: float = 6.0) -> str:
    """SVG plot of every rule's critical degree ``s`` against ``q`` at fixed ``p``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    p = parse_exponent(p)
    qs = np.linspace(q_min, q_max, 400)
    curves = {
        "outward 2p/q - 1": outward_threshold,
        "inward (pq+p-2q)/(pq-p)": inward_threshold,
        "distortion (pq+p+2q)/(pq-p)": distortion_threshold,
    }
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, fn in curves.items():
        ys = [to_float(fn(p, Fraction(float(q)).limit_denominator(10**6))) for q in qs]
        ax.plot(qs, ys, label=label)
    ax.plot(qs, (qs + 1) / (qs - 1), "k--", label="built-in map (q+1)/(q-1)")
    ax.set_xlabel("q")
    ax.set_ylabel("critical s")
    ax.set_ylim(1.0, s_max)
    ax.set_title(f"critical degrees at p = {format_exponent(p)}")
    ax.legend(fontsize=8)
    plt.rcParams["svg.hashsalt"] = "cuspext"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(path)


# ---------------------------------------------------------------------------
# Exponential cusp


DEMO_QS = ("101/100", "3/2", "2")
DEMO_GAMMA = 0.1


def l1_quasidisk_demo(spec: QuadratureSpec = QuadratureSpec(), gamma: float = DEMO_GAMMA,
                      Qs: Sequence = DEMO_QS) -> dict:
    """Exponential cusp: integrable distortion yet no ``(p, q)`` extension.

    Part (a) integrates ``K`` of the vertical stretch over the channel
    ``|y| < e exp(-1/x)`` and compares with the closed form 1.  Part (b)
    evaluates fiber bounds for ``Q > 1``; part (c) the ``Q = 1`` bound.
    """
    prof = CuspProfile.exponential()
    channel = CuspChannel(prof)
    stretch = VerticalCuspStretch(prof)
    k_series = integrate_distortion(stretch, channel, 1, spec)
    oracle = 1.0
    k_value = k_series.final
    # Jacobian integral: area of the straightened channel {|y| < x}

    mesh = graded_mesh(channel, spec)
    jac = np.abs(stretch.det(mesh.centers))
    j_series = IntegralSeries.build(mesh.level_sums(jac * mesh.areas), mesh.cutoffs, None,
                                    "channel", label="int J")
    part_a = {
        "integral_K": k_value,
        "series": k_series.to_dict(),
        "oracle": oracle,
        "relative_error": k_value / oracle - 1.0,
        "within_1pct": abs(k_value / oracle - 1.0) <= 0.01,
        "verdict": k_series.verdict,
        "integral_J": j_series.final,
        "integral_J_relative_error": j_series.final / oracle - 1.0,
    }
    part_b = []
    for Q in Qs:
        fb = fiber_lower_bound(gamma, prof, Q, spec, fibers="vertical")
        part_b.append({"Q": format_exponent(parse_exponent(Q)), "verdict": fb.verdict,
                       "flags": list(fb.flags), "series": fb.to_dict()})
    fb1 = fiber_lower_bound(gamma, prof, 1, spec, fibers="vertical")
    part_c = {"Q": "1", "verdict": fb1.verdict, "value": fb1.final, "series": fb1.to_dict()}
    return {
        "gamma": gamma,
        "a_distortion_integrable": part_a,
        "b_fiber_bounds": part_b,
        "c_q_equals_1": part_c,
        "all_b_divergent": all(b["verdict"] == DIVERGENT for b in part_b),
        "c_finite": part_c["verdict"] == FINITE,
    }
