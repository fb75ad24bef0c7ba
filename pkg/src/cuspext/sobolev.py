"""Analytic test functions, Sobolev seminorms and the Poincaré step."""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, EvaluationError, PreconditionError
from .geometry import (
    TWO_PI,
    BallR,
    CartesianInwardCusp,
    CartesianOutwardCusp,
    ComplementInBall,
    CuspChannel,
    Domain,
    HalfDisk,
    PolarModelCusp,
    QuadratureSpec,
    _points,
    _unwrap,
    graded_mesh,
)
from .integrability import DIVERGENT, FINITE, IntegralSeries, _region_label
from .rational import format_exponent, is_inf, parse_exponent, to_float

FAMILIES = ("radial-power", "angular-jump", "smooth-bump", "constant", "linear")
BUMP_CENTER = (0.25, 0.0)

#: Deep, coarse-angle mesh used when a membership verdict needs slow tails.
MEMBERSHIP_SPEC = QuadratureSpec(n=16, levels=40, stride=8)


@dataclass(frozen=True)
class TestFunction:
    """Closed-form function with analytic gradient.

    Families
    --------
    radial-power
        ``u = r**gamma``.
    angular-jump
        ``u = r**gamma (theta - pi)/pi`` with ``theta`` in ``[0, 2pi)``; the
        branch cut runs along the positive real axis, inside the cusp
        complement, so the function is smooth on the model cusp domain.
    smooth-bump
        ``u = exp(-gamma |z - (1/4, 0)|**2)``.
    constant
        ``u = value``.
    linear
        ``u = x``.
    """

    __test__ = False  # not a pytest class

    family: str
    gamma: float = 0.0
    value: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown test-function family {self.family!r}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "value", float(self.value))

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        r = np.hypot(x, y)
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam == "radial-power":
                out = np.ones_like(r) if self.gamma == 0 else r**self.gamma
            elif fam == "angular-jump":
                t = np.mod(np.arctan2(y, x), TWO_PI)
                out = r**self.gamma * (t - math.pi) / math.pi
            elif fam == "smooth-bump":
                out = np.exp(-self.gamma * ((x - BUMP_CENTER[0]) ** 2 + (y - BUMP_CENTER[1]) ** 2))
            elif fam == "constant":
                out = np.full_like(r, self.value)
            else:
                out = x.copy()
        return _unwrap(out, single)

    def gradient(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        r = np.hypot(x, y)
        fam = self.family
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if fam == "radial-power":
                if g == 0:
                    grad = np.zeros_like(pts)
                else:
                    f = g * r ** (g - 2.0)
                    grad = np.stack([f * x, f * y], axis=-1)
            elif fam == "angular-jump":
                t = np.mod(np.arctan2(y, x), TWO_PI)
                dr = g * r ** (g - 1.0) * (t - math.pi) / math.pi
                dt = r ** (g - 1.0) / math.pi
                c, s = x / r, y / r
                grad = np.stack([dr * c - dt * s, dr * s + dt * c], axis=-1)
            elif fam == "smooth-bump":
                u = self.eval(pts)
                grad = np.stack([-2 * g * (x - BUMP_CENTER[0]) * u, -2 * g * (y - BUMP_CENTER[1]) * u], axis=-1)
            elif fam == "constant":
                grad = np.zeros_like(pts)
            else:
                grad = np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)
        bad = ~np.all(np.isfinite(grad), axis=1)
        if np.any(bad):
            raise EvaluationError(f"gradient of {fam} is undefined", pts[int(np.argmax(bad))])
        return _unwrap(grad, single)

    def grad_norm(self, z):
        grad = self.gradient(z)
        return np.hypot(grad[..., 0], grad[..., 1])

    def edge_values(self, r, s):
        """Limits on the two edges ``theta = alpha(r)`` and ``2pi - alpha(r)`` of the model cusp."""
        r = np.asarray(r, dtype=float)
        a = 0.5 * math.pi * r ** (float(s) - 1.0)
        lo = self.eval(np.stack([r * np.cos(a), r * np.sin(a)], axis=-1))
        hi = self.eval(np.stack([r * np.cos(-a), r * np.sin(-a)], axis=-1))
        return lo, hi

    def to_config(self):
        cfg = {"family": self.family, "gamma": self.gamma}
        if self.family == "constant":
            cfg["value"] = self.value
        return cfg


def function_from_config(cfg) -> TestFunction:
    if isinstance(cfg, TestFunction):
        return cfg
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ConfigurationError(f"function config needs a 'family': {cfg!r}")
    return TestFunction(str(cfg["family"]), float(cfg.get("gamma", 0.0)), float(cfg.get("value", 1.0)))


# ---------------------------------------------------------------------------
# Symbolic rules


def _origin_weight(domain: Domain) -> Optional[float]:
    """Exponent ``w`` with ``|domain cap {|z| ~ r}| ~ r**w dr`` near the origin.

    ``None`` means the origin is not in the closure of the domain; ``inf``
    means the domain is flatter than every power (exponential channel).
    """
    if isinstance(domain, BallR):
        if domain.center == (0.0, 0.0):
            return 1.0
        return 1.0 if math.hypot(*domain.center) <= domain.radius else None
    if isinstance(domain, (HalfDisk, PolarModelCusp, CartesianInwardCusp)):
        return 1.0
    if isinstance(domain, (CuspChannel, CartesianOutwardCusp)):
        prof = domain.profile
        return prof.s if prof.kind == "power" else (math.inf if prof.kind == "exponential" else float("nan"))
    if isinstance(domain, ComplementInBall):
        inner = domain.inner
        if isinstance(inner, BallR):
            return None if inner.center == (0.0, 0.0) and inner.radius > 0 else float("nan")
        if isinstance(inner, PolarModelCusp):
            return inner.s
        if isinstance(inner, CartesianInwardCusp):
            prof = inner.profile
            return prof.s if prof.kind == "power" else (math.inf if prof.kind == "exponential" else float("nan"))
    return float("nan")


def _meets_cut(domain: Domain) -> bool:
    r = np.geomspace(1e-9, 4.0, 4001)
    pts = np.stack([r, np.zeros_like(r)], axis=-1)
    return bool(np.any(domain.contains(pts)))


def symbolic_membership(u: TestFunction, domain: Domain, P) -> Tuple[Optional[bool], str]:
    """Closed-form membership of ``grad u`` in ``L^P(domain)``.

    Returns ``(verdict, rule)``; ``verdict`` is ``None`` when no rule applies.
    """
    P = parse_exponent(P)
    if u.family in ("constant", "smooth-bump", "linear"):
        return True, "bounded gradient"
    if u.family == "radial-power" and u.gamma == 0:
        return True, "constant function"
    if u.family == "angular-jump" and _meets_cut(domain):
        raise PreconditionError("angular-jump has a branch cut on the positive axis, which meets the domain")
    w = _origin_weight(domain)
    if w is None:
        return True, "gradient bounded away from the origin"
    if isinstance(w, float) and math.isnan(w):
        return None, "no closed-form rule for this domain"
    g = u.gamma
    if is_inf(P):
        return g >= 1.0, "gamma >= 1 (bounded gradient)"
    Pf = to_float(P)
    if math.isinf(w):
        return True, "exponentially thin tip"
    crit = 1.0 - (w + 1.0) / Pf
    if w == 1.0:
        rule = f"gamma > 1 - 2/P = {crit:.6g}"
    else:
        rule = f"gamma > 1 - (s+1)/P = {crit:.6g}"
    return g > crit, rule


# ---------------------------------------------------------------------------
# Quadrature


def seminorm(u: TestFunction, domain: Domain, P, spec: QuadratureSpec = QuadratureSpec(),
             r_max: Optional[float] = None) -> IntegralSeries:
    """Cutoff series of ``(sum |grad u|**P area)**(1/P)``.

    The verdict is decided on the underlying integral.  ``P = inf`` gives the
    sampled maximum, flagged as an estimate.
    """
    P = parse_exponent(P)
    mesh = graded_mesh(domain, spec, r_max=r_max)
    g = u.grad_norm(mesh.centers) if len(mesh) else np.empty(0)
    label = f"|grad u|_L^{format_exponent(P)}"
    if is_inf(P):
        return IntegralSeries.build(mesh.level_max(g), mesh.cutoffs, P, _region_label(domain),
                                    flags=("ess-sup estimate",), label=label)
    Pf = to_float(P)
    with np.errstate(over="ignore"):
        raw = IntegralSeries.build(mesh.level_sums(g**Pf * mesh.areas), mesh.cutoffs, P,
                                   _region_label(domain), label=label)
    return raw.map_values(lambda v: v ** (1.0 / Pf))


def lp_norm(u: TestFunction, domain: Domain, P, spec: QuadratureSpec = QuadratureSpec()) -> float:
    P = parse_exponent(P)
    mesh = graded_mesh(domain, spec)
    vals = np.abs(u.eval(mesh.centers))
    if is_inf(P):
        return float(vals.max()) if vals.size else 0.0
    Pf = to_float(P)
    return math.fsum((vals**Pf * mesh.areas).tolist()) ** (1.0 / Pf)


@dataclass(frozen=True)
class Membership:
    member: bool
    rule: str
    symbolic: Optional[bool]
    quadrature: str
    agree: Optional[bool]
    flags: Tuple[str, ...] = ()

    def __bool__(self):
        return self.member


def membership(u: TestFunction, domain: Domain, P, spec: QuadratureSpec = MEMBERSHIP_SPEC) -> Membership:
    """Symbolic membership cross-checked against the seminorm verdict."""
    P = parse_exponent(P)
    symbolic, rule = symbolic_membership(u, domain, P)
    series = seminorm(u, domain, P, spec)
    verdict = series.verdict
    flags = list(series.flags)
    if symbolic is None:
        flags.append("no symbolic rule: quadrature verdict only")
        return Membership(verdict == FINITE, rule, None, verdict, None, tuple(flags))
    agree = None
    if verdict == FINITE:
        agree = symbolic
    elif verdict == DIVERGENT:
        agree = not symbolic
    return Membership(symbolic, rule, symbolic, verdict, agree, tuple(flags))


@dataclass(frozen=True)
class NormReport:
    P: object
    seminorm: IntegralSeries
    full_norm: float
    member: Membership

    def to_dict(self):
        return {
            "P": format_exponent(self.P),
            "seminorm": self.seminorm.to_dict(),
            "full_norm": self.full_norm,
            "member": self.member.member,
            "rule": self.member.rule,
        }


def norm_report(u: TestFunction, domain: Domain, P, spec: QuadratureSpec = QuadratureSpec()) -> NormReport:
    P = parse_exponent(P)
    semi = seminorm(u, domain, P, spec)
    lp = lp_norm(u, domain, P, spec)
    if is_inf(P):
        full = max(lp, semi.final)
    else:
        Pf = to_float(P)
        full = (lp**Pf + semi.final**Pf) ** (1.0 / Pf)
    return NormReport(P, semi, full, membership(u, domain, P))


# ---------------------------------------------------------------------------
# Poincaré step


@dataclass(frozen=True)
class PoincareResult:
    ratio: float
    bound: float
    numerator: float
    denominator: float
    average: float

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound


POINCARE_SLACK = 1.05


def poincare_check(u: TestFunction, ball: Domain, subdomain: Domain, q,
                   spec: QuadratureSpec = QuadratureSpec()) -> PoincareResult:
    """Ratio ``|u - u_Omega|_{L^q(B)} / |grad u|_{L^q(B)}`` with the average over ``subdomain``.

    The bound is ``4 diam(B) (|B|/|Omega|)**(1/q)`` times a 5% slack.  The
    ratio is 0 when the numerator is below ``1e-12``.
    """
    q = to_float(parse_exponent(q))
    if not q >= 1:
        raise ConfigurationError("Poincaré exponent must be >= 1")
    area_b, area_s = ball.area(), subdomain.area()
    if not (area_b > 0 and area_s > 0):
        raise PreconditionError("ball and subdomain need positive area")
    sub = graded_mesh(subdomain, spec)
    avg = math.fsum((u.eval(sub.centers) * sub.areas).tolist()) / sub.total_area
    mesh = graded_mesh(ball, spec)
    dev = np.abs(u.eval(mesh.centers) - avg)
    num = math.fsum((dev**q * mesh.areas).tolist()) ** (1.0 / q)
    den = math.fsum((u.grad_norm(mesh.centers) ** q * mesh.areas).tolist()) ** (1.0 / q)
    bound = 4.0 * ball.diameter() * (area_b / area_s) ** (1.0 / q) * POINCARE_SLACK
    ratio = 0.0 if num < 1e-12 else num / den
    return PoincareResult(ratio, bound, num, den, avg)
