"""Reflection across the model cusp boundary and the extension operator.

The reflection is ``R = Phi^-1 o rho_v o Phi`` where ``Phi`` is the angular
stretch and ``rho_v(x, y) = (-x, y)``.  ``Phi`` sends the cusp domain and its
complement onto the two half-disks, so ``R`` swaps them and fixes the
interface ``theta = +-alpha(r)``.  Both branches are implemented in closed
form; the composite is kept for cross-checks.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np

from .errors import DomainError, PreconditionError
from .geometry import (
    TWO_PI,
    HalfDisk,
    PolarModelCusp,
    QuadratureSpec,
    _points,
    _unwrap,
    cusp_angle,
    cusp_complement,
    graded_mesh,
)
from .integrability import IntegralSeries, _region_label
from .maps import (
    AngularStretch,
    PlanarMap,
    VerticalDiameterReflection,
    _frame_jacobian,
    compose,
    distortion_lower_triangular,
)
from .rational import INF, format_exponent, is_inf, parse_exponent, to_float
from .sobolev import TestFunction, seminorm, symbolic_membership
from .thresholds import inward_threshold

INTERIOR = "in"
EXTERIOR = "out"
_EDGE_TOL = 1e-12

BOUNDED = "bounded"
UNBOUNDED = "unbounded"
INCONCLUSIVE = "inconclusive"
BOUNDED_GROWTH = 1.1
UNBOUNDED_GROWTH = 2.0


def _direction(direction: str) -> str:
    d = str(direction).lower()
    if d in ("in", "interior", "interior->complement"):
        return INTERIOR
    if d in ("out", "exterior", "complement->interior"):
        return EXTERIOR
    raise DomainError(f"direction must be 'in' or 'out', got {direction!r}")


class Reflection(PlanarMap):
    """Closed-form reflection over the boundary of the model cusp of degree ``s``."""

    orientation = -1
    singular_points = ((0.0, 0.0),)

    def __init__(self, s):
        s = float(s)
        if not s > 1:
            raise DomainError("reflection needs s > 1")
        self.s = s
        self.name = "reflection"

    def accepts(self, z):
        pts, single = _points(z)
        return _unwrap(np.hypot(pts[:, 0], pts[:, 1]) <= 1.0 + _EDGE_TOL, single)

    def polar(self, r, theta):
        """``(theta_out, c, d)`` with frame partials ``c = r f_r``, ``d = f_theta``."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        s = self.s
        a = cusp_angle(r, s)
        t = np.mod(theta + math.pi, TWO_PI) - math.pi
        tm = np.mod(theta, TWO_PI)
        comp = np.abs(t) <= a
        with np.errstate(divide="ignore", invalid="ignore"):
            # complement -> cusp domain
            out_c = math.pi - t * (math.pi - a) / a
            d_c = -(math.pi - a) / a
            c_c = t * math.pi * (s - 1.0) / a
            # cusp domain -> complement
            out_o = (math.pi - tm) * a / (math.pi - a)
            d_o = -a / (math.pi - a)
            c_o = (math.pi - tm) * math.pi * (s - 1.0) * a / (math.pi - a) ** 2
        out = np.where(comp, out_c, out_o)
        out = np.where(r > 0, out, 0.0)
        return out, np.where(comp, c_c, c_o), np.where(comp, d_c, d_o)

    def _split(self, pts):
        return np.hypot(pts[:, 0], pts[:, 1]), np.arctan2(pts[:, 1], pts[:, 0])

    def _eval(self, pts):
        r, th = self._split(pts)
        out, _, _ = self.polar(r, th)
        return np.stack([r * np.cos(out), r * np.sin(out)], axis=-1)

    _inverse = _eval

    def _jacobian(self, pts):
        r, th = self._split(pts)
        out, c, d = self.polar(r, th)
        return _frame_jacobian(th, out, c, d)

    def _distortion(self, pts):
        r, th = self._split(pts)
        _, c, d = self.polar(r, th)
        return distortion_lower_triangular(c, d, pts)

    def inverse_map(self):
        return self

    def as_composite(self):
        """The defining conjugation ``Phi^-1 o rho_v o Phi``."""
        return compose([AngularStretch(self.s, inverse=True), VerticalDiameterReflection(), AngularStretch(self.s)])

    def to_config(self):
        return {"kind": "reflection", "s": self.s}


def reflect(s, point):
    """Reflect point(s) across the boundary of the model cusp; ``DomainError`` outside the disk."""
    return Reflection(s).eval(point)


def _sides(s, pts):
    r = np.hypot(pts[:, 0], pts[:, 1])
    inner = PolarModelCusp(s).contains(pts)
    comp = cusp_complement(s).contains(pts)
    return r, inner, comp


class ExtendedFunction:
    """``E(u)``: ``u`` on the source side, ``u o R`` on the target side, 0 on the interface."""

    def __init__(self, u: TestFunction, s, direction: str = INTERIOR):
        self.u = u
        self.s = float(s)
        self.direction = _direction(direction)
        self.reflection = Reflection(self.s)

    def _split(self, pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(r > 1.0 + _EDGE_TOL):
            bad = pts[int(np.argmax(r))]
            raise DomainError(f"extension is defined on the closed unit disk, got {tuple(bad)}")
        _, inner, comp = _sides(self.s, pts)
        if self.direction == INTERIOR:
            return inner, comp
        return comp, inner

    def source_mask(self, z):
        pts, single = _points(z)
        return _unwrap(self._split(pts)[0], single)

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        pts, single = _points(z)
        source, target = self._split(pts)
        vals = np.asarray(self.u.eval(pts), dtype=float).copy()
        if np.any(target):
            vals[target] = self.u.eval(self.reflection._eval(pts[target]))
        vals[~source & ~target] = 0.0
        return _unwrap(vals, single)

    def gradient(self, z):
        """Analytic gradient; on the target side ``DR^T grad u(R z)``."""
        pts, single = _points(z)
        source, target = self._split(pts)
        grad = np.zeros_like(pts)
        if np.any(source):
            grad[source] = self.u.gradient(pts[source])
        if np.any(target):
            zt = pts[target]
            A = self.reflection._jacobian(zt)
            gu = self.u.gradient(self.reflection._eval(zt))
            grad[target] = np.einsum("nji,nj->ni", A, gu)
        return _unwrap(grad, single)

    def grad_norm(self, z):
        g = self.gradient(z)
        return np.hypot(g[..., 0], g[..., 1])


def extend(u: TestFunction, s, direction: str = INTERIOR) -> ExtendedFunction:
    return ExtendedFunction(u, s, direction)


def straddling_pairs(s, pairs: int = 1000, gap: float = 1e-4, seed: int = 0, r_range=(1e-2, 0.9)):
    """Point pairs at distance ``gap`` on either side of the interface ``theta = +-alpha(r)``."""
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(r_range[0]), math.log(r_range[1]), pairs))
    alpha = cusp_angle(r, s)
    a = rng.choice([-1.0, 1.0], pairs) * alpha
    # both points must stay next to the same interface arc
    dt = np.minimum(0.5 * gap / r, 0.25 * alpha)
    plus = np.stack([r * np.cos(a + dt), r * np.sin(a + dt)], axis=-1)
    minus = np.stack([r * np.cos(a - dt), r * np.sin(a - dt)], axis=-1)
    return plus, minus


def continuity_check(E: ExtendedFunction, pairs: int = 1000, gap: float = 1e-4, seed: int = 0) -> float:
    """Largest ``|E(z+) - E(z-)| / max |grad E|`` over straddling pairs."""
    plus, minus = straddling_pairs(E.s, pairs, gap, seed)
    jump = np.abs(E(plus) - E(minus))
    scale = np.maximum(E.grad_norm(plus), E.grad_norm(minus))
    return float(np.max(jump / np.maximum(scale, 1e-300)))


# ---------------------------------------------------------------------------
# Exponent calculus


def _two_x_over(x, shift):
    # 2x/(x + shift) with the x -> inf limit 2
    if is_inf(x):
        return Fraction(2)
    return 2 * x / (x + shift)


def extension_exponents(p, q, direction: str = INTERIOR):
    """Exact ``(P, Q)`` for the interior or exterior extension statement.

    Interior: ``(2p/(p-1), 2q/(q+1))``; exterior: ``(2q/(q-1), 2p/(p+1))``.
    """
    p, q = parse_exponent(p), parse_exponent(q)
    for name, v in (("p", p), ("q", q)):
        if not is_inf(v) and v <= 1:
            raise DomainError(f"{name} must exceed 1, got {format_exponent(v)}")
    if _direction(direction) == INTERIOR:
        return _two_x_over(p, -1), _two_x_over(q, 1)
    return _two_x_over(q, -1), _two_x_over(p, 1)


def exp_extension_exponents(p_lambda):
    """``(2p/(p-1), 2p/(p+1))`` for exponentially integrable distortion with parameter ``p_lambda``."""
    p = parse_exponent(p_lambda)
    if not is_inf(p) and p <= 1:
        raise DomainError(f"p_lambda must exceed 1, got {format_exponent(p)}")
    return _two_x_over(p, -1), _two_x_over(p, 1)


def exponent_consistency(q) -> Fraction:
    """Exact residual between two routes to the critical degree.

    The interior pair ``(2, 2q/(q+1))`` (``p = inf``) is fed into the inward
    cusp rule as its ``(p, q)``; the result is compared with the distortion
    threshold ``(q+1)/(q-1)`` of the angular stretch.
    """
    q = parse_exponent(q)
    if is_inf(q) or q <= 1:
        raise DomainError("q must be a finite rational > 1")
    P, Q = extension_exponents(INF, q, INTERIOR)
    return Fraction(inward_threshold(P, Q)) - (q + 1) / (q - 1)


# ---------------------------------------------------------------------------
# Norm ratio experiments


@dataclass(frozen=True)
class ExtensionReport:
    """Record of one extension experiment near the cusp tip.

    ``ratios[k]`` is the target-side ``L^Q`` seminorm of ``E(u)`` over the
    source-side ``L^P`` seminorm of ``u``, both inside ``B(0, r_U)`` with the
    ``eps_k`` tip ball removed.
    """

    direction: str
    s: float
    p: object
    q: object
    P: object
    Q: object
    r_U: float
    function: dict
    source: IntegralSeries
    extension: IntegralSeries
    ratios: Tuple[float, ...]
    growth: float
    verdict: str
    flags: Tuple[str, ...] = ()

    def to_dict(self):
        fmt = lambda v: None if v is None else format_exponent(v)
        return {
            "direction": self.direction,
            "s": self.s,
            "p": fmt(self.p),
            "q": fmt(self.q),
            "P": fmt(self.P),
            "Q": fmt(self.Q),
            "r_U": self.r_U,
            "function": self.function,
            "source_seminorm": self.source.to_dict(),
            "extension_seminorm": self.extension.to_dict(),
            "ratios": list(self.ratios),
            "growth": self.growth,
            "verdict": self.verdict,
            "flags": list(self.flags),
        }


def _growth_verdict(ratios):
    if len(ratios) < 2:
        return math.nan, INCONCLUSIVE
    a, b = ratios[-2], ratios[-1]
    if a == 0:
        g = 1.0 if b == 0 else math.inf
    else:
        g = b / a
    if not math.isfinite(g) or g >= UNBOUNDED_GROWTH:
        return g, UNBOUNDED
    if g < BOUNDED_GROWTH:
        return g, BOUNDED
    return g, INCONCLUSIVE


def norm_ratio(u: TestFunction, s, P, Q, r_U: float = 0.5, spec: QuadratureSpec = QuadratureSpec(),
               direction: str = INTERIOR, p=None, q=None) -> ExtensionReport:
    """Measure ``|grad E(u)|_{L^Q(U - source)} / |grad u|_{L^P(U cap source)}``.

    Raises :class:`PreconditionError` if the symbolic rule says ``u`` is not
    in ``W^{1,P}`` of the source side.
    """
    direction = _direction(direction)
    s = float(s)
    P, Q = parse_exponent(P), parse_exponent(Q)
    if not 0 < r_U < 1:
        raise DomainError(f"r_U must lie in (0, 1), got {r_U}")
    source = PolarModelCusp(s) if direction == INTERIOR else cusp_complement(s)
    target = cusp_complement(s) if direction == INTERIOR else PolarModelCusp(s)
    member, rule = symbolic_membership(u, source, P)
    if member is False:
        raise PreconditionError(f"u is not in W^(1,{format_exponent(P)}) of the source side: rule {rule} fails")
    flags = [] if member else ["membership not decided symbolically"]
    src = seminorm(u, source, P, spec, r_max=r_U)
    E = ExtendedFunction(u, s, direction)
    mesh = graded_mesh(target, spec, r_max=r_U)
    g = E.grad_norm(mesh.centers) if len(mesh) else np.empty(0)
    Qf = to_float(Q)
    if is_inf(Q):
        ext = IntegralSeries.build(mesh.level_max(g), mesh.cutoffs, Q, _region_label(target),
                                   flags=("ess-sup estimate",), label="|grad E|")
    else:
        with np.errstate(over="ignore"):
            raw = IntegralSeries.build(mesh.level_sums(g**Qf * mesh.areas), mesh.cutoffs, Q,
                                       _region_label(target), label="|grad E|")
        ext = raw.map_values(lambda v: v ** (1.0 / Qf))
    ratios = tuple(0.0 if a == 0 else (b / a) for a, b in zip(src.values, ext.values))
    growth, verdict = _growth_verdict(ratios)
    return ExtensionReport(direction, s, p, q, P, Q, float(r_U), u.to_config(), src, ext,
                           ratios, growth, verdict, tuple(flags))


def extension_report(u: TestFunction, s, q, direction: str = INTERIOR, r_U: float = 0.5,
                     spec: QuadratureSpec = QuadratureSpec()) -> ExtensionReport:
    """Norm ratio at the exponents of the built-in map (``p = inf``)."""
    P, Q = extension_exponents(INF, q, direction)
    return norm_ratio(u, s, P, Q, r_U, spec, direction, p=INF, q=parse_exponent(q))


# ---------------------------------------------------------------------------
# Change-of-variables chain


@dataclass(frozen=True)
class HolderChain:
    """Both sides of ``|grad v|_2**2 <= |grad u|_{2p/(p-1)}**2 * (int K**p)**(1/p)``.

    ``v = u o Phi^-1`` on the right half-disk and ``u`` lives on the cusp
    complement.  Values are per cutoff level.
    """

    s: float
    p: object
    lhs: Tuple[float, ...]
    rhs: Tuple[float, ...]
    middle: Tuple[float, ...]
    slack: float

    @property
    def ok(self) -> bool:
        return all(l <= r * self.slack for l, r in zip(self.lhs, self.rhs))

    @property
    def worst(self) -> float:
        """Largest ``lhs/rhs`` over levels with a positive right-hand side."""
        vals = [l / r for l, r in zip(self.lhs, self.rhs) if r > 0]
        return max(vals) if vals else 0.0


def holder_chain(u: TestFunction, s, p, spec: QuadratureSpec = QuadratureSpec(), slack: float = 1.05) -> HolderChain:
    s = float(s)
    p = parse_exponent(p)
    if is_inf(p) or p <= 1:
        raise DomainError("Hölder chain needs a finite p > 1")
    phi = AngularStretch(s)
    comp = cusp_complement(s)
    half = HalfDisk("right")
    # left side: |grad v|^2 on the half-disk via DPhi^-1
    hm = graded_mesh(half, spec)
    inv = phi.inverse_map()
    z = inv.eval(hm.centers)
    gv = np.einsum("nji,nj->ni", inv.jacobian(hm.centers), u.gradient(z))
    lhs = hm.level_sums(np.sum(gv * gv, axis=1) * hm.areas)
    # middle: change of variables, int |grad u|^2 K over the complement
    cm = graded_mesh(comp, spec)
    K = phi.distortion(cm.centers)
    gu = u.grad_norm(cm.centers)
    middle = cm.level_sums(gu**2 * K * cm.areas)
    # right side: Hölder product
    P = 2 * p / (p - 1)
    Pf, pf = to_float(P), to_float(p)
    src = cm.level_sums(gu**Pf * cm.areas)
    kint = cm.level_sums(K**pf * cm.areas)
    rhs = [a ** (2.0 / Pf) * b ** (1.0 / pf) for a, b in zip(src, kint)]
    return HolderChain(s, p, tuple(lhs), tuple(rhs), tuple(middle), slack)
