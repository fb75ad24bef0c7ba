"""Cuspidal profiles, planar domains and tip-graded midpoint quadrature.

Every cusp in this package has its tip at the origin.  Regions are described
internally as a union of *pieces*: polar pieces (an angular cross-section for
every radius) and channel pieces (a vertical cross-section for every abscissa).
Meshes are built piecewise; near the tip the cells are arranged in shells
``[eps_{k+1}, eps_k)`` with ``eps_k = 2**(-k*stride)`` so that every cutoff
level is a union of whole shells and the cutoff series can be accumulated
shell by shell.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigurationError, DomainError

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


def _points(z):
    """Return ``(array of shape (N, 2), was_single_point)``."""
    arr = np.asarray(z, dtype=float)
    if arr.shape == (2,):
        return arr.reshape(1, 2), True
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValueError(f"expected planar point(s), got shape {arr.shape}")
    return arr.reshape(-1, 2), False


def _unwrap(values, single, shape=None):
    if single:
        return values[0]
    if shape is not None:
        return values.reshape(shape)
    return values


def polar(z):
    """Cartesian points -> ``(r, theta)`` with ``theta`` in ``(-pi, pi]``."""
    z = np.asarray(z, dtype=float)
    return np.hypot(z[..., 0], z[..., 1]), np.arctan2(z[..., 1], z[..., 0])


def cartesian(r, theta):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def cusp_angle(r, s):
    """Half opening angle ``(pi/2) r**(s-1)`` of the model polar cusp."""
    return HALF_PI * np.power(r, float(s) - 1.0)


# ---------------------------------------------------------------------------
# Profiles


@dataclass(frozen=True)
class CuspProfile:
    """Cuspidal width function ``rho`` with ``rho(0)=0``, ``rho(1)=1``.

    ``power`` is ``x**s``; ``exponential`` is ``e*exp(-1/x)``; ``custom`` takes
    user callables for the value and the derivative.
    """

    kind: str = "power"
    s: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    dfunc: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if self.s is None or not float(self.s) > 1.0:
                raise ConfigurationError("power profile needs degree s > 1")
            object.__setattr__(self, "s", float(self.s))
        elif self.kind == "exponential":
            pass
        elif self.kind == "custom":
            if self.func is None or self.dfunc is None:
                raise ConfigurationError("custom profile needs func and dfunc")
        else:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def power(cls, s):
        return cls("power", s=s)

    @classmethod
    def exponential(cls):
        return cls("exponential")

    @classmethod
    def custom(cls, func, dfunc):
        return cls("custom", func=func, dfunc=dfunc)

    def __call__(self, x):
        """Unchecked evaluation; ``x <= 0`` gives 0."""
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        if self.kind == "power":
            val = xs ** self.s
        elif self.kind == "exponential":
            val = math.e * np.exp(-1.0 / xs)
        else:
            val = np.asarray(self.func(xs), dtype=float)
        return np.where(pos, val, 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        if self.kind == "power":
            val = self.s * xs ** (self.s - 1.0)
        elif self.kind == "exponential":
            val = math.e * np.exp(-1.0 / xs) / xs**2
        else:
            val = np.asarray(self.dfunc(xs), dtype=float)
        return np.where(pos, val, 0.0)

    def log_derivative(self, x):
        """``rho'(x)/rho(x)`` without underflow for the built-in kinds."""
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        if self.kind == "power":
            val = self.s / xs
        elif self.kind == "exponential":
            val = 1.0 / xs**2
        else:
            val = np.asarray(self.dfunc(xs), dtype=float) / np.asarray(self.func(xs), dtype=float)
        return np.where(pos, val, np.inf)

    def to_config(self):
        if self.kind == "power":
            return {"kind": "power", "s": self.s}
        if self.kind == "exponential":
            return {"kind": "exponential"}
        return {"kind": "custom"}


def profile_width(profile: CuspProfile, x):
    """``rho(x)`` for ``x`` in ``(0, 1]``; raises :class:`DomainError` for ``x <= 0``."""
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError(f"profile width is defined for x > 0, got {x!r}")
    val = profile(xa)
    return float(val) if val.ndim == 0 else val


def profile_from_config(cfg) -> CuspProfile:
    if isinstance(cfg, CuspProfile):
        return cfg
    if isinstance(cfg, (int, float)) and not isinstance(cfg, bool):
        return CuspProfile.power(cfg)
    if isinstance(cfg, str):
        key = cfg.strip().lower()
        if key in ("exp", "exponential"):
            return CuspProfile.exponential()
        if key.startswith("power"):
            _, _, deg = key.partition(":")
            return CuspProfile.power(float(deg))
        raise ConfigurationError(f"unknown profile {cfg!r}")
    if isinstance(cfg, dict):
        kind = str(cfg.get("kind", "power")).lower()
        if kind in ("exp", "exponential"):
            return CuspProfile.exponential()
        if kind == "power":
            return CuspProfile.power(float(cfg["s"]))
    raise ConfigurationError(f"cannot build a profile from {cfg!r}")


# ---------------------------------------------------------------------------
# Mesh pieces


@dataclass(frozen=True)
class _PolarPiece:
    # intervals(r) -> list of (lo, hi) angle arrays, one pair per sub-sector
    intervals: Callable
    r_lo: float
    r_hi: float
    tip: bool
    center: Tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class _ChannelPiece:
    # intervals(x) -> list of (lo, hi) ordinate arrays
    intervals: Callable
    x_hi: float
    # abscissae where the cross-section is not smooth
    breaks: Tuple[float, ...] = ()


# ---------------------------------------------------------------------------
# Domains


class Domain:
    """Planar open region; boundary points are classified as outside."""

    kind = "domain"
    tip = False

    def contains(self, z):
        raise NotImplementedError

    def closure_contains(self, z):
        raise NotImplementedError

    def area(self) -> float:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def pieces(self) -> List:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


def contains(domain: Domain, point):
    """Membership of a point (or array of points) in the open region."""
    return domain.contains(point)


@dataclass(frozen=True)
class BallR(Domain):
    radius: float = 1.0
    center: Tuple[float, float] = (0.0, 0.0)

    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def _dist(self, z):
        pts, single = _points(z)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]), single

    def contains(self, z):
        d, single = self._dist(z)
        return _unwrap(d < self.radius, single)

    def closure_contains(self, z):
        d, single = self._dist(z)
        return _unwrap(d <= self.radius, single)

    def area(self):
        return math.pi * self.radius**2

    def diameter(self):
        return 2.0 * self.radius

    def pieces(self):
        if self.radius <= 0:
            return []
        full = lambda r: [(np.zeros_like(r), np.full_like(r, TWO_PI))]
        return [_PolarPiece(full, 0.0, self.radius, tip=False, center=self.center)]

    def to_config(self):
        cfg = {"kind": "ball", "radius": self.radius}
        if self.center != (0.0, 0.0):
            cfg["center"] = list(self.center)
        return cfg


@dataclass(frozen=True)
class UnitDisk(BallR):
    radius: float = 1.0

    kind = "disk"

    def to_config(self):
        return {"kind": "disk"}


@dataclass(frozen=True)
class HalfDisk(Domain):
    """Half of ``B(0, radius)`` to the right (``x > 0``) or left of the axis.

    Graded toward the origin, which is where the angular stretch sends the
    cusp tip.
    """

    side: str = "right"
    radius: float = 1.0

    kind = "half-disk"
    tip = True

    def __post_init__(self):
        if self.side not in ("right", "left"):
            raise ConfigurationError("side must be 'right' or 'left'")
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        x = pts[:, 0] if self.side == "right" else -pts[:, 0]
        return _unwrap((r < self.radius) & (x > 0), single)

    def closure_contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        x = pts[:, 0] if self.side == "right" else -pts[:, 0]
        return _unwrap((r <= self.radius) & (x >= 0), single)

    def area(self):
        return 0.5 * math.pi * self.radius**2

    def diameter(self):
        return 2.0 * self.radius

    def pieces(self):
        lo = -HALF_PI if self.side == "right" else HALF_PI
        iv = lambda r: [(np.full_like(r, lo), np.full_like(r, lo + math.pi))]
        return [_PolarPiece(iv, 0.0, self.radius, tip=True)]

    def to_config(self):
        return {"kind": "half-disk", "side": self.side, "radius": self.radius}


@dataclass(frozen=True)
class PolarModelCusp(Domain):
    """``{0 < r < 1, alpha(r) < theta < 2pi - alpha(r)}``, ``alpha = (pi/2) r**(s-1)``."""

    s: float = 2.0

    kind = "polar-cusp"
    tip = True

    def __post_init__(self):
        if not float(self.s) > 1.0:
            raise ConfigurationError("model cusp needs s > 1")
        object.__setattr__(self, "s", float(self.s))

    def alpha(self, r):
        return cusp_angle(r, self.s)

    def contains(self, z):
        pts, single = _points(z)
        r, th = polar(pts)
        thm = np.mod(th, TWO_PI)
        a = self.alpha(r)
        return _unwrap((r > 0) & (r < 1) & (thm > a) & (thm < TWO_PI - a), single)

    def closure_contains(self, z):
        pts, single = _points(z)
        r, th = polar(pts)
        thm = np.mod(th, TWO_PI)
        a = self.alpha(r)
        inside = (r <= 1) & ((r == 0) | ((thm >= a) & (thm <= TWO_PI - a)))
        return _unwrap(inside, single)

    def area(self):
        return math.pi * self.s / (self.s + 1.0)

    def diameter(self):
        return 2.0

    def pieces(self):
        s = self.s
        iv = lambda r: [(cusp_angle(r, s), TWO_PI - cusp_angle(r, s))]
        return [_PolarPiece(iv, 0.0, 1.0, tip=True)]

    def to_config(self):
        return {"kind": "polar-cusp", "s": self.s}


def _channel_angle(profile, r, iters=64):
    """Angle ``beta(r)`` where the circle of radius r meets ``|y| = rho(x)``."""
    r = np.asarray(r, dtype=float)
    lo = np.zeros_like(r)
    hi = np.full_like(r, HALF_PI)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = r * np.sin(mid) - profile(r * np.cos(mid))
        above = f > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CartesianInwardCusp(Domain):
    """``B(0,1)`` minus the closed channel ``{0 <= x <= 1, |y| <= rho(x)}``."""

    profile: CuspProfile = field(default_factory=lambda: CuspProfile.power(2.0))

    kind = "inward-cusp"
    tip = True

    def _in_channel(self, pts, closed):
        x, y = pts[:, 0], pts[:, 1]
        w = self.profile(np.clip(x, 0.0, 1.0))
        if closed:
            return (x >= 0) & (x <= 1) & (np.abs(y) <= w)
        return (x > 0) & (x < 1) & (np.abs(y) < w)

    def contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return _unwrap((r < 1) & ~self._in_channel(pts, closed=True), single)

    def closure_contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return _unwrap((r <= 1) & ~self._in_channel(pts, closed=False), single)

    def channel_area_in_disk(self):
        f = lambda x: 2.0 * min(float(self.profile(x)), math.sqrt(max(1.0 - x * x, 0.0)))
        val, _ = integrate.quad(f, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
        return val

    def area(self):
        return math.pi - self.channel_area_in_disk()

    def diameter(self):
        return 2.0

    def pieces(self):
        prof = self.profile
        iv = lambda r: [(_channel_angle(prof, r), TWO_PI - _channel_angle(prof, r))]
        return [_PolarPiece(iv, 0.0, 1.0, tip=True)]

    def to_config(self):
        return {"kind": "inward-cusp", "profile": self.profile.to_config()}


@dataclass(frozen=True)
class CuspChannel(Domain):
    """The open channel ``{0 < x < 1, |y| < rho(x)}``."""

    profile: CuspProfile = field(default_factory=lambda: CuspProfile.power(2.0))

    kind = "channel"
    tip = True

    def contains(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        w = self.profile(np.clip(x, 0.0, 1.0))
        return _unwrap((x > 0) & (x < 1) & (np.abs(y) < w), single)

    def closure_contains(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        w = self.profile(np.clip(x, 0.0, 1.0))
        return _unwrap((x >= 0) & (x <= 1) & (np.abs(y) <= w), single)

    def area(self):
        if self.profile.kind == "power":
            return 2.0 / (self.profile.s + 1.0)
        val, _ = integrate.quad(lambda x: 2.0 * float(self.profile(x)), 0.0, 1.0,
                                limit=200, epsabs=1e-14, epsrel=1e-12)
        return val

    def diameter(self):
        return math.hypot(1.0, 1.0) * 2.0

    def pieces(self):
        prof = self.profile
        iv = lambda x: [(-prof(x), prof(x))]
        return [_ChannelPiece(iv, 1.0)]

    def to_config(self):
        return {"kind": "channel", "profile": self.profile.to_config()}


_OUT_CENTER = (2.0, 0.0)
_OUT_RADIUS = math.sqrt(2.0)


@dataclass(frozen=True)
class CartesianOutwardCusp(Domain):
    """``B((2,0), sqrt 2)`` joined to the channel ``{0 < x <= 1, |y| < rho(x)}``."""

    profile: CuspProfile = field(default_factory=lambda: CuspProfile.power(2.0))

    kind = "outward-cusp"
    tip = True

    def _ball(self):
        return BallR(_OUT_RADIUS, _OUT_CENTER)

    def contains(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        w = self.profile(np.clip(x, 0.0, 1.0))
        chan = (x > 0) & (x <= 1) & (np.abs(y) < w)
        return _unwrap(self._ball().contains(pts) | chan, single)

    def closure_contains(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        w = self.profile(np.clip(x, 0.0, 1.0))
        chan = (x >= 0) & (x <= 1) & (np.abs(y) <= w)
        return _unwrap(self._ball().closure_contains(pts) | chan, single)

    @staticmethod
    def _ball_half_height(x):
        return np.sqrt(np.maximum(2.0 - (np.asarray(x, dtype=float) - 2.0) ** 2, 0.0))

    def area(self):
        b = self._ball_half_height
        f = lambda x: 2.0 * max(float(self.profile(x)) - float(b(x)), 0.0)
        extra, _ = integrate.quad(f, 0.0, 1.0, limit=200, points=list(self._breaks()),
                                  epsabs=1e-14, epsrel=1e-12)
        return 2.0 * math.pi + extra

    def diameter(self):
        return 2.0 + _OUT_RADIUS

    def pieces(self):
        prof = self.profile
        b = self._ball_half_height

        def iv(x):
            w = prof(x)
            m = np.minimum(w, b(x))
            return [(-w, -m), (m, w)]

        full = lambda r: [(np.zeros_like(r), np.full_like(r, TWO_PI))]
        return [_PolarPiece(full, 0.0, _OUT_RADIUS, tip=False, center=_OUT_CENTER),
                _ChannelPiece(iv, 1.0, breaks=self._breaks())]

    def _breaks(self):
        x_b = 2.0 - _OUT_RADIUS
        grid = np.linspace(x_b, 1.0, 2001)[1:-1]
        gap = self.profile(grid) - self._ball_half_height(grid)
        out = [x_b]
        for i in np.nonzero(np.sign(gap[:-1]) != np.sign(gap[1:]))[0]:
            f = lambda x: float(self.profile(x) - self._ball_half_height(x))
            out.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15))
        return tuple(out)

    def to_config(self):
        return {"kind": "outward-cusp", "profile": self.profile.to_config()}


@dataclass(frozen=True)
class ComplementInBall(Domain):
    """``B(0, R)`` minus the closure of ``inner``."""

    inner: Domain = field(default_factory=UnitDisk)
    R: float = 2.0

    kind = "complement"

    def __post_init__(self):
        object.__setattr__(self, "R", float(self.R))

    @property
    def tip(self):
        return bool(self.inner.tip) and self.R > 0

    def contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return _unwrap((r < self.R) & ~self.inner.closure_contains(pts), single)

    def closure_contains(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return _unwrap((r <= self.R) & ~self.inner.contains(pts), single)

    def _inner_radius(self):
        inner = self.inner
        if isinstance(inner, BallR):
            if inner.center != (0.0, 0.0):
                raise ConfigurationError("complement of an off-centre ball is not supported")
            return inner.radius
        if isinstance(inner, (PolarModelCusp, CartesianInwardCusp)):
            return 1.0
        raise ConfigurationError(f"complement of {inner.kind} is not supported")

    def _channel_pieces(self, r_hi):
        inner = self.inner
        if r_hi <= 0:
            return []
        if isinstance(inner, PolarModelCusp):
            s = inner.s
            iv = lambda r: [(-cusp_angle(r, s), cusp_angle(r, s))]
            return [_PolarPiece(iv, 0.0, r_hi, tip=True)]
        if isinstance(inner, CartesianInwardCusp):
            prof = inner.profile
            iv = lambda r: [(-_channel_angle(prof, r), _channel_angle(prof, r))]
            return [_PolarPiece(iv, 0.0, r_hi, tip=True)]
        return []

    def area(self):
        a = self._inner_radius()
        ring = math.pi * max(self.R**2 - a**2, 0.0)
        inner = self.inner
        if isinstance(inner, PolarModelCusp):
            rr = min(self.R, 1.0)
            return ring + math.pi * rr ** (inner.s + 1.0) / (inner.s + 1.0)
        if isinstance(inner, CartesianInwardCusp):
            if self.R < 1.0:
                raise ConfigurationError("closed-form area needs R >= 1 here")
            return ring + inner.channel_area_in_disk()
        return ring

    def diameter(self):
        return 2.0 * self.R

    def pieces(self):
        a = self._inner_radius()
        out = self._channel_pieces(min(self.R, a) if not isinstance(self.inner, BallR) else 0.0)
        if self.R > a:
            full = lambda r: [(np.zeros_like(r), np.full_like(r, TWO_PI))]
            out.append(_PolarPiece(full, a, self.R, tip=False))
        return out

    def to_config(self):
        return {"kind": "complement", "inner": self.inner.to_config(), "R": self.R}


def cusp_complement(s) -> ComplementInBall:
    """The in-disk complement ``C_s = {0 < r < 1, |theta| < alpha(r)}`` of the model cusp."""
    return ComplementInBall(PolarModelCusp(s), 1.0)


def domain_from_config(cfg) -> Domain:
    if isinstance(cfg, Domain):
        return cfg
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigurationError(f"domain config needs a 'kind': {cfg!r}")
    kind = str(cfg["kind"]).lower()
    try:
        if kind in ("disk", "unit-disk"):
            return UnitDisk()
        if kind == "ball":
            return BallR(float(cfg.get("radius", 1.0)), tuple(cfg.get("center", (0.0, 0.0))))
        if kind == "half-disk":
            return HalfDisk(cfg.get("side", "right"), float(cfg.get("radius", 1.0)))
        if kind == "polar-cusp":
            return PolarModelCusp(float(cfg["s"]))
        if kind == "cusp-complement":
            return cusp_complement(float(cfg["s"]))
        if kind == "inward-cusp":
            return CartesianInwardCusp(profile_from_config(cfg["profile"]))
        if kind == "outward-cusp":
            return CartesianOutwardCusp(profile_from_config(cfg["profile"]))
        if kind == "channel":
            return CuspChannel(profile_from_config(cfg["profile"]))
        if kind == "complement":
            return ComplementInBall(domain_from_config(cfg["inner"]), float(cfg["R"]))
    except KeyError as exc:
        raise ConfigurationError(f"domain {kind!r} is missing {exc}") from exc
    raise ConfigurationError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    """Graded midpoint quadrature settings.

    Parameters
    ----------
    n : int
        Cells across every cross-section interval (angular or vertical).
    grading : float
        Ratio between successive radial layer radii toward the tip.  It is
        snapped to ``2**(-1/m)`` with integer ``m`` so that layers nest into
        the dyadic cutoff shells.
    levels : int
        Finest cutoff level ``K``; the tip neighbourhood ``B(0, eps_K)`` is
        excluded.
    stride : int
        Octaves per cutoff level: ``eps_k = 2**(-k*stride)``.
    """

    n: int = 64
    grading: float = 2.0 ** -0.125
    levels: int = 16
    stride: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"quadrature needs n >= 2, got {self.n}")
        if not 0.0 < self.grading < 1.0:
            raise ConfigurationError(f"grading must lie in (0, 1), got {self.grading}")
        if int(self.levels) != self.levels or self.levels < 0:
            raise ConfigurationError(f"levels must be a non-negative integer, got {self.levels}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigurationError(f"stride must be a positive integer, got {self.stride}")

    @property
    def layers_per_octave(self) -> int:
        return max(1, int(round(math.log(0.5) / math.log(self.grading))))

    def cutoff(self, k: int) -> float:
        return 2.0 ** (-k * self.stride)

    def cutoffs(self) -> Tuple[float, ...]:
        return tuple(self.cutoff(k) for k in range(self.levels + 1))

    def replace(self, **kw) -> "QuadratureSpec":
        d = dict(n=self.n, grading=self.grading, levels=self.levels, stride=self.stride)
        d.update(kw)
        return QuadratureSpec(**d)

    def to_config(self):
        return {"n": self.n, "grading": self.grading, "levels": self.levels, "stride": self.stride}


def _fsum(values) -> float:
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        return 0.0
    if not np.all(np.isfinite(vals)):
        if np.any(np.isnan(vals)):
            return math.nan
        # non-negative integrands only reach here through overflow
        return math.inf if np.any(vals == math.inf) else -math.inf
    return math.fsum(vals.tolist())


@dataclass(frozen=True, eq=False)
class Mesh:
    """Midpoint cells with a shell tag; shell ``-1`` is never cut off."""

    centers: np.ndarray
    areas: np.ndarray
    shells: np.ndarray
    levels: int
    cutoffs: Tuple[float, ...]

    def __len__(self):
        return len(self.areas)

    def __iter__(self):
        for c, a in zip(self.centers, self.areas):
            yield (float(c[0]), float(c[1])), float(a)

    @property
    def total_area(self) -> float:
        return _fsum(self.areas)

    def at_level(self, k: int) -> "Mesh":
        keep = self.shells < k
        return Mesh(self.centers[keep], self.areas[keep], self.shells[keep], k, self.cutoffs[: k + 1])

    def shell_sums(self, values) -> dict:
        values = np.asarray(values, dtype=float)
        return {j: _fsum(values[self.shells == j]) for j in range(-1, self.levels)}

    def level_sums(self, values) -> List[float]:
        """``I_k`` for ``k = 0..levels``: sums over the cells kept at cutoff ``eps_k``."""
        sums = self.shell_sums(values)
        out = []
        acc = [sums[-1]]
        out.append(_fsum(acc))
        for j in range(self.levels):
            acc.append(sums[j])
            out.append(_fsum(acc))
        return out

    def level_max(self, values) -> List[float]:
        values = np.asarray(values, dtype=float)
        out = []
        for k in range(self.levels + 1):
            sel = values[self.shells < k]
            out.append(float(sel.max()) if sel.size else 0.0)
        return out


def _tip_layers(spec: QuadratureSpec, r_hi: float):
    """Geometric layers in ``(eps_K, r_hi)`` tagged with their shell index."""
    m = spec.layers_per_octave * spec.stride
    inner, outer, tags = [], [], []
    for j in range(spec.levels):
        hi = spec.cutoff(j)
        lo = spec.cutoff(j + 1)
        if lo >= r_hi:
            continue
        edges = hi * (lo / hi) ** (np.arange(m + 1) / m)
        a, b = edges[1:], edges[:-1]
        b = np.minimum(b, r_hi)
        keep = a < b
        inner.append(a[keep])
        outer.append(b[keep])
        tags.append(np.full(int(keep.sum()), j))
    if not inner:
        return np.empty(0), np.empty(0), np.empty(0, dtype=int)
    return np.concatenate(inner), np.concatenate(outer), np.concatenate(tags)


def _plain_layers(spec: QuadratureSpec, r_lo: float, r_hi: float):
    """Untagged layers for pieces without a tip; a ball gets a small core cell ring."""
    g = spec.grading
    if r_lo <= 0:
        octaves = 20
        count = octaves * spec.layers_per_octave
        edges = r_hi * g ** np.arange(count + 1)
        edges = np.append(edges, 0.0)
    else:
        count = max(8, int(math.ceil(math.log(r_hi / r_lo) / -math.log(g))))
        edges = r_hi * (r_lo / r_hi) ** (np.arange(count + 1) / count)
        edges[-1] = r_lo
    a, b = edges[1:], edges[:-1]
    return a, b, np.full(len(a), -1)


_MAX_LOG_WIDTH_STEP = 0.25
_MAX_SUBLAYERS = 4096


def _total_width(intervals, x):
    return sum(np.clip(np.asarray(hi) - np.asarray(lo), 0.0, None) for lo, hi in intervals(x))


def _split_by_width(a, b, tags, intervals):
    """Subdivide layers across which the cross-section width changes too fast.

    Each sub-layer sees the width change by at most ``exp(0.25)``, which keeps
    the midpoint rule honest for exponentially thin channels.
    """
    if len(a) == 0:
        return a, b, tags
    wa = _total_width(intervals, a)
    wb = _total_width(intervals, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.abs(np.log(wb) - np.log(wa))
    step = np.where(np.isfinite(step), step, 0.0)
    counts = np.clip(np.ceil(step / _MAX_LOG_WIDTH_STEP), 1, _MAX_SUBLAYERS).astype(int)
    if np.all(counts == 1):
        return a, b, tags
    na, nb, nt = [], [], []
    for lo, hi, tag, m in zip(a, b, tags, counts):
        e = lo + (hi - lo) * np.arange(m + 1) / m
        na.append(e[:-1])
        nb.append(e[1:])
        nt.append(np.full(m, tag))
    return np.concatenate(na), np.concatenate(nb), np.concatenate(nt)


def _polar_cells(piece: _PolarPiece, a, b, tags, n):
    if len(a) == 0:
        return []
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    rq = mid[:, None] + half[:, None] * _GAUSS_X[None, :]
    iv_q = piece.intervals(rq.ravel())
    iv_c = piece.intervals(mid)
    t = (np.arange(n) + 0.5) / n
    out = []
    for (lo_q, hi_q), (lo_c, hi_c) in zip(iv_q, iv_c):
        width = np.clip(np.asarray(hi_q) - np.asarray(lo_q), 0.0, None).reshape(rq.shape)
        layer_area = half * np.sum(_GAUSS_W[None, :] * width * rq, axis=1)
        theta = lo_c[:, None] + t[None, :] * (hi_c - lo_c)[:, None]
        x = piece.center[0] + mid[:, None] * np.cos(theta)
        y = piece.center[1] + mid[:, None] * np.sin(theta)
        centers = np.stack([x.ravel(), y.ravel()], axis=-1)
        areas = np.repeat(layer_area / n, n)
        out.append((centers, areas, np.repeat(tags, n)))
    return out


def _refine(a, b, tags, breaks, depth=40):
    """Split layers at ``breaks`` and grade geometrically toward each break."""
    for p in breaks:
        na, nb, nt = [], [], []
        for lo, hi, tag in zip(a, b, tags):
            if lo < p < hi:
                subs = [(lo, p), (p, hi)]
            else:
                subs = [(lo, hi)]
            for u, v in subs:
                if u == p or v == p:
                    # geometric sub-layers clustering at p
                    w = (v - u) * 0.5 ** np.arange(depth + 1)
                    w = np.append(w, 0.0)
                    if u == p:
                        e = np.sort(u + w)
                    else:
                        e = np.sort(v - w)
                    na.extend(e[:-1]); nb.extend(e[1:]); nt.extend([tag] * (len(e) - 1))
                else:
                    na.append(u); nb.append(v); nt.append(tag)
        a, b, tags = np.array(na), np.array(nb), np.array(nt, dtype=int)
    return a, b, tags


def _channel_cells(piece: _ChannelPiece, a, b, tags, n):
    if len(a) == 0:
        return []
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    xq = mid[:, None] + half[:, None] * _GAUSS_X[None, :]
    iv_q = piece.intervals(xq.ravel())
    iv_c = piece.intervals(mid)
    t = (np.arange(n) + 0.5) / n
    out = []
    for (lo_q, hi_q), (lo_c, hi_c) in zip(iv_q, iv_c):
        width = np.clip(np.asarray(hi_q) - np.asarray(lo_q), 0.0, None).reshape(xq.shape)
        layer_area = half * np.sum(_GAUSS_W[None, :] * width, axis=1)
        y = lo_c[:, None] + t[None, :] * (hi_c - lo_c)[:, None]
        x = np.broadcast_to(mid[:, None], y.shape)
        centers = np.stack([x.ravel(), y.ravel()], axis=-1)
        areas = np.repeat(layer_area / n, n)
        out.append((centers, areas, np.repeat(tags, n)))
    return out


def graded_mesh(domain: Domain, spec: QuadratureSpec = QuadratureSpec(), r_max: Optional[float] = None) -> Mesh:
    """Cells covering ``domain`` minus the ``eps_K`` tip neighbourhood.

    ``r_max`` clips the region to ``B(0, r_max)`` (used for cusp neighbourhoods).
    Cells whose area underflows to a subnormal number are discarded.
    """
    if not isinstance(spec, QuadratureSpec):
        raise ConfigurationError("spec must be a QuadratureSpec")
    chunks = []
    for piece in domain.pieces():
        if isinstance(piece, _PolarPiece):
            hi = piece.r_hi if r_max is None else min(piece.r_hi, r_max)
            if r_max is not None and piece.center != (0.0, 0.0):
                raise ConfigurationError("r_max clipping needs pieces centred at the origin")
            if hi <= piece.r_lo:
                continue
            if piece.tip:
                a, b, tags = _tip_layers(spec, hi)
            else:
                a, b, tags = _plain_layers(spec, piece.r_lo, hi)
            a, b, tags = _split_by_width(a, b, tags, piece.intervals)
            chunks.extend(_polar_cells(piece, a, b, tags, spec.n))
        else:
            hi = piece.x_hi if r_max is None else min(piece.x_hi, r_max)
            a, b, tags = _tip_layers(spec, hi)
            a, b, tags = _refine(a, b, tags, [p for p in piece.breaks if p < hi])
            a, b, tags = _split_by_width(a, b, tags, piece.intervals)
            chunks.extend(_channel_cells(piece, a, b, tags, spec.n))
    if chunks:
        centers = np.concatenate([c[0] for c in chunks])
        areas = np.concatenate([c[1] for c in chunks])
        shells = np.concatenate([c[2] for c in chunks]).astype(int)
        # subnormal areas carry no weight and their centres see underflowed widths
        keep = np.isfinite(areas) & (areas >= np.finfo(float).tiny)
        # centres of cells whose cross-section underflows can fall outside
        keep &= np.asarray(domain.contains(centers), dtype=bool)
        centers, areas, shells = centers[keep], areas[keep], shells[keep]
    else:
        centers, areas, shells = np.empty((0, 2)), np.empty(0), np.empty(0, dtype=int)
    return Mesh(centers, areas, shells, spec.levels, spec.cutoffs())
