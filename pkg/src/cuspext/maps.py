"""Planar maps with analytic Jacobians and the optimal distortion field.

All maps are vectorized: points are arrays of shape ``(2,)`` or ``(N, 2)``.
The distortion is ``K = |Dh|**2 / |J_h|`` (operator norm, absolute Jacobian so
that anticonformal maps have ``K = 1``) and ``K = 1`` where ``J_h = 0``.
"""

import math
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CompositionError, ConfigurationError, DomainError, EvaluationError
from .geometry import (
    HALF_PI,
    TWO_PI,
    CuspChannel,
    CuspProfile,
    Domain,
    UnitDisk,
    _points,
    _unwrap,
    cusp_angle,
    profile_from_config,
)

#: Distinguished value standing for the point at infinity.
INFINITY = np.array([math.inf, math.inf])

_EDGE_TOL = 1e-12


def is_infinity(z) -> np.ndarray:
    pts, single = _points(z)
    return _unwrap(np.isinf(pts).any(axis=1), single)


# ---------------------------------------------------------------------------
# Distortion from Jacobian invariants


def distortion_from_invariants(F, D, points=None, G=None):
    """``K`` from ``F = |A|_F**2`` and ``D = det A``.

    The singular values satisfy ``s1 + s2 = sqrt(F + 2|D|)`` and
    ``s1 - s2 = sqrt(G)`` with ``G = F - 2|D|``.  Callers that know the
    entries pass ``G`` as a sum of squares, which avoids cancellation for
    nearly conformal matrices.
    """
    F = np.asarray(F, dtype=float)
    absD = np.abs(np.asarray(D, dtype=float))
    undefined = np.isnan(F) | np.isnan(absD)
    if np.any(undefined):
        loc = None
        if points is not None:
            loc = np.atleast_2d(np.asarray(points, dtype=float))[int(np.argmax(undefined.ravel()))]
        raise EvaluationError("Jacobian is undefined", loc)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        a = np.sqrt(F + 2.0 * absD)
        G = F - 2.0 * absD if G is None else np.asarray(G, dtype=float)
        b = np.sqrt(np.maximum(G, 0.0))
        smax = 0.5 * (a + b)
        K = np.where(absD > 0, smax * smax / np.where(absD > 0, absD, 1.0), 1.0)
        K = np.maximum(K, 1.0)
    bad = ~np.isfinite(K)
    if np.any(bad):
        loc = None
        if points is not None:
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            loc = pts[int(np.argmax(bad.ravel()))]
        raise EvaluationError("distortion is not finite", loc)
    return K


def distortion_lower_triangular(c, d, points=None):
    """``K`` of ``[[1, 0], [c, d]]`` (any rotations around it), scaled against overflow."""
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        m = np.maximum(1.0, np.maximum(np.abs(c), np.abs(d)))
        cs, ds, one = c / m, d / m, 1.0 / m
        F = one * one + cs * cs + ds * ds
        D = one * ds
        G = (one - np.abs(ds)) ** 2 + cs * cs
    return distortion_from_invariants(F, D, points, G)


def distortion_from_jacobian(A, points=None):
    A = np.asarray(A, dtype=float)
    F = np.sum(A * A, axis=(-2, -1))
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    D = a * d - b * c
    sign = np.where(D < 0, -1.0, 1.0)
    G = (a - sign * d) ** 2 + (b + sign * c) ** 2
    return distortion_from_invariants(F, D, points, G)


def _rot(t):
    c, s = np.cos(t), np.sin(t)
    out = np.empty(np.shape(t) + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def _frame_jacobian(theta_in, theta_out, c, d):
    """Cartesian Jacobian of ``(r, theta) -> (r, f(r, theta))``.

    In the polar frames the matrix is ``[[1, 0], [c, d]]`` with ``c = r f_r``
    and ``d = f_theta``.
    """
    M = np.zeros(np.shape(c) + (2, 2))
    M[..., 0, 0] = 1.0
    M[..., 1, 0] = c
    M[..., 1, 1] = d
    return _rot(theta_out) @ M @ np.swapaxes(_rot(theta_in), -1, -2)


# ---------------------------------------------------------------------------
# Base class


class PlanarMap(ABC):
    """Invertible planar map.

    Subclasses implement :meth:`_eval`, :meth:`_inverse` and :meth:`_jacobian`
    on ``(N, 2)`` arrays; the public methods accept single points too.
    """

    name = "map"
    orientation = 1
    singular_points: Sequence = ()

    @property
    def validity(self) -> Optional[Domain]:
        """Region of definition (``None`` means the whole plane)."""
        return None

    def accepts(self, z) -> np.ndarray:
        """Points where the map may be evaluated (closed validity region)."""
        pts, single = _points(z)
        return _unwrap(np.ones(len(pts), dtype=bool), single)

    def eval(self, z):
        pts, single = _points(z)
        self._check(pts)
        return _unwrap(self._eval(pts), single)

    __call__ = eval

    def inverse(self, w):
        pts, single = _points(w)
        return _unwrap(self._inverse(pts), single)

    def jacobian(self, z):
        pts, single = _points(z)
        self._check(pts)
        return _unwrap(self._jacobian(pts), single)

    def det(self, z):
        A = self.jacobian(z)
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]

    def distortion(self, z):
        pts, single = _points(z)
        self._check(pts)
        return _unwrap(self._distortion(pts), single)

    def inverse_map(self) -> "PlanarMap":
        return _InverseOf(self)

    def to_config(self) -> dict:
        return {"kind": self.name}

    # hooks

    def _check(self, pts):
        ok = np.asarray(self.accepts(pts))
        if not np.all(ok):
            bad = pts[int(np.argmin(ok))]
            raise DomainError(f"{self.name}: point {tuple(bad)} is outside the validity region")

    @abstractmethod
    def _eval(self, pts):
        ...

    @abstractmethod
    def _inverse(self, pts):
        ...

    @abstractmethod
    def _jacobian(self, pts):
        ...

    def _distortion(self, pts):
        return distortion_from_jacobian(self._jacobian(pts), pts)


class _InverseOf(PlanarMap):
    def __init__(self, base: PlanarMap):
        self.base = base
        self.name = f"inverse({base.name})"
        self.orientation = base.orientation

    def _eval(self, pts):
        return self.base._inverse(pts)

    def _inverse(self, pts):
        return self.base._eval(pts)

    def _jacobian(self, pts):
        return np.linalg.inv(self.base._jacobian(self.base._inverse(pts)))

    def inverse_map(self):
        return self.base


# ---------------------------------------------------------------------------
# Conformal and anticonformal built-ins


class Identity(PlanarMap):
    name = "identity"

    def _eval(self, pts):
        return pts.copy()

    _inverse = _eval

    def _jacobian(self, pts):
        return np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()

    def _distortion(self, pts):
        return np.ones(len(pts))

    def inverse_map(self):
        return self


class Rotation(PlanarMap):
    name = "rotation"

    def __init__(self, angle: float):
        self.angle = float(angle)

    def _eval(self, pts):
        return pts @ _rot(self.angle).T

    def _inverse(self, pts):
        return pts @ _rot(-self.angle).T

    def _jacobian(self, pts):
        return np.broadcast_to(_rot(self.angle), (len(pts), 2, 2)).copy()

    def _distortion(self, pts):
        return np.ones(len(pts))

    def inverse_map(self):
        return Rotation(-self.angle)

    def to_config(self):
        return {"kind": "rotation", "angle": self.angle}


class VerticalDiameterReflection(PlanarMap):
    """``(x, y) -> (-x, y)``: reflection across the vertical diameter."""

    name = "vertical-reflection"
    orientation = -1

    def _eval(self, pts):
        out = pts.copy()
        out[:, 0] = -out[:, 0]
        return out

    _inverse = _eval

    def _jacobian(self, pts):
        return np.broadcast_to(np.diag([-1.0, 1.0]), (len(pts), 2, 2)).copy()

    def _distortion(self, pts):
        return np.ones(len(pts))

    def inverse_map(self):
        return self


class CircleInversion(PlanarMap):
    """``z -> z / |z|**2`` with ``0 <-> INFINITY``."""

    name = "inversion"
    orientation = -1
    singular_points = ((0.0, 0.0),)

    def _eval(self, pts):
        out = np.empty_like(pts)
        inf = np.isinf(pts).any(axis=1)
        r2 = np.sum(pts * pts, axis=1)
        zero = (r2 == 0) & ~inf
        reg = ~inf & ~zero
        out[reg] = pts[reg] / r2[reg, None]
        out[zero] = INFINITY
        out[inf] = 0.0
        return out

    _inverse = _eval

    def _jacobian(self, pts):
        r2 = np.sum(pts * pts, axis=1)
        if np.any(r2 == 0) or np.any(~np.isfinite(r2)):
            bad = pts[int(np.argmax((r2 == 0) | ~np.isfinite(r2)))]
            raise EvaluationError("inversion Jacobian is singular", bad)
        outer = pts[:, :, None] * pts[:, None, :]
        return (np.eye(2)[None] - 2.0 * outer / r2[:, None, None]) / r2[:, None, None]

    def _distortion(self, pts):
        self._jacobian(pts)
        return np.ones(len(pts))

    def inverse_map(self):
        return self


def circle_inversion(point):
    """Inversion in the unit circle; the origin and ``INFINITY`` are swapped."""
    return CircleInversion().eval(point)


# ---------------------------------------------------------------------------
# Angular stretch


class AngularStretch(PlanarMap):
    """Radius-preserving stretch flattening the model polar cusp.

    Forward, the cusp complement ``|theta| <= alpha(r)`` goes onto the right
    half-disk by ``Theta = theta r**(1-s)`` and the model cusp domain onto the
    left half-disk by ``Theta = pi + (theta - pi)(pi/2)/(pi - alpha)``.  Both
    branches are the identity on the unit circle.  ``inverse=True`` gives the
    exact algebraic inverse.
    """

    singular_points = ((0.0, 0.0),)

    def __init__(self, s, inverse: bool = False):
        s = float(s)
        if not s > 1.0:
            raise ConfigurationError("angular stretch needs s > 1")
        self.s = s
        self.inverted = bool(inverse)
        self.name = "angular-stretch-inverse" if inverse else "angular-stretch"

    @property
    def validity(self):
        return UnitDisk()

    def accepts(self, z):
        pts, single = _points(z)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return _unwrap(r <= 1.0 + _EDGE_TOL, single)

    def polar(self, r, theta):
        """Apply to polar coordinates; returns ``(r, Theta, c, d)`` with frame partials."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        s = self.s
        a = cusp_angle(r, s)
        t = np.mod(theta + math.pi, TWO_PI) - math.pi  # (-pi, pi]
        tm = np.mod(theta, TWO_PI)  # [0, 2pi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if not self.inverted:
                right = np.abs(t) <= a
                g = np.where(r > 0, np.power(np.where(r > 0, r, 1.0), 1.0 - s), math.inf)
                out_r = t * g
                d_r = g
                c_r = (1.0 - s) * out_r
                q = HALF_PI / (math.pi - a)
                out_l = math.pi + (tm - math.pi) * q
                d_l = np.broadcast_to(q, out_l.shape)
                c_l = (tm - math.pi) * HALF_PI * (s - 1.0) * a / (math.pi - a) ** 2
            else:
                right = np.abs(t) <= HALF_PI
                g = a / HALF_PI
                out_r = t * g
                d_r = np.broadcast_to(g, out_r.shape)
                c_r = (s - 1.0) * out_r
                q = (math.pi - a) / HALF_PI
                out_l = math.pi + (tm - math.pi) * q
                d_l = np.broadcast_to(q, out_l.shape)
                c_l = -(tm - math.pi) * (s - 1.0) * a / HALF_PI
        out = np.where(right, out_r, out_l)
        c = np.where(right, c_r, c_l)
        d = np.where(right, d_r, d_l)
        # the origin is fixed
        out = np.where(r > 0, out, 0.0)
        return r, out, c, d

    def _split(self, pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.arctan2(pts[:, 1], pts[:, 0])
        return r, th

    def _eval(self, pts):
        r, th = self._split(pts)
        _, out, _, _ = self.polar(r, th)
        return np.stack([r * np.cos(out), r * np.sin(out)], axis=-1)

    def _inverse(self, pts):
        return AngularStretch(self.s, not self.inverted)._eval(pts)

    def _jacobian(self, pts):
        r, th = self._split(pts)
        _, out, c, d = self.polar(r, th)
        return _frame_jacobian(th, out, c, d)

    def _distortion(self, pts):
        r, th = self._split(pts)
        _, _, c, d = self.polar(r, th)
        return distortion_lower_triangular(c, d, pts)

    def inverse_map(self):
        return AngularStretch(self.s, not self.inverted)

    def to_config(self):
        return {"kind": "angular-stretch", "s": self.s, "inverse": self.inverted}


def angular_stretch(s, r, theta, inverse: bool = False):
    """Polar evaluation of the angular stretch: ``(r, theta) -> (r, Theta)``.

    Raises :class:`DomainError` outside the closed unit disk.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr > 1.0 + _EDGE_TOL) or np.any(r_arr < 0):
        raise DomainError(f"angular stretch is defined on the closed unit disk, got r={r!r}")
    rr, out, _, _ = AngularStretch(s, inverse).polar(r_arr, theta)
    if np.ndim(out) == 0:
        return float(rr), float(out)
    return rr, out


# ---------------------------------------------------------------------------
# Vertical cusp stretch


class VerticalCuspStretch(PlanarMap):
    """``(x, y) -> (x, y x / rho(x))``: the rho-channel onto ``{|y| < x}``."""

    singular_points = ((0.0, 0.0),)

    def __init__(self, profile: CuspProfile, inverse: bool = False):
        self.profile = profile
        self.inverted = bool(inverse)
        self.name = "vertical-stretch-inverse" if inverse else "vertical-stretch"

    @property
    def validity(self):
        if self.inverted:
            return CuspChannel(CuspProfile.custom(lambda x: x, lambda x: np.ones_like(x)))
        return CuspChannel(self.profile)

    def accepts(self, z):
        pts, single = _points(z)
        x, y = pts[:, 0], pts[:, 1]
        xc = np.clip(x, 0.0, 1.0)
        w = xc if self.inverted else self.profile(xc)
        ok = (x > 0) & (x <= 1.0 + _EDGE_TOL) & (np.abs(y) <= w * (1.0 + _EDGE_TOL))
        return _unwrap(ok, single)

    def _parts(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        rho = self.profile(x)
        drho = self.profile.derivative(x)
        return x, y, rho, drho

    def _forward(self, pts):
        x, y, rho, _ = self._parts(pts)
        return np.stack([x, y * x / rho], axis=-1)

    def _backward(self, pts):
        x, y, rho, _ = self._parts(pts)
        return np.stack([x, y * rho / x], axis=-1)

    def _eval(self, pts):
        return self._backward(pts) if self.inverted else self._forward(pts)

    def _inverse(self, pts):
        return self._forward(pts) if self.inverted else self._backward(pts)

    def _cd(self, pts):
        x, y, rho, _ = self._parts(pts)
        xl = x * self.profile.log_derivative(x)  # x rho'/rho
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.inverted:
                return y * rho * (xl - 1.0) / x**2, rho / x
            return (y / rho) * (1.0 - xl), x / rho

    def det(self, z):
        pts, single = _points(z)
        self._check(pts)
        return _unwrap(self._cd(pts)[1], single)

    def _jacobian(self, pts):
        c, d = self._cd(pts)
        A = np.zeros((len(pts), 2, 2))
        A[:, 0, 0] = 1.0
        A[:, 1, 0] = c
        A[:, 1, 1] = d
        return A

    def _distortion(self, pts):
        c, d = self._cd(pts)
        return distortion_lower_triangular(c, d, pts)

    def inverse_map(self):
        return VerticalCuspStretch(self.profile, not self.inverted)

    def to_config(self):
        return {"kind": "vertical-stretch", "profile": self.profile.to_config(), "inverse": self.inverted}


def vertical_cusp_stretch(profile: CuspProfile, point, inverse: bool = False):
    return VerticalCuspStretch(profile, inverse).eval(point)


# ---------------------------------------------------------------------------
# Composition and user maps


class Composite(PlanarMap):
    """``maps[0] o maps[1] o ... o maps[-1]`` (the last map is applied first)."""

    def __init__(self, maps: Sequence[PlanarMap]):
        if not maps:
            raise CompositionError("compose needs at least one map")
        self.maps = tuple(maps)
        self.name = "compose(" + ", ".join(m.name for m in self.maps) + ")"
        self.orientation = int(np.prod([m.orientation for m in self.maps]))

    @property
    def validity(self):
        return self.maps[-1].validity

    def accepts(self, z):
        return self.maps[-1].accepts(z)

    def _stages(self, pts):
        """Images after each stage, checking that every range chains into the next map."""
        stages = [pts]
        w = pts
        for i, m in enumerate(reversed(self.maps)):
            if i > 0:
                ok = np.asarray(m.accepts(w))
                if not np.all(ok):
                    bad = w[int(np.argmin(ok))]
                    raise CompositionError(
                        f"intermediate point {tuple(bad)} is outside the validity region of {m.name}")
            w = m._eval(w)
            stages.append(w)
        return stages

    def _eval(self, pts):
        return self._stages(pts)[-1]

    def _inverse(self, pts):
        w = pts
        for m in self.maps:
            w = m._inverse(w)
        return w

    def _jacobian(self, pts):
        stages = self._stages(pts)
        A = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
        for m, z in zip(reversed(self.maps), stages[:-1]):
            A = m._jacobian(z) @ A
        return A

    def inverse_map(self):
        return Composite([m.inverse_map() for m in reversed(self.maps)])

    def to_config(self):
        return {"kind": "compose", "maps": [m.to_config() for m in self.maps]}


def compose(maps: Sequence[PlanarMap]) -> Composite:
    """Compose maps in mathematical order: ``compose([f, g])(z) = f(g(z))``."""
    return Composite(list(maps))


class FunctionMap(PlanarMap):
    """User-supplied map with analytic Jacobian and damped-Newton inverse.

    Parameters
    ----------
    func, jac : callable
        Vectorized ``(N, 2) -> (N, 2)`` and ``(N, 2) -> (N, 2, 2)``.
    seeds : array, optional
        Sample points; Newton starts from the seed whose image is nearest.
    """

    def __init__(self, func: Callable, jac: Callable, inverse: Optional[Callable] = None,
                 seeds=None, orientation: int = 1, name: str = "function",
                 max_iter: int = 50, tol: float = 1e-12):
        self.func = func
        self.jac = jac
        self.inv = inverse
        self.seeds = None if seeds is None else np.asarray(seeds, dtype=float).reshape(-1, 2)
        self.orientation = orientation
        self.name = name
        self.max_iter = max_iter
        self.tol = tol

    def _eval(self, pts):
        return np.asarray(self.func(pts), dtype=float)

    def _jacobian(self, pts):
        return np.asarray(self.jac(pts), dtype=float)

    def _inverse(self, pts):
        if self.inv is not None:
            return np.asarray(self.inv(pts), dtype=float)
        return self.newton_inverse(pts)

    def newton_inverse(self, targets):
        targets = np.asarray(targets, dtype=float).reshape(-1, 2)
        if self.seeds is not None and len(self.seeds):
            images = self._eval(self.seeds)
            dist = np.sum((targets[:, None, :] - images[None, :, :]) ** 2, axis=-1)
            z = self.seeds[np.argmin(dist, axis=1)].copy()
        else:
            z = targets.copy()
        scale = np.maximum(1.0, np.linalg.norm(targets, axis=1))
        res = self._eval(z) - targets
        for _ in range(self.max_iter):
            norm = np.linalg.norm(res, axis=1)
            active = norm > self.tol * scale
            if not np.any(active):
                break
            step = np.linalg.solve(self._jacobian(z[active]), res[active][..., None])[..., 0]
            t = np.ones(int(active.sum()))
            za = z[active]
            na = norm[active]
            # halve the step until the residual decreases
            for _ in range(30):
                trial = za - t[:, None] * step
                new_res = self._eval(trial) - targets[active]
                better = np.linalg.norm(new_res, axis=1) < na
                if np.all(better):
                    break
                t = np.where(better, t, 0.5 * t)
            z[active] = trial
            res[active] = new_res
        norm = np.linalg.norm(res, axis=1)
        if np.any(norm > self.tol * scale * 1e3):
            bad = targets[int(np.argmax(norm / scale))]
            raise EvaluationError("Newton inverse did not converge", bad)
        return z


# ---------------------------------------------------------------------------
# Public helpers


def distortion_at(planar_map: PlanarMap, point):
    """Optimal distortion ``K`` of ``planar_map`` at ``point`` (scalar or array)."""
    return planar_map.distortion(point)


def map_from_config(cfg) -> PlanarMap:
    if isinstance(cfg, PlanarMap):
        return cfg
    if isinstance(cfg, list):
        return compose([map_from_config(c) for c in cfg])
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"cannot build a map from {cfg!r}")
    if "compose" in cfg:
        return compose([map_from_config(c) for c in cfg["compose"]])
    kind = str(cfg.get("kind", "")).lower()
    inverse = bool(cfg.get("inverse", False))
    if kind == "identity":
        return Identity()
    if kind == "rotation":
        return Rotation(float(cfg.get("angle", 0.0)))
    if kind in ("inversion", "circle-inversion"):
        return CircleInversion()
    if kind in ("vertical-reflection", "reflection"):
        return VerticalDiameterReflection()
    if kind == "angular-stretch":
        if "s" not in cfg:
            raise ConfigurationError("angular-stretch needs s")
        return AngularStretch(float(cfg["s"]), inverse)
    if kind == "vertical-stretch":
        return VerticalCuspStretch(profile_from_config(cfg.get("profile", "exp")), inverse)
    if kind == "compose":
        return compose([map_from_config(c) for c in cfg.get("maps", [])])
    raise ConfigurationError(f"unknown map kind {kind!r}")
