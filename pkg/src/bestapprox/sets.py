"""Closed convex sets with exact projection maps.

Six set descriptors cover the geometry used throughout the package: an
axis-aligned box, a 1-D interval, a line given by a point and a normal,
a halfspace, a Euclidean ball, and the nonnegative orthant.  Every
descriptor is immutable plain data and knows how to project a point onto
itself, measure the distance to a point, and test membership of a
direction in its normal cone.

Two numeric conventions matter for everything downstream:

* Projections onto bound-based descriptors (``Box``, ``Interval``,
  ``Orthant``) are branch-based clamps that return the stored bound
  value itself whenever a bound is active.  Equality tests against
  vertex coordinates are therefore exact in floating point, which is
  what makes stall counting an exact integer comparison rather than a
  tolerance test.
* ``Line`` keeps the normal vector exactly as provided (privately, next
  to the normalized copy it publishes) and projects using the raw
  vector.  Rational inputs such as ``(1, 1)`` then produce projections
  with no normalization rounding at all.

Scalar tolerances in this module are absolute; all supported problems
live at desk scale (coordinates up to a few hundred).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Union

import numpy as np

__all__ = [
    "Vec2",
    "Point",
    "SetDescriptor",
    "Box",
    "Interval",
    "Line",
    "Halfspace",
    "Ball",
    "Orthant",
    "InfeasibleError",
    "project",
    "contains",
    "distance_to",
    "normal_cone_contains",
    "nearest_point_oracle",
    "set_to_json",
    "set_from_json",
]

_INF = math.inf


class Vec2(NamedTuple):
    """A point of the plane.  Named fields, tuple semantics, cheap to make."""

    x1: float
    x2: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x1 + other.x1, self.x2 + other.x2)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x1 - other.x1, self.x2 - other.x2)

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x1, -self.x2)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x1 * s, self.x2 * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x1 * other.x1 + self.x2 * other.x2

    def norm(self) -> float:
        return math.hypot(self.x1, self.x2)


#: Points are either planar (``Vec2``) or scalar (``float``, for 1-D sets).
Point = Union[float, Vec2]


class InfeasibleError(ValueError):
    """Raised when a feasibility search finds no point of the intersection."""


def _clamp(t: float, lo: float, hi: float) -> float:
    # Branches, never arithmetic: an active bound is returned bit-exactly.
    if t < lo:
        return lo
    if t > hi:
        return hi
    return t


def _coerce(x: object) -> Point:
    if isinstance(x, Vec2):
        return x
    if isinstance(x, bool):
        raise TypeError("points must be numbers or pairs, not bool")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, (tuple, list)) and len(x) == 2:
        return Vec2(float(x[0]), float(x[1]))
    raise TypeError(f"cannot interpret {x!r} as a point")


def _point_dim(p: Point) -> int:
    return 2 if isinstance(p, Vec2) else 1


def _require_finite(p: Point) -> None:
    if isinstance(p, Vec2):
        if not (math.isfinite(p.x1) and math.isfinite(p.x2)):
            raise ValueError(f"point has non-finite coordinates: {p!r}")
    elif not math.isfinite(p):
        raise ValueError(f"point is not finite: {p!r}")


def _bound_cone_ok(x: float, d: float, lo: float, hi: float, tol: float) -> bool:
    """Normal cone of ``[lo, hi]`` at ``x``: a positive component of the
    direction needs the upper bound active, a negative one the lower."""
    if d > tol:
        return hi < _INF and x >= hi - tol
    if d < -tol:
        return lo > -_INF and x <= lo + tol
    return True


@dataclass(frozen=True)
class Interval:
    """A closed interval of the real line; either end may be infinite."""

    lo: float
    hi: float

    dim = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval bounds must not be NaN")
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")

    @property
    def is_affine(self) -> bool:
        return self.lo == self.hi or (self.lo == -_INF and self.hi == _INF)

    def project(self, x: float) -> float:
        return _clamp(x, self.lo, self.hi)

    def distance(self, x: float) -> float:
        return abs(x - _clamp(x, self.lo, self.hi))

    def _np_distance(self, xs: "np.ndarray") -> "np.ndarray":
        return np.abs(xs - np.clip(xs, self.lo, self.hi))

    def _in_normal_cone(self, x: float, d: float, tol: float) -> bool:
        return _bound_cone_ok(x, d, self.lo, self.hi, tol)


@dataclass(frozen=True)
class Box:
    """An axis-aligned rectangle; any bound may be infinite."""

    lo: Vec2
    hi: Vec2

    dim = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_vec2(self.lo))
        object.__setattr__(self, "hi", _as_vec2(self.hi))
        for a, b in ((self.lo.x1, self.hi.x1), (self.lo.x2, self.hi.x2)):
            if math.isnan(a) or math.isnan(b):
                raise ValueError("box bounds must not be NaN")
            if not a <= b:
                raise ValueError(f"empty box: lo={self.lo} hi={self.hi}")

    @property
    def is_affine(self) -> bool:
        def free_or_pinned(a: float, b: float) -> bool:
            return a == b or (a == -_INF and b == _INF)

        return free_or_pinned(self.lo.x1, self.hi.x1) and free_or_pinned(
            self.lo.x2, self.hi.x2
        )

    def project(self, x: Vec2) -> Vec2:
        return Vec2(
            _clamp(x.x1, self.lo.x1, self.hi.x1),
            _clamp(x.x2, self.lo.x2, self.hi.x2),
        )

    def distance(self, x: Vec2) -> float:
        p = self.project(x)
        return math.hypot(x.x1 - p.x1, x.x2 - p.x2)

    def _np_distance(self, xs: "np.ndarray", ys: "np.ndarray") -> "np.ndarray":
        return np.hypot(
            xs - np.clip(xs, self.lo.x1, self.hi.x1),
            ys - np.clip(ys, self.lo.x2, self.hi.x2),
        )

    def _in_normal_cone(self, x: Vec2, d: Vec2, tol: float) -> bool:
        return _bound_cone_ok(
            x.x1, d.x1, self.lo.x1, self.hi.x1, tol
        ) and _bound_cone_ok(x.x2, d.x2, self.lo.x2, self.hi.x2, tol)


@dataclass(frozen=True)
class Line:
    """A line in the plane: all x with ``<x - u, v> = 0``.

    ``u`` is an anchor point on the line and ``v`` the published unit
    normal.  The constructor accepts a normal of any non-negligible
    length and normalizes it, but also retains the vector exactly as
    given: projections use the raw normal, so inputs with exactly
    representable coordinates keep exactly representable projections
    (``v=(1, 1)`` projects ``(-1, -1)`` to ``(0.5, 0.5)`` with no
    rounding, because ``<v, v> = 2`` is exact).
    """

    u: Vec2
    v: Vec2
    _w: Vec2 = field(init=False, repr=False, compare=False)
    _ww: float = field(init=False, repr=False, compare=False)

    dim = 2
    is_affine = True

    def __post_init__(self) -> None:
        u = _as_vec2(self.u)
        raw = _as_vec2(self.v)
        _require_finite(u)
        _require_finite(raw)
        n = raw.norm()
        if n < 1e-12:
            raise ValueError(f"line normal is too short to normalize: {raw!r}")
        # Keep an already-unit normal bit-identical instead of dividing by
        # a norm that rounds to something within an ulp of one.
        unit = raw if abs(n - 1.0) <= 1e-12 else Vec2(raw.x1 / n, raw.x2 / n)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", unit)
        object.__setattr__(self, "_w", raw)
        object.__setattr__(self, "_ww", raw.dot(raw))

    def project(self, x: Vec2) -> Vec2:
        w = self._w
        t = ((x.x1 - self.u.x1) * w.x1 + (x.x2 - self.u.x2) * w.x2) / self._ww
        return Vec2(x.x1 - t * w.x1, x.x2 - t * w.x2)

    def distance(self, x: Vec2) -> float:
        return abs((x - self.u).dot(self.v))

    def _np_distance(self, xs: "np.ndarray", ys: "np.ndarray") -> "np.ndarray":
        return np.abs((xs - self.u.x1) * self.v.x1 + (ys - self.u.x2) * self.v.x2)

    def _in_normal_cone(self, x: Vec2, d: Vec2, tol: float) -> bool:
        # Normal cone of an affine set: the span of the normal, at every
        # point.  Test that the tangential component of d vanishes.
        tangent = Vec2(self.v.x2, -self.v.x1)
        return abs(d.dot(tangent)) <= tol * (1.0 + d.norm())


@dataclass(frozen=True)
class Halfspace:
    """All x with ``<normal, x> <= offset``; the normal need not be unit."""

    normal: Vec2
    offset: float

    dim = 2
    is_affine = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", _as_vec2(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        _require_finite(self.normal)
        if not math.isfinite(self.offset):
            raise ValueError("halfspace offset must be finite")
        if self.normal.norm() < 1e-12:
            raise ValueError("halfspace normal is too short")

    def project(self, x: Vec2) -> Vec2:
        s = self.normal.dot(x) - self.offset
        if s <= 0.0:
            return x
        t = s / self.normal.dot(self.normal)
        return Vec2(x.x1 - t * self.normal.x1, x.x2 - t * self.normal.x2)

    def distance(self, x: Vec2) -> float:
        s = self.normal.dot(x) - self.offset
        return max(s, 0.0) / self.normal.norm()

    def _np_distance(self, xs: "np.ndarray", ys: "np.ndarray") -> "np.ndarray":
        s = self.normal.x1 * xs + self.normal.x2 * ys - self.offset
        return np.maximum(s, 0.0) / self.normal.norm()

    def _in_normal_cone(self, x: Vec2, d: Vec2, tol: float) -> bool:
        # On the boundary the cone is the nonnegative multiples of the
        # normal; in the interior it is {0}.
        n = self.normal
        scale = 1.0 + d.norm()
        t = d.dot(n) / n.dot(n)
        resid = (d - t * n).norm()
        if resid > tol * scale:
            return False
        if t < -tol * scale:
            return False
        if t * n.norm() > tol * scale:
            # Direction is a genuinely positive multiple: x must sit on
            # the boundary hyperplane.
            slack = (self.offset - n.dot(x)) / n.norm()
            if slack > tol * (1.0 + x.norm()):
                return False
        return True


@dataclass(frozen=True)
class Ball:
    """The closed Euclidean ball of positive radius around a center."""

    center: Vec2
    radius: float

    dim = 2
    is_affine = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_vec2(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        _require_finite(self.center)
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def project(self, x: Vec2) -> Vec2:
        r = x - self.center
        d = r.norm()
        if d <= self.radius:
            return x
        s = self.radius / d
        return Vec2(self.center.x1 + r.x1 * s, self.center.x2 + r.x2 * s)

    def distance(self, x: Vec2) -> float:
        return max((x - self.center).norm() - self.radius, 0.0)

    def _np_distance(self, xs: "np.ndarray", ys: "np.ndarray") -> "np.ndarray":
        d = np.hypot(xs - self.center.x1, ys - self.center.x2)
        return np.maximum(d - self.radius, 0.0)

    def _in_normal_cone(self, x: Vec2, d: Vec2, tol: float) -> bool:
        scale = 1.0 + d.norm()
        if d.norm() <= tol:
            return True
        r = x - self.center
        if self.radius - r.norm() > tol * (1.0 + self.radius):
            return False  # interior point: cone is {0}, d is not ~0
        t = d.dot(r) / r.dot(r)
        resid = (d - t * r).norm()
        return t >= -tol * scale and resid <= tol * scale


@dataclass(frozen=True)
class Orthant:
    """The nonnegative quadrant, a closed convex cone."""

    dim = 2
    is_affine = False

    def project(self, x: Vec2) -> Vec2:
        return Vec2(_clamp(x.x1, 0.0, _INF), _clamp(x.x2, 0.0, _INF))

    def distance(self, x: Vec2) -> float:
        return math.hypot(max(-x.x1, 0.0), max(-x.x2, 0.0))

    def _np_distance(self, xs: "np.ndarray", ys: "np.ndarray") -> "np.ndarray":
        return np.hypot(np.maximum(-xs, 0.0), np.maximum(-ys, 0.0))

    def _in_normal_cone(self, x: Vec2, d: Vec2, tol: float) -> bool:
        return _bound_cone_ok(x.x1, d.x1, 0.0, _INF, tol) and _bound_cone_ok(
            x.x2, d.x2, 0.0, _INF, tol
        )


SetDescriptor = Union[Box, Interval, Line, Halfspace, Ball, Orthant]


def _as_vec2(x: object) -> Vec2:
    p = _coerce(x)
    if not isinstance(p, Vec2):
        raise TypeError(f"expected a planar point, got {x!r}")
    return p


def _checked(s: SetDescriptor, x: object) -> Point:
    p = _coerce(x)
    _require_finite(p)
    if _point_dim(p) != s.dim:
        raise TypeError(
            f"{type(s).__name__} lives in dimension {s.dim}, "
            f"got a point of dimension {_point_dim(p)}"
        )
    return p


def project(s: SetDescriptor, x: object) -> Point:
    """Nearest point of ``s`` to ``x``.

    Accepts a ``Vec2`` (or a plain pair) for planar sets and a number
    for ``Interval``.  The result is always exactly inside the set for
    the bound-based descriptors.
    """
    return s.project(_checked(s, x))


def distance_to(s: SetDescriptor, x: object) -> float:
    """Euclidean distance from ``x`` to ``s`` (zero inside)."""
    return s.distance(_checked(s, x))


def contains(s: SetDescriptor, x: object, tol: float = 0.0) -> bool:
    """Membership test: distance to the set at most ``tol``.

    With ``tol=0`` this is exact membership; every descriptor is a
    finite conjunction of closed inequalities that evaluate exactly.
    """
    if not (math.isfinite(tol) and tol >= 0.0):
        raise ValueError(f"tolerance must be finite and nonnegative: {tol}")
    return s.distance(_checked(s, x)) <= tol


def normal_cone_contains(
    s: SetDescriptor, point: object, direction: object, tol: float = 1e-10
) -> bool:
    """Whether ``direction`` lies in the normal cone of ``s`` at ``point``.

    ``point`` must belong to the set within ``tol`` (precondition error
    otherwise).  Scalar comparisons use the absolute tolerance ``tol``;
    the default 1e-10 sits two orders above accumulated rounding for
    desk-scale data.
    """
    p = _checked(s, point)
    d = _checked(s, direction)
    if not contains(s, p, tol):
        raise ValueError(f"point {point!r} is not in the set (within {tol})")
    return s._in_normal_cone(p, d, tol)


# ---------------------------------------------------------------------------
# Independent nearest-point search
# ---------------------------------------------------------------------------

_GRID = 25  # odd, so the incumbent stays on the grid after recentering
_LEVELS = 60  # window halvings; 2^-60 of the initial width is ~1e-18 relative


def _pair_distance(a: SetDescriptor, b: SetDescriptor, p: Point) -> float:
    return a.distance(p) + b.distance(p)


def nearest_point_oracle(
    set_a: SetDescriptor, set_b: SetDescriptor, z: object
) -> Point:
    """Nearest point of ``set_a ∩ set_b`` to ``z``, found by search.

    This is a test oracle and deliberately knows nothing about the
    iterative solvers: it combines two single-set projection shortcuts
    (each exactly optimal whenever it lands inside the other set) with a
    coarse grid over a bounding window of half-width ``8*(1+|z|)``,
    refined by repeatedly bisecting the window around the incumbent, 60
    times.  The result is feasible within 1e-9 for both sets and within
    1e-6 of the true minimum distance.

    Raises :class:`InfeasibleError` when the window contains no point of
    the intersection (empty intersection, or one too far from ``z``).
    """
    zp = _checked(set_a, z)
    if set_b.dim != set_a.dim:
        raise TypeError("sets live in different dimensions")

    feas_tol = 1e-12
    if set_a.distance(zp) <= feas_tol and set_b.distance(zp) <= feas_tol:
        return zp

    # If the projection of z onto one set already satisfies the other,
    # it minimizes the distance over a superset of the intersection and
    # is therefore the exact answer.
    shortcuts = []
    pa = set_a.project(zp)
    if set_b.distance(pa) <= feas_tol:
        shortcuts.append(pa)
    pb = set_b.project(zp)
    if set_a.distance(pb) <= feas_tol:
        shortcuts.append(pb)
    if shortcuts:
        if isinstance(zp, Vec2):
            return min(shortcuts, key=lambda p: (p - zp).norm())
        return min(shortcuts, key=lambda p: abs(p - zp))

    if isinstance(zp, Vec2):
        return _grid_search_2d(set_a, set_b, zp)
    return _grid_search_1d(set_a, set_b, zp)


def _grid_search_2d(a: SetDescriptor, b: SetDescriptor, z: Vec2) -> Vec2:
    width = 8.0 * (1.0 + z.norm())
    center = z
    best = None
    for _ in range(_LEVELS):
        xs = np.linspace(center.x1 - width, center.x1 + width, _GRID)
        ys = np.linspace(center.x2 - width, center.x2 + width, _GRID)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        cell_diag = math.hypot(xs[1] - xs[0], ys[1] - ys[0])
        slack = 1.5 * cell_diag + 1e-15 * (1.0 + z.norm())
        resid = a._np_distance(gx, gy) + b._np_distance(gx, gy)
        objective = np.hypot(gx - z.x1, gy - z.x2)
        objective[resid > slack] = _INF
        k = int(np.argmin(objective))
        if objective.flat[k] < _INF:
            center = Vec2(float(gx.flat[k]), float(gy.flat[k]))
            best = center
        width *= 0.5
    if best is None or _pair_distance(a, b, best) > 1e-9:
        raise InfeasibleError(
            "no feasible point found: the intersection is empty or lies "
            "outside the search window"
        )
    return best


def _grid_search_1d(a: SetDescriptor, b: SetDescriptor, z: float) -> float:
    width = 8.0 * (1.0 + abs(z))
    center = z
    best = None
    for _ in range(_LEVELS):
        xs = np.linspace(center - width, center + width, _GRID)
        slack = 1.5 * (xs[1] - xs[0]) + 1e-15 * (1.0 + abs(z))
        resid = a._np_distance(xs) + b._np_distance(xs)
        objective = np.abs(xs - z)
        objective[resid > slack] = _INF
        k = int(np.argmin(objective))
        if objective[k] < _INF:
            center = float(xs[k])
            best = center
        width *= 0.5
    if best is None or _pair_distance(a, b, best) > 1e-9:
        raise InfeasibleError(
            "no feasible point found: the intersection is empty or lies "
            "outside the search window"
        )
    return best


# ---------------------------------------------------------------------------
# JSON encoding
# ---------------------------------------------------------------------------


def _num_out(x: float) -> object:
    if x == _INF:
        return "inf"
    if x == -_INF:
        return "-inf"
    return x


def _num_in(x: object) -> float:
    if x == "inf":
        return _INF
    if x == "-inf":
        return -_INF
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    raise ValueError(f"expected a number or an infinity sentinel, got {x!r}")


def _vec_out(v: Vec2) -> List[object]:
    return [_num_out(v.x1), _num_out(v.x2)]


def _vec_in(v: object) -> Vec2:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ValueError(f"expected a coordinate pair, got {v!r}")
    return Vec2(_num_in(v[0]), _num_in(v[1]))


def set_to_json(s: SetDescriptor) -> dict:
    """Canonical JSON object for a set descriptor."""
    if isinstance(s, Box):
        return {"kind": "box", "lo": _vec_out(s.lo), "hi": _vec_out(s.hi)}
    if isinstance(s, Interval):
        return {"kind": "interval", "lo": _num_out(s.lo), "hi": _num_out(s.hi)}
    if isinstance(s, Line):
        return {"kind": "line", "u": _vec_out(s.u), "v": _vec_out(s.v)}
    if isinstance(s, Halfspace):
        return {
            "kind": "halfspace",
            "normal": _vec_out(s.normal),
            "offset": s.offset,
        }
    if isinstance(s, Ball):
        return {"kind": "ball", "center": _vec_out(s.center), "radius": s.radius}
    if isinstance(s, Orthant):
        return {"kind": "orthant"}
    raise TypeError(f"not a set descriptor: {s!r}")


def set_from_json(obj: dict) -> SetDescriptor:
    """Inverse of :func:`set_to_json`."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError(f"not a set descriptor object: {obj!r}")
    kind = obj["kind"]
    try:
        if kind == "box":
            return Box(_vec_in(obj["lo"]), _vec_in(obj["hi"]))
        if kind == "interval":
            return Interval(_num_in(obj["lo"]), _num_in(obj["hi"]))
        if kind == "line":
            return Line(_vec_in(obj["u"]), _vec_in(obj["v"]))
        if kind == "halfspace":
            return Halfspace(_vec_in(obj["normal"]), _num_in(obj["offset"]))
        if kind == "ball":
            return Ball(_vec_in(obj["center"]), _num_in(obj["radius"]))
        if kind == "orthant":
            return Orthant()
    except KeyError as exc:
        raise ValueError(f"set descriptor {kind!r} is missing field {exc}") from exc
    raise ValueError(f"unknown set kind: {kind!r}")
