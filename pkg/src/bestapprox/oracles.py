"""Closed-form predictions for the supported best-approximation geometries.

The centerpiece is the line–square family: the first set is a line in
the plane, the second is the square ``[-1, 1]^2``.  Up to the square's
symmetries, every such problem can be posed canonically — unit normal
``v`` with both components positive, the line crossing the top edge at
``u = (u(1), 1)`` with ``-1 < u(1) <= 1``.  In that pose the behavior of
Dykstra's algorithm is governed entirely by the first projection
``a_1 = P_A(z)``:

* ``u(1) <= a_1(1) <= 1`` and ``|a_1(2)| <= 1`` — the iteration halts
  finitely at ``a_1`` (*RapidFinite*);
* ``-1 < a_1(1) < u(1)`` and ``a_1(2) > 1`` — Dykstra and plain
  alternating projections walk through identical points toward ``u``
  (*MapCoincident*);
* ``a_1(1) <= -1`` and ``a_1(2) > 1`` — the b-iterates pin to the vertex
  ``(-1, 1)`` for an exactly predictable number of steps before breaking
  free, still converging to ``u`` (*Stalling*).

The stall length, the abscissa of the break-free iterate, the stalled
``a``- and ``q``-iterates, and the limit all have closed forms, exposed
here and verified against numerical runs by the test suite.  Horizontal
and vertical lines are a separate, fully finite case (*ParallelFinite*).

Two more special cases round out the module: the exact per-iterate trace
for the pair of half-lines ``[0, ∞)`` and ``[1, ∞)`` on the real line,
and the composition identity for the nonnegative quadrant with a ball
around the origin.

Formulas are evaluated left to right exactly as written; where a
prediction sits on a floating-point knife edge (an integer ratio inside
``floor``), the documented contract is that ratios within one ulp of an
integer may round either way, and consumers are expected to exclude or
special-case those inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple, Union

from .sets import (
    Ball,
    Box,
    InfeasibleError,
    Interval,
    Line,
    Orthant,
    Point,
    Vec2,
)
from .sets import _coerce, _require_finite
from .solvers import DykstraState

__all__ = [
    "DegenerateGeometryError",
    "LineSquareProblem",
    "ParallelProblem",
    "Region",
    "RegionClass",
    "Normalization",
    "TRANSFORM_OPS",
    "apply_transform",
    "invert_transform",
    "normalize_symmetry",
    "classify_region",
    "normalize_and_classify",
    "stall_length",
    "break_free_abscissa",
    "closed_form_a_next",
    "closed_form_q",
    "stall_condition",
    "analytic_limit",
    "two_interval_trace",
    "cone_ball_projection",
]


class DegenerateGeometryError(ValueError):
    """The line meets the square in a way the canonical pose cannot
    represent (single corner contact, or only corner-anchored poses)."""


THE_SQUARE = Box(Vec2(-1.0, -1.0), Vec2(1.0, 1.0))


@dataclass(frozen=True)
class LineSquareProblem:
    """A canonically posed line–square instance.

    ``u`` is the anchor on the top edge (``u.x2`` is exactly 1.0,
    ``-1 < u.x1 <= 1``), ``v`` the line's normal with both components
    strictly positive, ``z`` the start point.  The second set is always
    the square ``[-1, 1]^2``.  ``line`` is the ready-made descriptor;
    it projects with the normal exactly as supplied (see
    :class:`bestapprox.sets.Line`), so exactly representable normals
    give exactly representable projections.
    """

    u: Vec2
    v: Vec2
    z: Vec2
    line: Line = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        u = _as_vec2(self.u)
        z = _as_vec2(self.z)
        _require_finite(u)
        _require_finite(z)
        line = Line(u, self.v)
        v = line.v
        if not (v.x1 > 0.0 and v.x2 > 0.0):
            raise ValueError(
                f"canonical pose needs a strictly positive normal, got {v!r}"
            )
        if u.x2 != 1.0:
            raise ValueError(f"anchor must sit on the top edge, got {u!r}")
        if not -1.0 < u.x1 <= 1.0:
            raise ValueError(
                f"anchor abscissa must lie in (-1, 1], got {u.x1!r}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "line", line)

    def first_projection(self) -> Vec2:
        """``a_1 = P_A(z)``, the quantity the whole classification reads."""
        return self.line.project(self.z)


@dataclass(frozen=True)
class ParallelProblem:
    """An axis-parallel line against the square: the line ``x2 = alpha``
    (after the recorded transform), with ``|alpha| <= 1``."""

    alpha: float
    z: Vec2

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "z", _as_vec2(self.z))
        if not abs(self.alpha) <= 1.0:
            raise InfeasibleError(
                f"horizontal line at level {self.alpha} misses the square"
            )


class Region(str, __import__("enum").Enum):
    RAPID_FINITE = "RapidFinite"
    PARALLEL_FINITE = "ParallelFinite"
    MAP_COINCIDENT = "MapCoincident"
    STALLING = "Stalling"
    OUT_OF_SCOPE = "OutOfScopeOrientation"


class RegionClass(NamedTuple):
    """Classification outcome; ``predicted_stall`` only for ``STALLING``."""

    region: Region
    predicted_stall: Optional[int] = None


class Normalization(NamedTuple):
    """A canonical problem plus the symmetry transform that produced it.

    ``transform`` is a tuple of operation names applied left to right;
    every operation is its own inverse, so applying the reversed tuple
    maps canonical-frame results back to the caller's frame.
    """

    problem: Union[LineSquareProblem, ParallelProblem]
    transform: Tuple[str, ...]


def _as_vec2(x: object) -> Vec2:
    p = _coerce(x)
    if not isinstance(p, Vec2):
        raise TypeError(f"expected a planar point, got {x!r}")
    return p


# ---------------------------------------------------------------------------
# Square symmetries
# ---------------------------------------------------------------------------

#: The generating operations: swap the coordinates, negate the first,
#: negate the second.  Each is self-inverse.
TRANSFORM_OPS = ("swap", "flip1", "flip2")

# All eight symmetries of the square, ordered by preference: fewest
# operations first; among single reflections prefer the coordinate-2
# flip, then the coordinate-1 flip, then the swap.
_POSES: Tuple[Tuple[str, ...], ...] = (
    (),
    ("flip2",),
    ("flip1",),
    ("swap",),
    ("flip1", "flip2"),
    ("swap", "flip2"),
    ("swap", "flip1"),
    ("swap", "flip1", "flip2"),
)


def apply_transform(transform: Tuple[str, ...], p: object) -> Vec2:
    """Apply a symmetry (a tuple of operation names, left to right)."""
    q = _as_vec2(p)
    for op in transform:
        if op == "swap":
            q = Vec2(q.x2, q.x1)
        elif op == "flip1":
            q = Vec2(-q.x1, q.x2)
        elif op == "flip2":
            q = Vec2(q.x1, -q.x2)
        else:
            raise ValueError(f"unknown transform operation {op!r}")
    return q


def invert_transform(transform: Tuple[str, ...], p: object) -> Vec2:
    """Undo :func:`apply_transform` (operations are self-inverse, so the
    inverse is the reversed tuple)."""
    return apply_transform(tuple(reversed(transform)), p)


def normalize_symmetry(u: object, v: object, z: object) -> Normalization:
    """Pose a raw line (anchor ``u``, normal ``v``) and start point ``z``
    canonically using the square's symmetries.

    Returns the canonical problem and the transform that got there.  A
    line with an axis-parallel normal becomes a :class:`ParallelProblem`
    (swapped to horizontal if needed).  Otherwise the chosen pose has a
    strictly positive normal and anchors the line at its crossing of the
    top edge, picking — among the valid poses — the one whose anchor is
    nearest to the side the first projection falls on (smallest signed
    tangential offset of ``P_A z`` from the anchor); ties fall to the
    preference order above.

    Raises :class:`~bestapprox.sets.InfeasibleError` when the line
    misses the square, and :class:`DegenerateGeometryError` when it only
    touches a corner or when every crossing pose would anchor exactly at
    a corner.
    """
    u_raw = _as_vec2(u)
    v_raw = _as_vec2(v)
    zp = _as_vec2(z)
    _require_finite(u_raw)
    _require_finite(v_raw)
    _require_finite(zp)
    norm = v_raw.norm()
    if norm < 1e-12:
        raise ValueError(f"line normal is too short to normalize: {v_raw!r}")
    vhat = v_raw if abs(norm - 1.0) <= 1e-12 else Vec2(v_raw.x1 / norm, v_raw.x2 / norm)
    c = u_raw.dot(vhat)

    # Axis-parallel normals: the fully finite parallel case.
    if vhat.x1 == 0.0 or vhat.x2 == 0.0:
        transform: Tuple[str, ...] = () if vhat.x1 == 0.0 else ("swap",)
        v_t = apply_transform(transform, vhat)
        z_t = apply_transform(transform, zp)
        alpha = c / v_t.x2
        if abs(alpha) > 1.0:
            raise InfeasibleError(
                f"axis-parallel line at level {alpha} misses the square"
            )
        return Normalization(ParallelProblem(alpha, z_t), transform)

    reach = abs(vhat.x1) + abs(vhat.x2)  # support value of the square at vhat
    if abs(c) > reach:
        raise InfeasibleError("the line does not meet the square")
    if abs(c) == reach:
        raise DegenerateGeometryError(
            "the line touches the square in a single corner"
        )

    best = None  # (s_star, order_index, pose data)
    for idx, t in enumerate(_POSES):
        v_t = apply_transform(t, vhat)
        c_t = c
        if v_t.x1 < 0.0 and v_t.x2 < 0.0:
            v_t = -v_t
            c_t = -c_t
        if not (v_t.x1 > 0.0 and v_t.x2 > 0.0):
            continue
        u1 = (c_t - v_t.x2) / v_t.x1  # crossing of the top edge x2 = 1
        if not -1.0 < u1 <= 1.0:
            continue
        u_t = Vec2(u1, 1.0)
        z_t = apply_transform(t, zp)
        tangent = Vec2(v_t.x2, -v_t.x1)
        s_star = (z_t - u_t).dot(tangent)
        if best is None or s_star < best[0] - 1e-9 * (1.0 + abs(best[0])):
            raw_t = apply_transform(t, v_raw)
            if raw_t.x1 < 0.0 and raw_t.x2 < 0.0:
                raw_t = -raw_t
            best = (s_star, idx, LineSquareProblem(u_t, raw_t, z_t), t)
    if best is None:
        raise DegenerateGeometryError(
            "every crossing pose anchors at a corner of the square"
        )
    return Normalization(best[2], best[3])


# ---------------------------------------------------------------------------
# Classification and closed forms
# ---------------------------------------------------------------------------


def classify_region(
    problem: Union[LineSquareProblem, ParallelProblem]
) -> RegionClass:
    """Read the region off the first projection ``a_1 = P_A(z)``.

    Hypotheses are evaluated RapidFinite → MapCoincident → Stalling; the
    boundary ``a_1(1) = u(1)`` belongs to RapidFinite.  Points matching
    none (below or right of the square, after normalization) are
    ``OutOfScopeOrientation``: no prediction is offered there.
    """
    if isinstance(problem, ParallelProblem):
        return RegionClass(Region.PARALLEL_FINITE)
    a1 = problem.first_projection()
    u1 = problem.u.x1
    if u1 <= a1.x1 <= 1.0 and abs(a1.x2) <= 1.0:
        return RegionClass(Region.RAPID_FINITE)
    if -1.0 < a1.x1 < u1 and a1.x2 > 1.0:
        return RegionClass(Region.MAP_COINCIDENT)
    if a1.x1 <= -1.0 and a1.x2 > 1.0:
        return RegionClass(
            Region.STALLING, stall_length(a1, problem.u, problem.v)
        )
    return RegionClass(Region.OUT_OF_SCOPE)


def normalize_and_classify(u: object, v: object, z: object):
    """Convenience composition: normalize, then classify.

    Returns ``(normalization, region_class)``.
    """
    normalization = normalize_symmetry(u, v, z)
    return normalization, classify_region(normalization.problem)


def _check_stall_inputs(a1: Vec2, u: Vec2, v: Vec2) -> None:
    if not (a1.x1 <= -1.0 and a1.x2 > 1.0):
        raise ValueError(
            f"a_1={a1!r} is not in the stalling region "
            "(需要 a_1(1) <= -1 and a_1(2) > 1)"
        )
    if not (v.x1 > 0.0 and v.x2 > 0.0 and abs(v.norm() - 1.0) <= 1e-12):
        raise ValueError(f"v={v!r} is not a canonical unit normal")
    if not (-1.0 < u.x1 <= 1.0 and u.x2 == 1.0):
        raise ValueError(f"u={u!r} is not a canonical anchor")


def stall_length(a1: object, u: object, v: object) -> int:
    """Exact number of iterations the b-iterate spends at ``(-1, 1)``.

        n = 1 + floor( (-1 - a_1(1)) / ((u(1) + 1) * v(1)^2) )

    ``b_1 = ... = b_n = (-1, 1)`` and ``b_{n+1}`` has left the vertex.
    The quotient is formed in floating point; inputs whose exact ratio
    is within one ulp of an integer may round to either neighbor, and
    exact-count consumers must treat such inputs as boundary cases.
    """
    a1v = _as_vec2(a1)
    uv = _as_vec2(u)
    vv = _as_vec2(v)
    _check_stall_inputs(a1v, uv, vv)
    ratio = (-1.0 - a1v.x1) / ((uv.x1 + 1.0) * (vv.x1 * vv.x1))
    return 1 + math.floor(ratio)


def break_free_abscissa(a1: object, u: object, v: object, n: int) -> float:
    """First coordinate of the iterate that leaves the vertex:
    ``b_{n+1}(1) = a_1(1) + n*(u(1)+1)*v(1)^2`` (its second coordinate
    is exactly 1).  ``n`` must be the stall length for these inputs."""
    a1v = _as_vec2(a1)
    uv = _as_vec2(u)
    vv = _as_vec2(v)
    expected = stall_length(a1v, uv, vv)
    if n != expected:
        raise ValueError(
            f"n={n} is not the stall length of these inputs ({expected})"
        )
    return a1v.x1 + n * (uv.x1 + 1.0) * (vv.x1 * vv.x1)


def closed_form_a_next(b_n: object, u: object, v: object) -> Vec2:
    """Next a-iterate from a top-edge b-iterate:
    ``a_{n+1} = b_n + (u(1) - b_n(1)) * v(1) * v``.

    Requires ``b_n = (b_n(1), 1)`` with ``b_n(1) <= u(1)``.  Agrees with
    projecting ``b_n`` onto the line within 1e-12 (the corrections never
    matter for the a-update when the first set is affine)."""
    b = _as_vec2(b_n)
    uv = _as_vec2(u)
    vv = _as_vec2(v)
    if b.x2 != 1.0:
        raise ValueError(f"b_n must sit on the top edge, got {b!r}")
    if not b.x1 <= uv.x1:
        raise ValueError(
            f"b_n(1)={b.x1!r} must not exceed the anchor abscissa {uv.x1!r}"
        )
    return b + ((uv.x1 - b.x1) * vv.x1) * vv


def closed_form_q(n: int, a1: object, u: object, v: object) -> Vec2:
    """The correction toward the square during the stall:
    ``q_n = (n-1)*(u(1)+1)*v(1)*v + a_1 + (1, -1)`` for
    ``1 <= n <= stall_length``."""
    a1v = _as_vec2(a1)
    uv = _as_vec2(u)
    vv = _as_vec2(v)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    limit = stall_length(a1v, uv, vv)
    if n > limit:
        raise ValueError(f"n={n} exceeds the stall length {limit}")
    return ((n - 1) * (uv.x1 + 1.0) * vv.x1) * vv + a1v + Vec2(1.0, -1.0)


def stall_condition(n: int, a1: object, u: object, v: object) -> bool:
    """Is the (n+1)-th b-iterate still pinned at the vertex?

        b_{n+1} = (-1, 1)  ⟺  n*(u(1)+1)*v(1)^2 + a_1(1) <= -1

    Equality counts as stalled.  Evaluated left to right in floating
    point, matching the recursion's own arithmetic."""
    a1v = _as_vec2(a1)
    uv = _as_vec2(u)
    vv = _as_vec2(v)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    _check_stall_inputs(a1v, uv, vv)
    return n * (uv.x1 + 1.0) * (vv.x1 * vv.x1) + a1v.x1 <= -1.0


def analytic_limit(
    problem: Union[LineSquareProblem, ParallelProblem]
) -> Vec2:
    """The exact limit of Dykstra's algorithm for a classified problem.

    RapidFinite stops at ``a_1``;  MapCoincident and Stalling both
    converge to the anchor ``u``;  the parallel case stops at
    ``P_B(P_A(z)) = (clamp(z(1)), alpha)``.  Out-of-scope orientations
    raise: no closed-form limit is claimed there.
    """
    if isinstance(problem, ParallelProblem):
        x1 = problem.z.x1
        if x1 < -1.0:
            x1 = -1.0
        elif x1 > 1.0:
            x1 = 1.0
        return Vec2(x1, problem.alpha)
    verdict = classify_region(problem)
    if verdict.region is Region.RAPID_FINITE:
        return problem.first_projection()
    if verdict.region in (Region.MAP_COINCIDENT, Region.STALLING):
        return problem.u
    raise ValueError(
        "no closed-form limit for out-of-scope orientations; run the "
        "solver instead"
    )


# ---------------------------------------------------------------------------
# Two half-lines on the real line
# ---------------------------------------------------------------------------


def two_interval_trace(
    set_a: Interval, set_b: Interval, z: float, count: Optional[int] = None
) -> Tuple[DykstraState, ...]:
    """Closed-form Dykstra records for ``A = [0, ∞)``, ``B = [1, ∞)``.

    With ``n = -floor(z)`` for ``z < 1``:

    * ``1 <= k <= n``:  ``a_k = 0``, ``p_k = z + (k-1)``, ``b_k = 1``,
      ``q_k = -k``;
    * ``k = n + 1``:  ``a = z + n``, ``p = 0``, ``b = 1``,
      ``q = z - 1``;
    * ``k >= n + 2``:  ``a = b = 1``, ``p = 0``, and ``q`` stays at
      ``z - 1``.

    For ``z >= 1`` every record is the constant ``a = b = z`` with zero
    corrections.  Each value is computed with the same floating-point
    operation order the recursion itself uses, so the records agree with
    :func:`bestapprox.solvers.run_dykstra` bit for bit — which is also
    why the steady-state ``q`` here is ``z - 1``: that is what the
    recursion produces, for all ``k >= n + 1``.

    Returns records ``k = 0 .. count`` (default ``count = n + 5``).
    Only the exact interval pair above is supported.
    """
    if not (
        isinstance(set_a, Interval)
        and isinstance(set_b, Interval)
        and set_a == Interval(0.0, math.inf)
        and set_b == Interval(1.0, math.inf)
    ):
        raise ValueError(
            "closed-form trace supports exactly A=[0,∞) and B=[1,∞)"
        )
    zf = float(z)
    if not math.isfinite(zf):
        raise ValueError(f"start point must be finite, got {z!r}")
    n = -math.floor(zf) if zf < 1.0 else 0
    if count is None:
        count = n + 5
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")

    records = [DykstraState(0, None, zf, 0.0, 0.0)]
    if zf >= 1.0:
        for k in range(1, count + 1):
            records.append(DykstraState(k, zf, zf, 0.0, 0.0))
        return tuple(records)

    q = 0.0  # tracks the previous record's q through the regimes
    for k in range(1, count + 1):
        if k <= n:
            a = 0.0
            p = zf + float(k - 1)
            b = 1.0
            q = -float(k)
        elif k == n + 1:
            a = zf + float(n)
            p = 0.0
            b = 1.0
            q = (a - float(n)) - 1.0
        else:
            a = 1.0
            p = 0.0
            b = 1.0
            q = (1.0 + q) - 1.0
        records.append(DykstraState(k, a, b, p, q))
    return tuple(records)


# ---------------------------------------------------------------------------
# Quadrant and ball
# ---------------------------------------------------------------------------


def cone_ball_projection(cone: Orthant, ball: Ball, z: object) -> Vec2:
    """Nearest point of (quadrant ∩ ball) via the composition identity
    ``P_{B∩K} = P_B ∘ P_K``, valid for any ball centered at the origin.

    The reverse composition ``P_K ∘ P_B`` is *not* a projection onto the
    intersection and is deliberately not offered.
    """
    if not isinstance(cone, Orthant):
        raise TypeError(f"first set must be the nonnegative quadrant, got {cone!r}")
    if not isinstance(ball, Ball):
        raise TypeError(f"second set must be a ball, got {ball!r}")
    if not (ball.center.x1 == 0.0 and ball.center.x2 == 0.0):
        raise ValueError(
            "the composition identity needs the ball centered at the "
            f"origin, got center {ball.center!r}"
        )
    zp = _as_vec2(z)
    _require_finite(zp)
    return ball.project(cone.project(zp))
