"""Iteration engines for two-set best-approximation problems.

Two algorithms are implemented over the descriptors from
:mod:`bestapprox.sets`:

* **Dykstra's algorithm** keeps a pair of correction vectors next to the
  alternating projections.  Its main sequences converge to the nearest
  point of the intersection, which is what makes it a best-approximation
  method rather than a mere feasibility method.

      a_n = P_A(b_{n-1} + p_{n-1})        p_n = b_{n-1} + p_{n-1} - a_n
      b_n = P_B(a_n + q_{n-1})            q_n = a_n + q_{n-1} - b_n

  started from ``b_0 = z``, ``p_0 = q_0 = 0``.

* **Alternating projections** (``run_map``) drops the corrections and
  simply projects back and forth; it converges to *some* point of the
  intersection, not necessarily the nearest one.

Both runs produce an immutable :class:`Trace` holding every visited
state, the termination reason, and the detected limit.  Two distinct
stopping phenomena are kept apart on purpose:

* ``FixpointDetected`` — the iteration has *provably* reached its limit
  in finitely many steps (``b_n = a_n``, or ``a_{n+1} = b_n`` with
  ``n >= 1``).  The detection threshold is exact (0.0) whenever the
  second set projects by clamping, because clamps return bound values
  bit-exactly; otherwise it is 1e-13.
* ``Converged`` — the gap ``|b_n - a_n|`` fell below the caller's
  tolerance; the limit is the current ``b_n``, correct to that
  tolerance but not exact.

The module also houses the finite-convergence predicate (when is
``P_{A∩B} = P_B P_A`` guaranteed), the Dykstra-vs-alternating
coincidence checker, and JSON (de)serialization of traces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple, Union

from .sets import (
    Box,
    Interval,
    Orthant,
    Point,
    SetDescriptor,
    Vec2,
    contains,
    normal_cone_contains,
    set_from_json,
    set_to_json,
)
from .sets import _coerce, _point_dim, _require_finite

__all__ = [
    "Termination",
    "DykstraState",
    "MapState",
    "Trace",
    "initial_dykstra_state",
    "initial_map_state",
    "dykstra_step",
    "map_step",
    "fixpoint_tolerance",
    "detect_finite_fixpoint",
    "run_dykstra",
    "run_map",
    "PredicateResult",
    "finite_convergence_predicate",
    "coincidence_check",
    "conservation_residual",
    "trace_to_json",
    "trace_from_json",
]


class Termination(enum.Enum):
    """Why a run stopped."""

    CONVERGED = "Converged"
    FIXPOINT_DETECTED = "FixpointDetected"
    MAX_ITERATIONS = "MaxIterations"


class DykstraState(NamedTuple):
    """One Dykstra iterate: index, main pair (a, b), corrections (p, q).

    ``a`` is ``None`` at ``n = 0`` (the first projection has not
    happened yet); ``b`` equals the start point there.
    """

    n: int
    a: Optional[Point]
    b: Point
    p: Point
    q: Point


class MapState(NamedTuple):
    """One alternating-projections iterate: odd ``n`` lies in the first
    set, even ``n >= 2`` in the second, ``c_0`` is the start point."""

    n: int
    c: Point


def _zero_like(p: Point) -> Point:
    return Vec2(0.0, 0.0) if isinstance(p, Vec2) else 0.0


def _gap(x: Point, y: Point) -> float:
    if isinstance(x, Vec2):
        return math.hypot(x.x1 - y.x1, x.x2 - y.x2)
    return abs(x - y)


def initial_dykstra_state(z: Point) -> DykstraState:
    zero = _zero_like(z)
    return DykstraState(0, None, z, zero, zero)


def initial_map_state(z: Point) -> MapState:
    return MapState(0, z)


def dykstra_step(
    state: DykstraState, set_a: SetDescriptor, set_b: SetDescriptor
) -> DykstraState:
    """Advance one full Dykstra iteration (one projection onto each set)."""
    bp = state.b + state.p
    a = set_a.project(bp)
    p = bp - a
    aq = a + state.q
    b = set_b.project(aq)
    q = aq - b
    return DykstraState(state.n + 1, a, b, p, q)


def map_step(
    state: MapState, set_a: SetDescriptor, set_b: SetDescriptor
) -> MapState:
    """Advance one alternating projection: onto the first set when moving
    to an odd index, onto the second when moving to an even index."""
    n = state.n + 1
    c = set_a.project(state.c) if n % 2 == 1 else set_b.project(state.c)
    return MapState(n, c)


def fixpoint_tolerance(set_b: SetDescriptor) -> float:
    """Gap threshold under which a fixpoint is considered exact.

    Clamp-based sets return their bound values bit-exactly, so equality
    of iterates is a legitimate exact test (threshold 0.0); projections
    that involve genuine arithmetic get a 1e-13 allowance.
    """
    return 0.0 if isinstance(set_b, (Box, Interval, Orthant)) else 1e-13


def detect_finite_fixpoint(
    prev: DykstraState, nxt: DykstraState, tol: float
) -> bool:
    """Has the iteration provably reached its limit?

    True iff, with ``n = prev.n >= 1``, either ``|b_n - a_n| <= tol``
    or ``|a_{n+1} - b_n| <= tol``.  Either condition freezes all later
    iterates at the limit, which is then exactly the nearest point of
    the intersection.  ``n = 0`` is deliberately excluded: ``a_1 = b_0``
    alone promises nothing.
    """
    if prev.n < 1 or prev.a is None:
        return False
    if _gap(prev.b, prev.a) <= tol:
        return True
    return _gap(nxt.a, prev.b) <= tol


def _check_run_inputs(
    set_a: SetDescriptor, set_b: SetDescriptor, z: object, tol: float, max_iter: int
) -> Point:
    zp = _coerce(z)
    _require_finite(zp)
    if set_a.dim != set_b.dim:
        raise TypeError("the two sets live in different dimensions")
    if _point_dim(zp) != set_a.dim:
        raise TypeError(
            f"start point has dimension {_point_dim(zp)}, sets have {set_a.dim}"
        )
    if not (math.isfinite(tol) and tol >= 0.0):
        raise ValueError(f"tol must be finite and nonnegative, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    return zp


@dataclass(frozen=True)
class Trace:
    """A complete run: every state, the stop reason, the detected limit.

    ``records`` is contiguous in ``n`` starting at 0.  ``detected_limit``
    is ``None`` exactly when the run hit ``MaxIterations``.
    """

    algorithm: str  # "dykstra" | "map"
    z: Point
    sets: Tuple[SetDescriptor, SetDescriptor]
    records: Tuple[Union[DykstraState, MapState], ...]
    termination: Termination
    detected_limit: Optional[Point]


def run_dykstra(
    set_a: SetDescriptor,
    set_b: SetDescriptor,
    z: object,
    *,
    tol: float = 1e-9,
    max_iter: int = 100000,
    fixpoint_tol: Optional[float] = None,
) -> Trace:
    """Run Dykstra's algorithm until fixpoint, convergence, or the cap.

    The fixpoint test is evaluated with ``fixpoint_tol`` (defaulting to
    :func:`fixpoint_tolerance` of the second set) both across the last
    step pair and on the freshly produced state, so a start point already
    in the intersection terminates at ``n = 1``.  ``MaxIterations`` is a
    normal outcome, with ``detected_limit`` absent.
    """
    zp = _check_run_inputs(set_a, set_b, z, tol, max_iter)
    ftol = fixpoint_tolerance(set_b) if fixpoint_tol is None else fixpoint_tol
    state = initial_dykstra_state(zp)
    records: List[DykstraState] = [state]
    termination = Termination.MAX_ITERATIONS
    limit: Optional[Point] = None
    for _ in range(max_iter):
        nxt = dykstra_step(state, set_a, set_b)
        records.append(nxt)
        if detect_finite_fixpoint(state, nxt, ftol) or _gap(nxt.b, nxt.a) <= ftol:
            termination = Termination.FIXPOINT_DETECTED
            limit = nxt.b
            break
        if _gap(nxt.b, nxt.a) <= tol:
            termination = Termination.CONVERGED
            limit = nxt.b
            break
        state = nxt
    return Trace("dykstra", zp, (set_a, set_b), tuple(records), termination, limit)


def run_map(
    set_a: SetDescriptor,
    set_b: SetDescriptor,
    z: object,
    *,
    tol: float = 1e-9,
    max_iter: int = 100000,
    fixpoint_tol: Optional[float] = None,
) -> Trace:
    """Run plain alternating projections.

    Stops with ``FixpointDetected`` when consecutive iterates agree
    within the fixpoint threshold (exact when both sets clamp), with
    ``Converged`` when they agree within ``tol``.  Note the limit is a
    point of the intersection but in general **not** the nearest one.
    """
    zp = _check_run_inputs(set_a, set_b, z, tol, max_iter)
    if fixpoint_tol is None:
        ftol = min(fixpoint_tolerance(set_a), fixpoint_tolerance(set_b))
    else:
        ftol = fixpoint_tol
    state = initial_map_state(zp)
    records: List[MapState] = [state]
    termination = Termination.MAX_ITERATIONS
    limit: Optional[Point] = None
    for _ in range(max_iter):
        nxt = map_step(state, set_a, set_b)
        records.append(nxt)
        gap = _gap(nxt.c, state.c)
        if gap <= ftol:
            termination = Termination.FIXPOINT_DETECTED
            limit = nxt.c
            break
        if gap <= tol:
            termination = Termination.CONVERGED
            limit = nxt.c
            break
        state = nxt
    return Trace("map", zp, (set_a, set_b), tuple(records), termination, limit)


class PredicateResult(NamedTuple):
    """Outcome of :func:`finite_convergence_predicate`."""

    holds: bool
    clause: Optional[int]  # 1, 2, or None


def finite_convergence_predicate(
    set_a: SetDescriptor, set_b: SetDescriptor, z: object, *, tol: float = 1e-10
) -> PredicateResult:
    """Decide whether ``P_{A∩B}(z) = P_B(P_A(z))`` is guaranteed.

    With ``w = P_B(P_A(z))``, the guarantee holds when either

    2. the first set is affine and ``w`` lies back in it, or
    1. ``w`` lies in the first set and ``z - P_A(z)`` belongs to the
       normal cone of the first set at ``w``.

    Clause 2 is evaluated first: problems satisfying it (e.g. two
    parallel affine pieces) usually satisfy clause 1 vacuously as well,
    and the sharper structural statement is the more useful diagnosis.
    The converse is false in general — the predicate failing does not
    preclude ``P_{A∩B} = P_B P_A`` holding anyway.
    """
    zp = _coerce(z)
    _require_finite(zp)
    if _point_dim(zp) != set_a.dim or set_a.dim != set_b.dim:
        raise TypeError("point and sets must share one dimension")
    a1 = set_a.project(zp)
    w = set_b.project(a1)
    back_in_a = contains(set_a, w, tol)
    if set_a.is_affine and back_in_a:
        return PredicateResult(True, 2)
    if back_in_a and normal_cone_contains(set_a, w, zp - a1, tol):
        return PredicateResult(True, 1)
    return PredicateResult(False, None)


def coincidence_check(
    dyk: Trace, alt: Trace, a_affine: bool, tol: float = 1e-12
) -> bool:
    """Do Dykstra and alternating projections produce the same points?

    Directly compares the shared prefix: ``c_{2n}`` against ``b_n`` and
    ``c_{2n-1}`` against ``a_n``, componentwise within ``tol``.  When
    the caller asserts the first set is affine (``a_affine``), the
    equivalent criterion — ``b_n = P_B(a_n)`` for every shared ``n >= 2``
    — is evaluated as well, and any disagreement between the two
    criteria raises ``RuntimeError``: for affine first sets they are
    provably the same statement, so disagreement means a bug, not data.

    Returns the direct comparison's verdict.
    """
    if dyk.algorithm != "dykstra" or alt.algorithm != "map":
        raise ValueError(
            "pass the Dykstra trace first and the alternating trace second"
        )
    if dyk.z != alt.z:
        raise ValueError("traces start from different points")
    n_dyk = dyk.records[-1].n
    n_alt = alt.records[-1].n

    direct = True
    for m in range(1, min(n_alt, 2 * n_dyk) + 1):
        c = alt.records[m].c
        if m % 2 == 0:
            mate = dyk.records[m // 2].b
        else:
            mate = dyk.records[(m + 1) // 2].a
        if _gap(c, mate) > tol:
            direct = False
            break

    if a_affine:
        set_b = dyk.sets[1]
        lemma = True
        for n in range(2, min(n_dyk, n_alt // 2) + 1):
            rec = dyk.records[n]
            if _gap(rec.b, set_b.project(rec.a)) > tol:
                lemma = False
                break
        if lemma != direct:
            raise RuntimeError(
                "internal consistency failure: the direct sequence "
                "comparison and the b_n = P_B(a_n) criterion disagree "
                f"(direct={direct}, criterion={lemma})"
            )
    return direct


def conservation_residual(trace: Trace) -> float:
    """Largest violation of the two step identities over a Dykstra trace.

    Checks ``a_n + p_n = b_{n-1} + p_{n-1}`` and
    ``b_n + q_n = a_n + q_{n-1}`` componentwise for every consecutive
    record pair and returns the worst absolute residual (0.0 for traces
    with a single record, and for alternating traces, which carry no
    corrections).
    """
    if trace.algorithm != "dykstra":
        return 0.0
    worst = 0.0
    for prev, cur in zip(trace.records, trace.records[1:]):
        lhs1 = cur.a + cur.p
        rhs1 = prev.b + prev.p
        lhs2 = cur.b + cur.q
        rhs2 = cur.a + prev.q
        if isinstance(lhs1, Vec2):
            worst = max(
                worst,
                abs(lhs1.x1 - rhs1.x1),
                abs(lhs1.x2 - rhs1.x2),
                abs(lhs2.x1 - rhs2.x1),
                abs(lhs2.x2 - rhs2.x2),
            )
        else:
            worst = max(worst, abs(lhs1 - rhs1), abs(lhs2 - rhs2))
    return worst


# ---------------------------------------------------------------------------
# Trace JSON
# ---------------------------------------------------------------------------


def _point_out(p: Optional[Point]) -> Optional[List[float]]:
    if p is None:
        return None
    if isinstance(p, Vec2):
        return [p.x1, p.x2]
    return [p]


def _point_in(v: object) -> Optional[Point]:
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        if len(v) == 1:
            return float(v[0])
        if len(v) == 2:
            return Vec2(float(v[0]), float(v[1]))
    raise ValueError(f"expected a 1- or 2-element coordinate array, got {v!r}")


def trace_to_json(trace: Trace) -> dict:
    """Plain-data form of a trace; numbers keep shortest round-trip form."""
    records: List[dict] = []
    for rec in trace.records:
        if isinstance(rec, DykstraState):
            records.append(
                {
                    "n": rec.n,
                    "a": _point_out(rec.a),
                    "b": _point_out(rec.b),
                    "p": _point_out(rec.p),
                    "q": _point_out(rec.q),
                }
            )
        else:
            records.append({"n": rec.n, "c": _point_out(rec.c)})
    return {
        "algorithm": trace.algorithm,
        "z": _point_out(trace.z),
        "sets": [set_to_json(trace.sets[0]), set_to_json(trace.sets[1])],
        "termination": trace.termination.value,
        "records": records,
        "limit": _point_out(trace.detected_limit),
    }


def trace_from_json(obj: dict) -> Trace:
    """Inverse of :func:`trace_to_json` (bit-exact on all coordinates)."""
    algorithm = obj["algorithm"]
    if algorithm not in ("dykstra", "map"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    sets = obj["sets"]
    if not (isinstance(sets, list) and len(sets) == 2):
        raise ValueError("trace must carry exactly two set descriptors")
    pair = (set_from_json(sets[0]), set_from_json(sets[1]))
    termination = Termination(obj["termination"])
    records: List[Union[DykstraState, MapState]] = []
    for rec in obj["records"]:
        if "c" in rec:
            records.append(MapState(int(rec["n"]), _point_in(rec["c"])))
        else:
            records.append(
                DykstraState(
                    int(rec["n"]),
                    _point_in(rec["a"]),
                    _point_in(rec["b"]),
                    _point_in(rec["p"]),
                    _point_in(rec["q"]),
                )
            )
    return Trace(
        algorithm,
        _point_in(obj["z"]),
        pair,
        tuple(records),
        termination,
        _point_in(obj["limit"]),
    )
