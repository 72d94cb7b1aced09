"""Closed geodesics and their minimizing properties.

A closed geodesic minimizes on arcs of length L/k for every large enough k;
the smallest such k >= 2 is its minimizing index.  Lower is better: the loop
then minimizes on longer subarcs.  A geodesic is "openly" 1/k when, in
addition, no pair of points at arc distance L/k is a cut pair, so the
minimization survives small perturbations.

Two descriptors are supported: a homotopy class on (products of) flat tori,
and a generic base + direction + length loop verified to close up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ClosureError, GeometryError, SpaceSupportError, ValidationError
from .spaces import (
    DEFAULT_TOL,
    Point,
    Space,
    Tangent,
    effective_periods,
    point_from_dict,
    point_to_dict,
    space_from_dict,
)

TWO_PI = 2.0 * math.pi
SAMPLES_PER_ARC = 64
CLOSURE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ClosedGeodesic:
    """A constant-speed closed geodesic parameterized over [0, 2*pi)."""

    space: Space
    base: Point
    length: float
    klass: np.ndarray | None = None      # integer class vector (torus backends)
    direction: np.ndarray | None = None  # unit chart direction at the base

    @property
    def kind(self) -> str:
        return "torus_class" if self.klass is not None else "segment_loop"


def torus_class_geodesic(space: Space, base: Point, klass) -> ClosedGeodesic:
    """The straight closed geodesic in a torus homotopy class."""
    periods = effective_periods(space)
    if periods is None:
        raise SpaceSupportError("torus_class descriptors need flat-torus factors only")
    klass = np.asarray(klass, dtype=int)
    if klass.shape != (space.dim,):
        raise ValidationError(f"class vector must have {space.dim} entries")
    if not np.any(klass):
        raise ValidationError("the zero class is a point, not a closed geodesic")
    space._check_point(base, "geodesic base")
    length = float(np.linalg.norm(klass * periods))
    return ClosedGeodesic(space=space, base=base, length=length, klass=klass)


def segment_loop_geodesic(
    space: Space,
    base: Point,
    direction,
    length: float,
    closure_tol: float = CLOSURE_TOL,
) -> ClosedGeodesic:
    """A closed geodesic given by flowing from a base point; verified to close."""
    direction = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0 or length <= 0.0:
        raise ValidationError("segment loop needs a nonzero direction and positive length")
    direction = direction / norm
    space._check_point(base, "geodesic base")
    # the flow also rejects trajectories through a cone point
    end, vel, _ = space.flow(Tangent(base, direction), length)
    if space.distance(base, end) > closure_tol:
        raise ClosureError("loop does not return to its base point")
    if float(np.linalg.norm(vel - direction)) > closure_tol:
        raise ClosureError("loop returns with a different direction")
    return ClosedGeodesic(space=space, base=base, length=length, direction=direction)


def point_at(g: ClosedGeodesic, t: float) -> Point:
    """The loop point at parameter t (reduced mod 2*pi)."""
    frac = (t % TWO_PI) / TWO_PI
    if g.kind == "torus_class":
        periods = effective_periods(g.space)
        return g.space.point(g.base.coords + frac * (g.klass * periods))
    return g.space.exp_map(Tangent(g.base, g.direction), frac * g.length)


def velocity_at(g: ClosedGeodesic, t: float) -> np.ndarray:
    """Unit velocity in the chart of ``point_at(g, t)``."""
    if g.kind == "torus_class":
        periods = effective_periods(g.space)
        return (g.klass * periods) / g.length
    frac = (t % TWO_PI) / TWO_PI
    _, vel, _ = g.space.flow(Tangent(g.base, g.direction), frac * g.length)
    return vel


def _points_batch(g: ClosedGeodesic, ts: np.ndarray):
    """(coords, faces) arrays of loop points at the given parameters."""
    frac = (ts % TWO_PI) / TWO_PI
    if g.kind == "torus_class":
        periods = effective_periods(g.space)
        disp = g.klass * periods
        pts = g.base.coords[None, :] + frac[:, None] * disp[None, :]
        pts = pts - periods * np.floor(pts / periods)
        pts = np.where(pts >= periods, pts - periods, pts)
        return pts, None
    if g.space.supports_batch:
        return g.space.line_batch(g.base, g.direction, frac * g.length)
    pts = [point_at(g, t) for t in ts]
    return np.array([p.coords for p in pts]), [p.face for p in pts]


def _pair_arrays(g: ClosedGeodesic, k: int, samples: int):
    ts = np.arange(samples) * (TWO_PI / samples)
    a, fa = _points_batch(g, ts)
    b, fb = _points_batch(g, ts + TWO_PI / k)
    return ts, a, fa, b, fb


def _pair_distances(g: ClosedGeodesic, k: int, samples: int):
    ts, a, fa, b, fb = _pair_arrays(g, k, samples)
    if isinstance(fa, list) or isinstance(fb, list):
        d = np.array(
            [
                g.space.distance(point_at(g, t), point_at(g, t + TWO_PI / k))
                for t in ts
            ]
        )
        return ts, d
    return ts, g.space.distance_batch(a, fa, b, fb)


def default_samples(k: int) -> int:
    return SAMPLES_PER_ARC * k


def is_k_geodesic(
    g: ClosedGeodesic, k: int, samples: int | None = None, tol: float = DEFAULT_TOL
) -> bool:
    """True when the loop minimizes on every sampled arc of length L/k."""
    if k < 2:
        raise ValidationError("k must be at least 2")
    samples = samples or default_samples(k)
    _, d = _pair_distances(g, k, samples)
    return bool(np.all(np.abs(d - g.length / k) <= tol))


def minimizing_index(
    g: ClosedGeodesic, samples: int | None = None, tol: float = DEFAULT_TOL
) -> int:
    """Smallest k >= 2 for which the loop is a 1/k-geodesic (sampled oracle)."""
    k_max = math.ceil(2.0 * g.length / g.space.min_scale()) + 2
    for k in range(2, k_max + 1):
        if is_k_geodesic(g, k, samples, tol):
            return k
    raise GeometryError(f"no k <= {k_max} minimizes; geometry backend inconsistent")


def torus_class_minind(g: ClosedGeodesic) -> int:
    """Closed form for torus classes: twice the largest |class entry|."""
    if g.kind != "torus_class":
        raise SpaceSupportError("closed form applies to torus_class descriptors only")
    return 2 * int(np.max(np.abs(g.klass)))


def is_openly_k_geodesic(
    g: ClosedGeodesic, k: int, samples: int | None = None, tol: float = DEFAULT_TOL
) -> bool:
    """True when no sampled pair at arc distance L/k is a cut pair."""
    if not is_k_geodesic(g, k, samples, tol):
        raise ValidationError("openly check requires a 1/k-geodesic")
    samples = samples or default_samples(k)
    ts, a, fa, b, fb = _pair_arrays(g, k, samples)
    if not isinstance(fa, list) and not isinstance(fb, list) and g.space.supports_batch:
        counts = g.space.min_count_batch(a, fa, b, fb, tol)
        return bool(np.all(counts < 2))
    for t in ts:
        if g.space.is_cut_pair(point_at(g, t), point_at(g, t + TWO_PI / k), tol):
            return False
    return True


class CutPair:
    """A sampled parameter whose arc endpoints are joined by several minimizers."""

    __slots__ = ("t", "distance")

    def __init__(self, t: float, distance: float):
        self.t = t
        self.distance = distance

    def __repr__(self):
        return f"CutPair(t={self.t:.6f}, distance={self.distance:.6f})"


def max_cut_pair(
    g: ClosedGeodesic, k: int, samples: int | None = None, tol: float = DEFAULT_TOL
) -> CutPair | None:
    """The sampled cut pair at arc separation 2*pi/k of maximal distance.

    Ties are broken toward the smallest parameter.  Returns None when no
    sampled pair is a cut pair.
    """
    samples = samples or default_samples(k)
    ts, a, fa, b, fb = _pair_arrays(g, k, samples)
    if not isinstance(fa, list) and not isinstance(fb, list) and g.space.supports_batch:
        counts = g.space.min_count_batch(a, fa, b, fb, tol)
        dists = g.space.distance_batch(a, fa, b, fb)
        cut = counts >= 2
    else:
        cut = np.array(
            [g.space.is_cut_pair(point_at(g, t), point_at(g, t + TWO_PI / k), tol) for t in ts]
        )
        dists = np.array(
            [g.space.distance(point_at(g, t), point_at(g, t + TWO_PI / k)) for t in ts]
        )
    if not np.any(cut):
        return None
    dmax = dists[cut].max()
    near = cut & (dists >= dmax - 1e-12)
    t0 = float(ts[near][0])
    return CutPair(t=t0, distance=float(dists[near][0]))


def geodesic_from_chain(x, chain, tol: float = 1e-6) -> ClosedGeodesic:
    """Classify a straight broken loop (a chain of minimizing segments whose
    joints have no angles) into a closed geodesic descriptor."""
    space = x.space
    k = x.k
    for i in range(k):
        v_out = chain[i].v0
        v_in = chain[(i - 1) % k].v1
        if float(np.linalg.norm(v_out - v_in)) > tol:
            raise GeometryError(f"joint {i} of the chain has an angle")
    length = sum(s.length for s in chain)
    periods = effective_periods(space)
    if periods is not None:
        total = np.zeros(space.dim)
        for s in chain:
            total += s.length * s.v0
        klass = np.round(total / periods).astype(int)
        if float(np.linalg.norm(total - klass * periods)) > tol * max(1.0, length):
            raise GeometryError("chain winding is not an integer class")
        return torus_class_geodesic(space, x.points[0], klass)
    return segment_loop_geodesic(space, x.points[0], chain[0].v0, length, closure_tol=max(tol, CLOSURE_TOL))


# -- variations -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VariationSpec:
    """A one-parameter family of loops obtained by flowing every loop point
    along a constant chart field for time s."""

    geodesic: ClosedGeodesic
    field: np.ndarray
    s_max: float
    steps: int
    perpendicular: bool = False

    def __post_init__(self):
        if self.s_max <= 0 or self.steps < 3:
            raise ValidationError("variation needs s_max > 0 and at least 3 steps")
        if self.field.shape != (self.geodesic.space.dim,):
            raise ValidationError("variation field has the wrong dimension")


def variation_geodesic(var: VariationSpec, s: float) -> ClosedGeodesic:
    """The loop of the family at parameter s (verified to be a closed geodesic)."""
    g = var.geodesic
    if g.kind == "torus_class":
        base = g.space.exp_map(Tangent(g.base, var.field), s)
        return torus_class_geodesic(g.space, base, g.klass)
    base, _, carried = g.space.flow(Tangent(g.base, var.field), s, carry=(g.direction,))
    return segment_loop_geodesic(g.space, base, carried[0], g.length)


def _check_variation(var: VariationSpec, s: float, shifted: ClosedGeodesic, tol: float):
    g = var.geodesic
    for t in np.linspace(0.0, TWO_PI, 9)[:-1]:
        expected = g.space.exp_map(Tangent(point_at(g, t), var.field), s)
        if g.space.distance(expected, point_at(shifted, t)) > max(tol, 1e-8):
            raise GeometryError(f"variation is not a synchronized flow at s={s}, t={t}")
        if var.perpendicular:
            if abs(float(var.field @ velocity_at(g, t))) > max(tol, 1e-8):
                raise ValidationError("variation field is not perpendicular to the loop")


@dataclass(frozen=True)
class ProfileRow:
    s: float
    minind: int
    openly: bool


@dataclass(frozen=True, eq=False)
class VariationProfile:
    rows: tuple[ProfileRow, ...]
    k0: int
    cut_t: float | None
    cut_distance: float | None
    dplus: float | None
    openly_preserved: bool | None
    forward_index_jump: bool | None


def variation_minind_profile(
    var: VariationSpec,
    k_hint: int | None = None,
    samples: int | None = None,
    tol: float = DEFAULT_TOL,
) -> VariationProfile:
    """Minimizing index and openly flag along the family, plus the one-sided
    derivative of distance at the central loop's widest cut pair.

    ``forward_index_jump`` reports whether, when that derivative is negative,
    the minimizing index at the smallest positive sampled s equals k0 + 1.
    ``openly_preserved`` reports whether a centrally openly-1/k0 loop stays
    openly 1/k0 over the whole sampled range (None when not openly at 0).
    """
    from .energy import dplus_distance

    g = var.geodesic
    k0 = k_hint or minimizing_index(g, samples, tol)
    svals = np.linspace(-var.s_max, var.s_max, var.steps)
    rows = []
    for s in svals:
        shifted = variation_geodesic(var, float(s))
        _check_variation(var, float(s), shifted, tol)
        mind = minimizing_index(shifted, samples, tol)
        openly = mind <= k0 and is_k_geodesic(shifted, k0, samples, tol) and is_openly_k_geodesic(
            shifted, k0, samples, tol
        )
        rows.append(ProfileRow(s=float(s), minind=mind, openly=openly))

    cut = max_cut_pair(g, k0, samples, tol)
    dplus = None
    forward_jump = None
    if cut is not None:
        p = point_at(g, cut.t)
        q = point_at(g, cut.t + TWO_PI / k0)
        dplus = dplus_distance(g.space, p, q, var.field, var.field, tol)
        if dplus < 0:
            positives = [r for r in rows if r.s > 0]
            forward_jump = bool(positives) and positives[0].minind == k0 + 1

    central_openly = None
    if is_k_geodesic(g, k0, samples, tol):
        central_openly = is_openly_k_geodesic(g, k0, samples, tol)
    openly_preserved = all(r.openly for r in rows) if central_openly else None

    return VariationProfile(
        rows=tuple(rows),
        k0=k0,
        cut_t=None if cut is None else cut.t,
        cut_distance=None if cut is None else cut.distance,
        dplus=dplus,
        openly_preserved=openly_preserved,
        forward_index_jump=forward_jump,
    )


# -- serialization ----------------------------------------------------------------


def geodesic_to_dict(g: ClosedGeodesic) -> dict:
    data = {
        "space": g.space.to_dict(),
        "kind": g.kind,
        "base": point_to_dict(g.base),
        "length": g.length,
    }
    if g.kind == "torus_class":
        data["class"] = [int(m) for m in g.klass]
    else:
        data["direction"] = [float(v) for v in g.direction]
    return data


def geodesic_from_dict(data: dict, space: Space | None = None) -> ClosedGeodesic:
    if not isinstance(data, dict) or "kind" not in data:
        raise ValidationError("geodesic: expected an object with a 'kind' field")
    if space is None:
        space = space_from_dict(data.get("space", {}))
    base = point_from_dict(space, data.get("base", {}))
    if data["kind"] == "torus_class":
        if "class" not in data:
            raise ValidationError("geodesic.class: missing")
        return torus_class_geodesic(space, base, data["class"])
    if data["kind"] == "segment_loop":
        if "direction" not in data or "length" not in data:
            raise ValidationError("geodesic.direction / geodesic.length: missing")
        return segment_loop_geodesic(space, base, data["direction"], float(data["length"]))
    raise ValidationError(f"geodesic.kind: unknown variant {data['kind']!r}")
