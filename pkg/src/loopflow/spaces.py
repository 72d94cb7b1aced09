"""Geometry backends: flat tori, doubled rectangles, and Riemannian products.

Every backend here is a flat quotient with closed-form distance, so the full
set of minimizing geodesics between two points can be enumerated exactly as
lattice lifts (plus a point-reflection sheet for the doubled rectangle).

Chart conventions:

* flat torus -- one global chart, coordinates reduced to [0, a_i) per period.
* doubled rectangle -- two rectangle faces ("top"/"bottom") glued along the
  boundary.  It is realized as the covering torus R^2/(2aZ + 2bZ) quotiented
  by the point reflection (x, y) -> (-x, -y); the top face embeds into the
  cover as (x, y), the bottom face as (x, 2b - y).  The four rectangle
  corners are cone points of angle pi; no minimizing segment passes through
  one, and trajectories that do raise ``DegenerateTrajectoryError``.
* product -- concatenation of factor charts; distance combines factor
  distances Euclideanly, and a product segment is minimizing exactly when
  every factor segment is.

All operations are pure functions of immutable values; nothing here mutates
or caches, so values are freely shareable across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CoincidentPointsError,
    DegenerateTrajectoryError,
    DimensionMismatchError,
    ResourceLimitError,
    SpaceSupportError,
    ValidationError,
)

DEFAULT_TOL = 1e-9
CONE_TOL = 1e-9
# cap on the lattice box enumerated for one minimizing-geodesic query
MAX_LATTICE_CANDIDATES = 200_000

TOP = "top"
BOTTOM = "bottom"


@dataclass(frozen=True, eq=False)
class Point:
    """A point of a space, stored in canonical chart coordinates.

    ``face`` is used only by the doubled rectangle ("top"/"bottom"; boundary
    points are canonicalized to the top face).  Products whose factors need
    faces carry a tuple with one entry per factor.
    """

    coords: np.ndarray
    face: str | tuple | None = None

    def __repr__(self) -> str:
        tag = f", face={self.face!r}" if self.face is not None else ""
        return f"Point({np.array2string(self.coords, precision=6)}{tag})"


@dataclass(frozen=True, eq=False)
class Tangent:
    """A chart vector attached to a base point."""

    base: Point
    vec: np.ndarray


@dataclass(frozen=True, eq=False)
class MinGeodesic:
    """One unit-speed minimizing geodesic between two points.

    ``v0``/``v1`` are the initial and terminal unit velocities in the chart
    of the start/end point.  ``lift`` identifies the covering-space lift:
    a tuple of lattice integers on the torus, ``(sheet, lam_x, lam_y)`` on
    the doubled rectangle, and a tuple of factor lifts on products.
    """

    length: float
    v0: np.ndarray
    v1: np.ndarray
    lift: tuple
    degenerate: bool = False


def _as_vector(x, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise DimensionMismatchError(f"{what}: expected shape ({dim},), got {arr.shape}")
    return arr


class Space:
    """Common interface of the geometry backends."""

    dim: int

    # -- points and tangents -------------------------------------------------

    def point(self, coords, face=None) -> Point:
        raise NotImplementedError

    def tangent(self, base: Point, vec) -> Tangent:
        return Tangent(base, _as_vector(vec, self.dim, "tangent vector"))

    # -- metric --------------------------------------------------------------

    def distance(self, p: Point, q: Point) -> float:
        raise NotImplementedError

    def minimizing_geodesics(
        self, p: Point, q: Point, tol: float = DEFAULT_TOL, allow_degenerate: bool = False
    ) -> list[MinGeodesic]:
        raise NotImplementedError

    def is_cut_pair(self, p: Point, q: Point, tol: float = DEFAULT_TOL) -> bool:
        """True when p and q are joined by more than one minimizing geodesic.

        Flat quotients have no conjugate points away from cone points, so
        multiplicity of minimizers is the only source of cut points.
        """
        return len(self.minimizing_geodesics(p, q, tol, allow_degenerate=True)) >= 2

    # -- flows ---------------------------------------------------------------

    def flow(self, tan: Tangent, s: float, carry: tuple = ()):
        """Straight-line flow for time ``s``.

        Returns ``(endpoint, velocity, carried)`` where ``velocity`` is the
        tangent vector expressed in the endpoint's chart and ``carried`` are
        the extra vectors of ``carry`` transported the same way.
        """
        raise NotImplementedError

    def exp_map(self, tan: Tangent, s: float) -> Point:
        return self.flow(tan, s)[0]

    # -- misc ----------------------------------------------------------------

    def min_scale(self) -> float:
        """Shortest period-like length; used for search bounds and defaults."""
        raise NotImplementedError

    @property
    def supports_batch(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check_point(self, p: Point, what: str = "point") -> None:
        if p.coords.shape != (self.dim,):
            raise DimensionMismatchError(
                f"{what}: expected dimension {self.dim}, got {p.coords.shape}"
            )


def _raise_if_equal(p: Point, q: Point) -> None:
    if np.array_equal(p.coords, q.coords) and p.face == q.face:
        raise CoincidentPointsError("minimizing geodesics are undefined for equal points")


def _lattice_ranges(delta: np.ndarray, periods: np.ndarray, reach: float) -> list[range]:
    """Integer ranges lam_i with |delta_i + lam_i * period_i| <= reach."""
    ranges = []
    for d, a in zip(delta, periods):
        lo = math.ceil((-reach - d) / a)
        hi = math.floor((reach - d) / a)
        ranges.append(range(lo, hi + 1))
    return ranges


def _enumerate_lifts(delta: np.ndarray, periods: np.ndarray, reach: float):
    """Yield (lam, displacement, length) for every lattice lift within reach."""
    ranges = _lattice_ranges(delta, periods, reach)
    count = 1
    for r in ranges:
        count *= max(len(r), 1)
    if count > MAX_LATTICE_CANDIDATES:
        raise ResourceLimitError(f"lattice enumeration too large ({count} candidates)")
    for lam in itertools.product(*ranges):
        disp = delta + np.asarray(lam, dtype=float) * periods
        length = float(np.linalg.norm(disp))
        if length <= reach:
            yield lam, disp, length


class FlatTorus(Space):
    """Flat rectangular torus R^n / (a_1 Z x ... x a_n Z)."""

    def __init__(self, periods):
        periods = np.asarray(periods, dtype=float)
        if periods.ndim != 1 or periods.size == 0:
            raise ValidationError("flat torus needs a nonempty list of periods")
        if not np.all(periods > 0):
            raise ValidationError("flat torus periods must be strictly positive")
        self.periods = periods
        self.dim = periods.size

    def point(self, coords, face=None) -> Point:
        if face is not None:
            raise ValidationError("flat torus points carry no face tag")
        coords = _as_vector(coords, self.dim, "point")
        return Point(self._reduce(coords))

    def _reduce(self, coords: np.ndarray) -> np.ndarray:
        out = coords - self.periods * np.floor(coords / self.periods)
        # floor can land exactly on the period for values like -1e-17
        out = np.where(out >= self.periods, out - self.periods, out)
        return out

    def distance(self, p: Point, q: Point) -> float:
        self._check_point(p)
        self._check_point(q)
        delta = q.coords - p.coords
        delta = delta - self.periods * np.round(delta / self.periods)
        return float(np.linalg.norm(delta))

    def minimizing_geodesics(self, p, q, tol=DEFAULT_TOL, allow_degenerate=False):
        self._check_point(p)
        self._check_point(q)
        _raise_if_equal(p, q)
        if self.distance(p, q) == 0.0:
            raise CoincidentPointsError("points coincide within floating precision")
        delta = q.coords - p.coords
        reach = self.distance(p, q) + tol
        found = list(_enumerate_lifts(delta, self.periods, reach))
        dmin = min(length for _, _, length in found)
        segs = []
        for lam, disp, length in sorted(found, key=lambda t: t[0]):
            if length <= dmin + tol:
                v = disp / length
                segs.append(MinGeodesic(length=length, v0=v, v1=v.copy(), lift=lam))
        return segs

    def flow(self, tan: Tangent, s: float, carry: tuple = ()):
        self._check_point(tan.base)
        vec = _as_vector(tan.vec, self.dim, "tangent vector")
        end = self.point(tan.base.coords + s * vec)
        return end, vec.copy(), tuple(np.asarray(c, dtype=float).copy() for c in carry)

    def min_scale(self) -> float:
        return float(self.periods.min())

    @property
    def supports_batch(self) -> bool:
        return True

    # batch kernels operate on (N, dim) coordinate arrays; faces unused here

    def distance_batch(self, A, fa, B, fb) -> np.ndarray:
        delta = B - A
        delta = delta - self.periods * np.round(delta / self.periods)
        return np.sqrt((delta**2).sum(axis=1))

    def min_count_batch(self, A, fa, B, fb, tol: float) -> np.ndarray:
        delta = B - A
        delta = np.abs(delta - self.periods * np.round(delta / self.periods))
        d = np.sqrt((delta**2).sum(axis=1, keepdims=True))
        # squared-length increase of flipping coordinate i to the far lift
        inc = self.periods * (self.periods - 2.0 * delta)
        tie = inc <= 2.0 * d * tol + tol * tol
        return np.where(tie, 2, 1).prod(axis=1)

    def line_batch(self, base: Point, direction: np.ndarray, lengths: np.ndarray):
        pts = base.coords[None, :] + lengths[:, None] * direction[None, :]
        pts = pts - self.periods * np.floor(pts / self.periods)
        pts = np.where(pts >= self.periods, pts - self.periods, pts)
        return pts, None

    def to_dict(self) -> dict:
        return {"type": "flat_torus", "periods": [float(a) for a in self.periods]}


_FLIP = np.array([1.0, -1.0])


class DoubledRectangle(Space):
    """Double of the rectangle [0,a] x [0,b]: two faces glued along the edges.

    Modeled as the covering torus R^2/(2aZ + 2bZ) quotiented by (x, y) ->
    (-x, -y).  Cone points (the rectangle corners) lift to the points
    (i*a, j*b), i, j integers.
    """

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise ValidationError("doubled rectangle sides must be strictly positive")
        self.a = float(a)
        self.b = float(b)
        self.dim = 2
        self.cover_periods = np.array([2.0 * self.a, 2.0 * self.b])

    # -- face charts ----------------------------------------------------------

    def point(self, coords, face=TOP) -> Point:
        coords = _as_vector(coords, 2, "point")
        if face not in (TOP, BOTTOM):
            raise ValidationError("doubled rectangle points need face 'top' or 'bottom'")
        x, y = coords
        if not (-1e-12 <= x <= self.a + 1e-12 and -1e-12 <= y <= self.b + 1e-12):
            raise ValidationError(
                f"point ({x}, {y}) outside the rectangle [0,{self.a}]x[0,{self.b}]"
            )
        x = min(max(x, 0.0), self.a)
        y = min(max(y, 0.0), self.b)
        if x in (0.0, self.a) or y in (0.0, self.b):
            face = TOP  # boundary points are identified across faces
        return Point(np.array([x, y]), face)

    def _embed(self, p: Point) -> np.ndarray:
        """Face chart -> covering torus coordinates."""
        x, y = p.coords
        return np.array([x, y]) if p.face == TOP else np.array([x, 2.0 * self.b - y])

    def _chart_matrix(self, face: str) -> np.ndarray:
        return np.eye(2) if face == TOP else np.diag(_FLIP)

    def _reduce_cover(self, xy: np.ndarray):
        """Covering coordinates -> (canonical Point, chart transform).

        The returned 2x2 matrix maps cover vectors at ``xy`` to chart vectors
        at the reduced point.
        """
        u = xy - self.cover_periods * np.floor(xy / self.cover_periods)
        u = np.where(u >= self.cover_periods, u - self.cover_periods, u)
        if u[0] > self.a:
            u = self.cover_periods - u
            u[1] = u[1] if u[1] < self.cover_periods[1] else 0.0
        if u[1] > self.b:
            face = BOTTOM
            chart = np.array([u[0], 2.0 * self.b - u[1]])
        else:
            face = TOP
            chart = u.copy()
        pt = self.point(chart, face)
        # pick the deck transform (translation or point reflection) that maps
        # the canonical embedding onto xy; it determines how vectors project
        emb = self._embed(pt)
        r_plus = self._lattice_residual(xy - emb)
        r_minus = self._lattice_residual(xy + emb)
        if r_plus <= r_minus:
            transform = self._chart_matrix(pt.face)
        else:
            transform = -self._chart_matrix(pt.face)
        return pt, transform

    def _lattice_residual(self, delta: np.ndarray) -> float:
        red = delta - self.cover_periods * np.round(delta / self.cover_periods)
        return float(np.linalg.norm(red))

    # -- cone points ----------------------------------------------------------

    def _cone_clearance(self, start: np.ndarray, disp: np.ndarray) -> float:
        """Shortest distance from the open segment start..start+disp to a cone lift."""
        length = float(np.linalg.norm(disp))
        if length == 0.0:
            return math.inf
        end = start + disp
        lo = np.minimum(start, end)
        hi = np.maximum(start, end)
        i0 = math.floor(lo[0] / self.a) - 1
        i1 = math.ceil(hi[0] / self.a) + 1
        j0 = math.floor(lo[1] / self.b) - 1
        j1 = math.ceil(hi[1] / self.b) + 1
        best = math.inf
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                cone = np.array([i * self.a, j * self.b])
                t = float(np.dot(cone - start, disp)) / (length * length)
                # interior only: cone points may sit at segment endpoints
                if t * length <= CONE_TOL or (1.0 - t) * length <= CONE_TOL:
                    continue
                dist = float(np.linalg.norm(start + t * disp - cone))
                best = min(best, dist)
        return best

    # -- metric ---------------------------------------------------------------

    def _sheet_deltas(self, p: Point, q: Point):
        pc = self._embed(p)
        qc = self._embed(q)
        return pc, (qc - pc, -qc - pc)

    def distance(self, p: Point, q: Point) -> float:
        self._check_point(p)
        self._check_point(q)
        _, deltas = self._sheet_deltas(p, q)
        best = math.inf
        for delta in deltas:
            red = delta - self.cover_periods * np.round(delta / self.cover_periods)
            best = min(best, float(np.linalg.norm(red)))
        return best

    def minimizing_geodesics(self, p, q, tol=DEFAULT_TOL, allow_degenerate=False):
        self._check_point(p)
        self._check_point(q)
        _raise_if_equal(p, q)
        if self.distance(p, q) == 0.0:
            raise CoincidentPointsError("points are identified in the quotient")
        pc, deltas = self._sheet_deltas(p, q)
        reach = self.distance(p, q) + tol
        found = []
        for sheet, delta in enumerate(deltas):
            for lam, disp, length in _enumerate_lifts(delta, self.cover_periods, reach):
                found.append((sheet, lam, disp, length))
        dmin = min(f[3] for f in found)
        mat_p = self._chart_matrix(p.face)
        segs = []
        for sheet, lam, disp, length in sorted(found, key=lambda t: (t[0], t[1])):
            if length > dmin + tol:
                continue
            e = disp / length
            v0 = mat_p @ e
            v1 = self._chart_matrix(q.face) @ (e if sheet == 0 else -e)
            degenerate = self._cone_clearance(pc, disp) < CONE_TOL
            seg = MinGeodesic(
                length=length,
                v0=v0,
                v1=v1,
                lift=(sheet,) + tuple(lam),
                degenerate=degenerate,
            )
            segs.append(seg)
        segs = self._dedup(segs)
        bad = [s for s in segs if s.degenerate]
        if bad and not allow_degenerate:
            raise DegenerateTrajectoryError(
                "a minimizing segment passes through a cone point; "
                "pass allow_degenerate=True to keep it"
            )
        return segs

    @staticmethod
    def _dedup(segs: list[MinGeodesic]) -> list[MinGeodesic]:
        # distinct lifts can project to one segment when an endpoint is a
        # cone point; compare geometric signatures
        out: list[MinGeodesic] = []
        for s in segs:
            dup = any(
                abs(s.length - t.length) <= 1e-12
                and np.allclose(s.v0, t.v0, atol=1e-12)
                and np.allclose(s.v1, t.v1, atol=1e-12)
                for t in out
            )
            if not dup:
                out.append(s)
        return out

    # -- flows ----------------------------------------------------------------

    def flow(self, tan: Tangent, s: float, carry: tuple = ()):
        self._check_point(tan.base)
        vec = _as_vector(tan.vec, 2, "tangent vector")
        start = self._embed(tan.base)
        cover_vec = self._chart_matrix(tan.base.face) @ vec
        disp = s * cover_vec
        if self._cone_clearance(start, disp) < CONE_TOL:
            raise DegenerateTrajectoryError("trajectory passes through a cone point")
        end, transform = self._reduce_cover(start + disp)
        carried = tuple(
            transform @ (self._chart_matrix(tan.base.face) @ _as_vector(c, 2, "carried vector"))
            for c in carry
        )
        return end, transform @ cover_vec, carried

    def min_scale(self) -> float:
        return min(self.a, self.b)

    @property
    def supports_batch(self) -> bool:
        return True

    # batch points are (coords (N,2), is_bottom (N,) bool)

    def _embed_batch(self, coords, is_bottom):
        out = coords.copy()
        out[:, 1] = np.where(is_bottom, 2.0 * self.b - out[:, 1], out[:, 1])
        return out

    def distance_batch(self, A, fa, B, fb) -> np.ndarray:
        pa = self._embed_batch(A, fa)
        pb = self._embed_batch(B, fb)
        best = None
        for signed in (pb, -pb):
            delta = signed - pa
            delta = delta - self.cover_periods * np.round(delta / self.cover_periods)
            d = np.sqrt((delta**2).sum(axis=1))
            best = d if best is None else np.minimum(best, d)
        return best

    def min_count_batch(self, A, fa, B, fb, tol: float) -> np.ndarray:
        pa = self._embed_batch(A, fa)
        pb = self._embed_batch(B, fb)
        lengths = []
        dmax = float(self.distance_batch(A, fa, B, fb).max())
        reach = dmax + tol
        k1 = math.ceil(reach / self.cover_periods[0]) + 1
        k2 = math.ceil(reach / self.cover_periods[1]) + 1
        offs = np.array(
            [(i * self.cover_periods[0], j * self.cover_periods[1])
             for i in range(-k1, k1 + 1) for j in range(-k2, k2 + 1)]
        )
        for signed in (pb, -pb):
            delta = signed - pa
            delta = delta - self.cover_periods * np.round(delta / self.cover_periods)
            cand = delta[:, None, :] + offs[None, :, :]
            lengths.append(np.sqrt((cand**2).sum(axis=2)))
        alll = np.concatenate(lengths, axis=1)
        dmin = alll.min(axis=1, keepdims=True)
        return (alll <= dmin + tol).sum(axis=1)

    def line_batch(self, base: Point, direction: np.ndarray, lengths: np.ndarray):
        start = self._embed(base)
        cover_dir = self._chart_matrix(base.face) @ direction
        pts = start[None, :] + lengths[:, None] * cover_dir[None, :]
        u = pts - self.cover_periods * np.floor(pts / self.cover_periods)
        u = np.where(u >= self.cover_periods, u - self.cover_periods, u)
        flip = u[:, 0] > self.a
        u[flip] = self.cover_periods - u[flip]
        u[:, 1] = np.where(u[:, 1] >= self.cover_periods[1], 0.0, u[:, 1])
        is_bottom = u[:, 1] > self.b
        u[:, 1] = np.where(is_bottom, 2.0 * self.b - u[:, 1], u[:, 1])
        return u, is_bottom

    def to_dict(self) -> dict:
        return {"type": "doubled_rectangle", "a": self.a, "b": self.b}


class Product(Space):
    """Riemannian product of two or more factor spaces."""

    def __init__(self, factors):
        factors = list(factors)
        if len(factors) < 2:
            raise ValidationError("a product needs at least two factors")
        self.factors = factors
        self.dim = sum(f.dim for f in factors)
        self._offsets = []
        off = 0
        for f in factors:
            self._offsets.append((off, off + f.dim))
            off += f.dim

    def _split(self, coords: np.ndarray):
        return [coords[lo:hi] for lo, hi in self._offsets]

    def _split_point(self, p: Point) -> list[Point]:
        faces = p.face if isinstance(p.face, tuple) else (None,) * len(self.factors)
        return [
            f.point(c) if face is None else f.point(c, face)
            for f, c, face in zip(self.factors, self._split(p.coords), faces)
        ]

    def point(self, coords, face=None) -> Point:
        coords = _as_vector(coords, self.dim, "point")
        if face is None:
            faces = [None] * len(self.factors)
        elif isinstance(face, (tuple, list)) and len(face) == len(self.factors):
            faces = list(face)
        else:
            raise ValidationError("product point face must be a per-factor tuple or None")
        pts = [
            f.point(c) if fc is None else f.point(c, fc)
            for f, c, fc in zip(self.factors, self._split(coords), faces)
        ]
        out_faces = tuple(p.face for p in pts)
        face_field = out_faces if any(f is not None for f in out_faces) else None
        return Point(np.concatenate([p.coords for p in pts]), face_field)

    def _join(self, pts: list[Point]) -> Point:
        faces = tuple(p.face for p in pts)
        face_field = faces if any(f is not None for f in faces) else None
        return Point(np.concatenate([p.coords for p in pts]), face_field)

    def distance(self, p: Point, q: Point) -> float:
        self._check_point(p)
        self._check_point(q)
        ps = self._split_point(p)
        qs = self._split_point(q)
        return math.sqrt(sum(f.distance(a, b) ** 2 for f, a, b in zip(self.factors, ps, qs)))

    def minimizing_geodesics(self, p, q, tol=DEFAULT_TOL, allow_degenerate=False):
        self._check_point(p)
        self._check_point(q)
        ps = self._split_point(p)
        qs = self._split_point(q)
        total = self.distance(p, q)
        if total == 0.0:
            raise CoincidentPointsError("points are identified in the product")
        per_factor = []
        for f, a, b in zip(self.factors, ps, qs):
            if f.distance(a, b) == 0.0:
                trivial = MinGeodesic(
                    length=0.0,
                    v0=np.zeros(f.dim),
                    v1=np.zeros(f.dim),
                    lift=self._trivial_lift(f),
                )
                per_factor.append([trivial])
            else:
                per_factor.append(f.minimizing_geodesics(a, b, tol, allow_degenerate))
        segs = []
        for combo in itertools.product(*per_factor):
            length = math.sqrt(sum(s.length**2 for s in combo))
            v0 = np.concatenate([s.length * s.v0 for s in combo]) / length
            v1 = np.concatenate([s.length * s.v1 for s in combo]) / length
            segs.append(
                MinGeodesic(
                    length=length,
                    v0=v0,
                    v1=v1,
                    lift=tuple(s.lift for s in combo),
                    degenerate=any(s.degenerate for s in combo),
                )
            )
        segs.sort(key=lambda s: s.lift)
        return segs

    @staticmethod
    def _trivial_lift(factor: Space):
        if isinstance(factor, FlatTorus):
            return (0,) * factor.dim
        if isinstance(factor, DoubledRectangle):
            return (0, 0, 0)
        return tuple(Product._trivial_lift(f) for f in factor.factors)

    def flow(self, tan: Tangent, s: float, carry: tuple = ()):
        self._check_point(tan.base)
        vec = _as_vector(tan.vec, self.dim, "tangent vector")
        pts = self._split_point(tan.base)
        vecs = self._split(vec)
        carries = [self._split(_as_vector(c, self.dim, "carried vector")) for c in carry]
        ends, outvecs = [], []
        outcarry = [[] for _ in carry]
        for idx, (f, p0, v0) in enumerate(zip(self.factors, pts, vecs)):
            sub_carry = tuple(c[idx] for c in carries)
            end, v, carried = f.flow(Tangent(p0, v0), s, sub_carry)
            ends.append(end)
            outvecs.append(v)
            for slot, cv in zip(outcarry, carried):
                slot.append(cv)
        end = self._join(ends)
        return (
            end,
            np.concatenate(outvecs),
            tuple(np.concatenate(slot) for slot in outcarry),
        )

    def min_scale(self) -> float:
        return min(f.min_scale() for f in self.factors)

    @property
    def supports_batch(self) -> bool:
        return all(isinstance(f, FlatTorus) for f in self.factors)

    def _effective_torus(self) -> FlatTorus:
        if not self.supports_batch:
            raise SpaceSupportError("product contains a non-torus factor")
        return FlatTorus(np.concatenate([f.periods for f in self.factors]))

    def distance_batch(self, A, fa, B, fb) -> np.ndarray:
        return self._effective_torus().distance_batch(A, fa, B, fb)

    def min_count_batch(self, A, fa, B, fb, tol: float) -> np.ndarray:
        return self._effective_torus().min_count_batch(A, fa, B, fb, tol)

    def line_batch(self, base: Point, direction: np.ndarray, lengths: np.ndarray):
        return self._effective_torus().line_batch(base, direction, lengths)

    def to_dict(self) -> dict:
        return {"type": "product", "factors": [f.to_dict() for f in self.factors]}


def effective_periods(space: Space) -> np.ndarray | None:
    """Concatenated periods when every leaf factor is a flat torus, else None."""
    if isinstance(space, FlatTorus):
        return space.periods
    if isinstance(space, Product):
        parts = [effective_periods(f) for f in space.factors]
        if any(p is None for p in parts):
            return None
        return np.concatenate(parts)
    return None


# -- operation-style wrappers (the module-level interface) ---------------------


def distance(space: Space, p: Point, q: Point) -> float:
    return space.distance(p, q)


def minimizing_geodesics(space, p, q, tol=DEFAULT_TOL, allow_degenerate=False):
    return space.minimizing_geodesics(p, q, tol, allow_degenerate)


def exp_map(space: Space, tan: Tangent, s: float) -> Point:
    return space.exp_map(tan, s)


def is_cut_pair(space: Space, p: Point, q: Point, tol: float = DEFAULT_TOL) -> bool:
    return space.is_cut_pair(p, q, tol)


# -- serialization -------------------------------------------------------------


def space_from_dict(data: dict) -> Space:
    if not isinstance(data, dict) or "type" not in data:
        raise ValidationError("space: expected an object with a 'type' field")
    kind = data["type"]
    if kind == "flat_torus":
        if "periods" not in data:
            raise ValidationError("space.periods: missing")
        return FlatTorus(data["periods"])
    if kind == "doubled_rectangle":
        if "a" not in data or "b" not in data:
            raise ValidationError("space.a / space.b: missing")
        return DoubledRectangle(data["a"], data["b"])
    if kind == "product":
        factors = data.get("factors")
        if not isinstance(factors, list):
            raise ValidationError("space.factors: expected a list")
        return Product([space_from_dict(f) for f in factors])
    raise ValidationError(f"space.type: unknown variant {kind!r}")


def point_to_dict(p: Point) -> dict:
    face = list(p.face) if isinstance(p.face, tuple) else p.face
    return {"coords": [float(c) for c in p.coords], "face": face}


def point_from_dict(space: Space, data: dict) -> Point:
    if not isinstance(data, dict) or "coords" not in data:
        raise ValidationError("point: expected an object with 'coords'")
    face = data.get("face")
    if isinstance(face, list):
        face = tuple(face)
    if face is None and isinstance(space, DoubledRectangle):
        face = TOP
    return space.point(data["coords"]) if face is None else space.point(data["coords"], face)
