"""Discrete loop energy on k-point configurations and its one-sided calculus.

A configuration is a cyclic tuple of k points; its energy is k times the sum
of squared consecutive distances.  Where some consecutive pair is a cut pair
the energy is not differentiable, but it always has one-sided directional
derivatives, expressed as a minimum of linear forms over per-segment
minimizing geodesics.  Each choice of one minimizing geodesic per segment
produces one "candidate gradient"; a candidate of maximal norm is called
gradient-like, and its negative is the steepest one-sided descent direction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    CoincidentPointsError,
    NotSmoothCriticalError,
    ResourceLimitError,
    ValidationError,
)
from .spaces import DEFAULT_TOL, MinGeodesic, Point, Space, Tangent

COMPONENT_DEDUP_TOL = 1e-12
MAX_CANDIDATE_TUPLES = 10**6


@dataclass(frozen=True, eq=False)
class Configuration:
    """An ordered cyclic tuple of k >= 2 points of one space."""

    space: Space
    points: tuple[Point, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValidationError("a configuration needs at least two points")
        for p in self.points:
            self.space._check_point(p, "configuration point")

    @property
    def k(self) -> int:
        return len(self.points)


def configuration(space: Space, coords, faces=None) -> Configuration:
    """Build a configuration from raw chart coordinates."""
    pts = []
    for i, c in enumerate(coords):
        face = None if faces is None else faces[i]
        pts.append(space.point(c) if face is None else space.point(c, face))
    return Configuration(space, tuple(pts))


@dataclass(frozen=True, eq=False)
class ConfigTangent:
    """One chart vector per configuration point."""

    vecs: tuple[np.ndarray, ...]

    @staticmethod
    def of(x: Configuration, vecs) -> "ConfigTangent":
        vecs = tuple(np.asarray(v, dtype=float) for v in vecs)
        if len(vecs) != x.k:
            raise ValidationError("tangent has wrong number of components")
        for v in vecs:
            if v.shape != (x.space.dim,):
                raise ValidationError("tangent component has wrong dimension")
        return ConfigTangent(vecs)

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.vecs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.stacked()))


@dataclass(frozen=True, eq=False)
class CandidateGradient:
    """One candidate gradient: component vectors, the per-segment lift choice
    that produced it, and its product-metric norm."""

    vecs: tuple[np.ndarray, ...]
    choice: tuple
    magnitude: float

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.vecs)


class LoopEnergy(NamedTuple):
    energy: float
    length: float


def segment_distances(x: Configuration) -> list[float]:
    pts = x.points
    return [x.space.distance(pts[i], pts[(i + 1) % x.k]) for i in range(x.k)]


def uniform_energy(x: Configuration) -> float:
    """k times the sum of squared consecutive distances (cyclic)."""
    return x.k * sum(d * d for d in segment_distances(x))


def loop_energy(x: Configuration) -> LoopEnergy:
    """Energy and length of the broken loop through the configuration.

    Zero-length segments are allowed.  The energy equals ``uniform_energy``
    and dominates length squared, with equality exactly when all segment
    lengths agree.
    """
    ds = segment_distances(x)
    return LoopEnergy(energy=x.k * sum(d * d for d in ds), length=sum(ds))


def exp_config(x: Configuration, v: ConfigTangent, s: float) -> Configuration:
    """Move every point along its tangent component for time s."""
    pts = tuple(
        x.space.exp_map(Tangent(p, vec), s) for p, vec in zip(x.points, v.vecs)
    )
    return Configuration(x.space, pts)


def dplus_distance(space: Space, p: Point, q: Point, vp, wq, tol: float = DEFAULT_TOL) -> float:
    """One-sided derivative of distance at (p, q) in the direction (vp, wq).

    Equals the minimum of ``-<vp, v0> - <wq, -v1>`` over all minimizing
    geodesics from p to q.
    """
    vp = np.asarray(vp, dtype=float)
    wq = np.asarray(wq, dtype=float)
    segs = space.minimizing_geodesics(p, q, tol)
    return min(-float(vp @ s.v0) - float(wq @ (-s.v1)) for s in segs)


def segment_geodesics(x: Configuration, tol: float = DEFAULT_TOL) -> list[list[MinGeodesic]]:
    """Minimizing geodesics of every consecutive pair (cyclic).

    Raises ``CoincidentPointsError`` when consecutive points coincide.
    """
    out = []
    for i in range(x.k):
        p, q = x.points[i], x.points[(i + 1) % x.k]
        try:
            out.append(x.space.minimizing_geodesics(p, q, tol))
        except CoincidentPointsError:
            raise CoincidentPointsError(f"configuration points {i} and {(i + 1) % x.k} coincide")
    return out


def dplus_uniform_energy(
    x: Configuration, v: ConfigTangent, tol: float = DEFAULT_TOL, normalized: bool = False
) -> float:
    """One-sided derivative of the loop energy along a configuration tangent.

    The minimum over per-segment geodesic choices separates segment by
    segment, so no tuple enumeration is needed.  ``normalized=True`` divides
    the value by 2k.
    """
    if len(v.vecs) != x.k:
        raise ValidationError("tangent/configuration size mismatch")
    seglists = segment_geodesics(x, tol)
    total = 0.0
    for i, segs in enumerate(seglists):
        vi = v.vecs[i]
        vnext = v.vecs[(i + 1) % x.k]
        best = min(-float(vi @ s.v0) + float(vnext @ s.v1) for s in segs)
        total += segs[0].length * best
    return total if normalized else 2.0 * x.k * total


def candidate_gradients(
    x: Configuration,
    tol: float = DEFAULT_TOL,
    max_tuples: int = MAX_CANDIDATE_TUPLES,
) -> list[CandidateGradient]:
    """All candidate gradients, one per choice of minimizer for each segment.

    Component i is ``l_{i-1} v1_{i-1} - l_i v0_i`` for the chosen segments.
    Results are deduplicated componentwise and ordered by lift descriptors.
    """
    seglists = segment_geodesics(x, tol)
    count = 1
    for segs in seglists:
        count *= len(segs)
        if count > max_tuples:
            raise ResourceLimitError(
                f"candidate enumeration exceeds the cap of {max_tuples} tuples"
            )
    out: list[CandidateGradient] = []
    for combo in itertools.product(*seglists):
        comps = []
        for i in range(x.k):
            prev = combo[(i - 1) % x.k]
            cur = combo[i]
            comps.append(prev.length * prev.v1 - cur.length * cur.v0)
        stacked = np.concatenate(comps)
        dup = any(
            np.all(np.abs(stacked - c.stacked()) <= COMPONENT_DEDUP_TOL) for c in out
        )
        if dup:
            continue
        out.append(
            CandidateGradient(
                vecs=tuple(comps),
                choice=tuple(s.lift for s in combo),
                magnitude=float(np.linalg.norm(stacked)),
            )
        )
    return out


def gradient_like(x: Configuration, tol: float = DEFAULT_TOL) -> CandidateGradient:
    """A candidate gradient of maximal magnitude.

    Ties are broken by lexicographic order on the stacked components, so the
    result is deterministic.
    """
    cands = candidate_gradients(x, tol)
    return min(cands, key=lambda c: (-c.magnitude, tuple(c.stacked())))


def gradient_like_all(
    x: Configuration, tol: float = DEFAULT_TOL, magnitude_tol: float = 1e-12
) -> list[CandidateGradient]:
    """All candidates whose magnitude ties the maximum (within magnitude_tol)."""
    cands = candidate_gradients(x, tol)
    top = max(c.magnitude for c in cands)
    ties = [c for c in cands if c.magnitude >= top - magnitude_tol]
    return sorted(ties, key=lambda c: tuple(c.stacked()))


def has_associated_geodesic(x: Configuration, tol: float = DEFAULT_TOL) -> bool:
    """True when the zero vector is a candidate gradient (within tol), i.e.
    some choice of minimizers chains into a single closed geodesic."""
    return any(c.magnitude <= tol for c in candidate_gradients(x, tol))


def associated_geodesic(x: Configuration, tol: float = DEFAULT_TOL):
    """The closed geodesic through the configuration, when one exists.

    Uses the zero-candidate's witness chain; returns None when there is no
    candidate of magnitude <= tol or the chain cannot be classified.
    """
    from .geodesics import geodesic_from_chain  # local import to avoid a cycle

    for c in sorted(candidate_gradients(x, tol), key=lambda c: c.magnitude):
        if c.magnitude > tol:
            return None
        seglists = segment_geodesics(x, tol)
        chain = []
        for segs, lift in zip(seglists, c.choice):
            chain.append(next(s for s in segs if s.lift == lift))
        try:
            return geodesic_from_chain(x, chain, tol=max(tol * 10.0, 1e-7))
        except Exception:
            continue
    return None


@dataclass(frozen=True)
class HessianReport:
    """Spectrum summary of the energy Hessian at a smooth critical point."""

    index: int
    nullity: int
    eigenvalues: tuple[float, ...]
    zero_tol: float
    degenerate: bool


def hessian_index_nullity(
    x: Configuration,
    zero_tol: float = 1e-6,
    step: float = 1e-4,
    tol: float = DEFAULT_TOL,
) -> HessianReport:
    """Index and nullity of the energy Hessian by central finite differences.

    Requires a smooth critical point: every consecutive pair has a unique
    minimizing geodesic (with margin well above the probe step) and the
    gradient-like vector vanishes.  The degeneracy flag reports whether the
    null space contains a direction perpendicular to the loop velocity at
    every configuration point, which excludes the rotational null direction.
    """
    seglists = segment_geodesics(x, max(tol, 4.0 * step))
    for i, segs in enumerate(seglists):
        if len(segs) != 1:
            raise NotSmoothCriticalError(
                f"segment {i} has {len(segs)} minimizing geodesics within the probe margin"
            )
    g = gradient_like(x, tol)
    if g.magnitude > zero_tol:
        raise NotSmoothCriticalError(
            f"gradient-like magnitude {g.magnitude:.3e} exceeds zero_tol {zero_tol:.3e}"
        )

    n = x.space.dim
    k = x.k
    dim = k * n

    def f(u: np.ndarray) -> float:
        vecs = u.reshape(k, n)
        return uniform_energy(exp_config(x, ConfigTangent(tuple(vecs)), 1.0))

    e = np.eye(dim)
    f0 = f(np.zeros(dim))
    hess = np.zeros((dim, dim))
    for i in range(dim):
        hess[i, i] = (f(step * e[i]) - 2.0 * f0 + f(-step * e[i])) / (step * step)
        for j in range(i + 1, dim):
            val = (
                f(step * (e[i] + e[j]))
                - f(step * (e[i] - e[j]))
                - f(step * (e[j] - e[i]))
                + f(-step * (e[i] + e[j]))
            ) / (4.0 * step * step)
            hess[i, j] = val
            hess[j, i] = val
    hess = 0.5 * (hess + hess.T)
    eigvals, eigvecs = np.linalg.eigh(hess)

    index = int(np.sum(eigvals < -zero_tol))
    null_mask = np.abs(eigvals) <= zero_tol
    nullity = int(np.sum(null_mask))

    degenerate = False
    if nullity > 0:
        null_basis = eigvecs[:, null_mask]
        # velocity of the associated loop at each point: the unique chain
        directions = np.zeros((k, dim))
        for i, segs in enumerate(seglists):
            directions[i, i * n : (i + 1) * n] = segs[0].v0
        constrained = directions @ null_basis
        rank = np.linalg.matrix_rank(constrained, tol=1e-8)
        degenerate = bool(nullity - rank > 0)

    return HessianReport(
        index=index,
        nullity=nullity,
        eigenvalues=tuple(float(v) for v in eigvals),
        zero_tol=zero_tol,
        degenerate=degenerate,
    )


# -- serialization --------------------------------------------------------------


def configuration_to_dict(x: Configuration) -> dict:
    from .spaces import point_to_dict

    return {
        "space": x.space.to_dict(),
        "points": [point_to_dict(p) for p in x.points],
    }


def configuration_from_dict(data: dict) -> Configuration:
    from .spaces import point_from_dict, space_from_dict

    if not isinstance(data, dict) or "points" not in data:
        raise ValidationError("configuration: expected an object with 'points'")
    space = space_from_dict(data.get("space", {}))
    pts = tuple(point_from_dict(space, p) for p in data["points"])
    return Configuration(space, pts)


def candidate_to_dict(c: CandidateGradient) -> dict:
    return {
        "components": [[float(v) for v in vec] for vec in c.vecs],
        "choice": _lift_to_json(c.choice),
        "magnitude": c.magnitude,
    }


def _lift_to_json(lift):
    if isinstance(lift, tuple):
        return [_lift_to_json(v) for v in lift]
    return int(lift)
