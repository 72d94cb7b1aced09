"""Geometry backend tests: distances, minimizing sets, flows, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import loopflow as lf
from conftest import (
    brute_double_distance,
    brute_double_minimizer_count,
    brute_torus_distance,
    brute_torus_minimizers,
)

T11 = lf.FlatTorus([1.0, 1.0])
T21 = lf.FlatTorus([2.0, 1.0])
D21 = lf.DoubledRectangle(2.0, 1.0)

coord = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


class TestTorusDistance:
    def test_half_period(self):
        assert T11.distance(T11.point([0, 0]), T11.point([0.5, 0])) == 0.5

    def test_identity(self):
        p = T11.point([0.3, 0.7])
        assert T11.distance(p, p) == 0.0

    def test_derived_value_against_brute_force(self):
        d = T21.distance(T21.point([0, 0]), T21.point([1, 0.5]))
        assert d == pytest.approx(brute_torus_distance([2, 1], [0, 0], [1, 0.5]), abs=1e-15)
        assert d == pytest.approx(1.118033988749895, abs=1e-12)  # sqrt(1.25)

    @given(px=coord, py=coord, qx=coord, qy=coord)
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, px, py, qx, qy):
        p, q = T21.point([px, py]), T21.point([qx, qy])
        assert T21.distance(p, q) == pytest.approx(
            brute_torus_distance([2, 1], p.coords, q.coords), abs=1e-12
        )

    @given(px=coord, py=coord, qx=coord, qy=coord)
    @settings(max_examples=60, deadline=None)
    def test_symmetry_exact(self, px, py, qx, qy):
        p, q = T21.point([px, py]), T21.point([qx, qy])
        assert T21.distance(p, q) == T21.distance(q, p)

    @given(px=coord, py=coord, qx=coord, qy=coord, rx=coord, ry=coord)
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, px, py, qx, qy, rx, ry):
        p, q, r = T21.point([px, py]), T21.point([qx, qy]), T21.point([rx, ry])
        assert T21.distance(p, q) <= T21.distance(p, r) + T21.distance(r, q) + 1e-12

    @given(px=coord, py=coord, qx=coord, qy=coord, cx=coord, cy=coord)
    @settings(max_examples=60, deadline=None)
    def test_translation_equivariance(self, px, py, qx, qy, cx, cy):
        shift = np.array([cx, cy])
        p, q = T21.point([px, py]), T21.point([qx, qy])
        ps, qs = T21.point(p.coords + shift), T21.point(q.coords + shift)
        assert T21.distance(p, q) == pytest.approx(T21.distance(ps, qs), abs=1e-12)


class TestMinimizingGeodesics:
    def test_four_diagonal_minimizers(self):
        segs = T11.minimizing_geodesics(T11.point([0, 0]), T11.point([0.5, 0.5]))
        assert len(segs) == 4
        disps = sorted(tuple(np.round(s.length * s.v0, 12)) for s in segs)
        assert disps == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]

    def test_unique_short_minimizer(self):
        segs = T11.minimizing_geodesics(T11.point([0, 0]), T11.point([0.2, 0.1]))
        assert len(segs) == 1
        expected = np.array([0.2, 0.1]) / np.linalg.norm([0.2, 0.1])
        assert np.allclose(segs[0].v0, expected, atol=1e-12)

    def test_equal_points_rejected(self):
        p = T11.point([0.2, 0.2])
        with pytest.raises(lf.CoincidentPointsError):
            T11.minimizing_geodesics(p, p)

    def test_double_rectangle_involution_tie(self):
        p = D21.point([1, 0.5], "top")
        q = D21.point([1, 0.5], "bottom")
        segs = D21.minimizing_geodesics(p, q)
        assert len(segs) >= 2
        assert len(segs) == brute_double_minimizer_count(2, 1, [1, 0.5], "top", [1, 0.5], "bottom")
        assert all(s.length == pytest.approx(segs[0].length, abs=1e-12) for s in segs)

    @given(px=coord, py=coord, qx=coord, qy=coord)
    @settings(max_examples=60, deadline=None)
    def test_lengths_velocities_and_membership(self, px, py, qx, qy):
        p, q = T21.point([px, py]), T21.point([qx, qy])
        d = T21.distance(p, q)
        if d == 0.0:
            return
        segs = T21.minimizing_geodesics(p, q, tol=1e-9)
        assert segs
        for s in segs:
            assert abs(s.length - d) <= 1e-9
            assert abs(np.linalg.norm(s.v0) - 1.0) <= 1e-12
            assert abs(np.linalg.norm(s.v1) - 1.0) <= 1e-12
        want = brute_torus_minimizers([2, 1], p.coords, q.coords)
        got = sorted(tuple(s.length * s.v0) for s in segs)
        assert np.allclose(np.array(got), np.array(want), atol=1e-9)

    @given(px=coord, py=coord, qx=coord, qy=coord, cx=coord, cy=coord)
    @settings(max_examples=40, deadline=None)
    def test_velocity_sets_translation_invariant(self, px, py, qx, qy, cx, cy):
        p, q = T21.point([px, py]), T21.point([qx, qy])
        # displacements below float absorption vanish under the shift
        if T21.distance(p, q) < 1e-9:
            return
        shift = np.array([cx, cy])
        ps, qs = T21.point(p.coords + shift), T21.point(q.coords + shift)
        a = sorted(tuple(np.round(s.v0, 9)) for s in T21.minimizing_geodesics(p, q))
        b = sorted(tuple(np.round(s.v0, 9)) for s in T21.minimizing_geodesics(ps, qs))
        assert np.allclose(np.array(a), np.array(b), atol=1e-8)


class TestExpMap:
    def test_plain(self):
        end = T11.exp_map(lf.Tangent(T11.point([0, 0]), np.array([1.0, 0.0])), 0.25)
        assert np.allclose(end.coords, [0.25, 0.0], atol=1e-15)

    def test_wraparound(self):
        end = T11.exp_map(lf.Tangent(T11.point([0.9, 0]), np.array([1.0, 0.0])), 0.2)
        assert np.allclose(end.coords, [0.1, 0.0], atol=1e-12)

    def test_double_face_crossing(self):
        start = D21.point([1, 0.9], "top")
        end = D21.exp_map(lf.Tangent(start, np.array([0.0, 1.0])), 0.2)
        assert end.face == "bottom"
        assert np.allclose(end.coords, [1.0, 0.9], atol=1e-12)

    def test_double_cone_point_hit(self):
        start = D21.point([0.5, 1.0], "top")
        with pytest.raises(lf.DegenerateTrajectoryError):
            D21.exp_map(lf.Tangent(start, np.array([-1.0, 0.0])), 1.0)

    @given(
        px=coord,
        py=coord,
        vx=st.floats(-1, 1, allow_nan=False),
        vy=st.floats(-1, 1, allow_nan=False),
        s=st.floats(0.01, 0.49, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_unit_speed_distance(self, px, py, vx, vy, s):
        v = np.array([vx, vy])
        if np.linalg.norm(v) < 1e-3:
            return
        v = v / np.linalg.norm(v)
        base = T21.point([px, py])
        end = T21.exp_map(lf.Tangent(base, v), s)
        # below half the shortest period there is no wraparound ambiguity
        assert T21.distance(base, end) == pytest.approx(s, abs=1e-12)

    def test_transported_direction_consistent(self):
        # crossing onto the bottom face flips the chart y-axis
        start = D21.point([1.0, 0.9], "top")
        _, vel, (carried,) = D21.flow(
            lf.Tangent(start, np.array([0.0, 1.0])), 0.2, carry=(np.array([1.0, 0.0]),)
        )
        assert np.allclose(vel, [0.0, -1.0], atol=1e-12)
        assert np.allclose(carried, [1.0, 0.0], atol=1e-12)


class TestCutPairs:
    def test_half_period_pair(self):
        assert lf.is_cut_pair(T11, T11.point([0, 0]), T11.point([0.5, 0]))

    def test_generic_pair(self):
        assert not lf.is_cut_pair(T11, T11.point([0, 0]), T11.point([0.2, 0]))

    def test_diagonal_tie_on_rectangular_torus(self):
        assert lf.is_cut_pair(T21, T21.point([0, 0]), T21.point([0.5, 0.5]))


class TestDoubledRectangle:
    @given(
        px=st.floats(0.05, 1.95),
        py=st.floats(0.05, 0.95),
        qx=st.floats(0.05, 1.95),
        qy=st.floats(0.05, 0.95),
        pf=st.booleans(),
        qf=st.booleans(),
    )
    @settings(max_examples=60, deadline=None)
    def test_distance_matches_brute_force(self, px, py, qx, qy, pf, qf):
        faces = {True: "bottom", False: "top"}
        p = D21.point([px, py], faces[pf])
        q = D21.point([qx, qy], faces[qf])
        assert D21.distance(p, q) == pytest.approx(
            brute_double_distance(2, 1, [px, py], faces[pf], [qx, qy], faces[qf]), abs=1e-12
        )

    def test_boundary_points_identified(self):
        top = D21.point([0.7, 0.0], "top")
        bottom = D21.point([0.7, 0.0], "bottom")
        assert bottom.face == "top"
        assert D21.distance(top, bottom) == 0.0

    def test_min_count_batch_matches_scalar(self):
        pts = [(0.3, 0.4, "top"), (1.7, 0.2, "bottom"), (0.5, 0.5, "bottom"), (1.0, 0.9, "bottom")]
        A = np.array([[0.5, 0.5]] * len(pts))
        fa = np.array([False] * len(pts))
        B = np.array([[x, y] for x, y, _ in pts])
        fb = np.array([f == "bottom" for _, _, f in pts])
        counts = D21.min_count_batch(A, fa, B, fb, 1e-9)
        for i, (x, y, f) in enumerate(pts):
            scalar = len(D21.minimizing_geodesics(D21.point([0.5, 0.5], "top"), D21.point([x, y], f)))
            assert counts[i] == scalar


class TestProduct:
    def test_distance_is_euclidean_combination(self, rng):
        TA, TB = lf.FlatTorus([1.0, 0.8]), lf.FlatTorus([1.2])
        P = lf.Product([TA, TB])
        for _ in range(25):
            a = rng.uniform(0, 1, size=3)
            b = rng.uniform(0, 1, size=3)
            p, q = P.point(a), P.point(b)
            da = TA.distance(TA.point(a[:2]), TA.point(b[:2]))
            db = TB.distance(TB.point(a[2:]), TB.point(b[2:]))
            assert P.distance(p, q) == pytest.approx(math.hypot(da, db), abs=1e-12)

    def test_minimizing_set_is_factor_product(self, rng):
        TA, TB = lf.FlatTorus([1.0, 0.8]), lf.FlatTorus([1.2])
        P = lf.Product([TA, TB])
        for _ in range(25):
            a = rng.uniform(0, 1, size=3)
            b = rng.uniform(0, 1, size=3)
            if np.allclose(a, b):
                continue
            p, q = P.point(a), P.point(b)
            segs = P.minimizing_geodesics(p, q)
            na = (
                1
                if np.array_equal(TA.point(a[:2]).coords, TA.point(b[:2]).coords)
                else len(TA.minimizing_geodesics(TA.point(a[:2]), TA.point(b[:2])))
            )
            nb = (
                1
                if np.array_equal(TB.point(a[2:]).coords, TB.point(b[2:]).coords)
                else len(TB.minimizing_geodesics(TB.point(a[2:]), TB.point(b[2:])))
            )
            assert len(segs) == na * nb
            for s in segs:
                assert abs(np.linalg.norm(s.v0) - 1.0) <= 1e-12
                assert s.length == pytest.approx(P.distance(p, q), abs=1e-9)

    def test_nested_products(self):
        P = lf.Product([lf.Product([lf.FlatTorus([1.0]), lf.FlatTorus([0.5])]), lf.FlatTorus([2.0])])
        p = P.point([0.1, 0.2, 0.3])
        q = P.point([0.4, 0.1, 1.1])
        flat = lf.FlatTorus([1.0, 0.5, 2.0])
        assert P.distance(p, q) == pytest.approx(
            flat.distance(flat.point([0.1, 0.2, 0.3]), flat.point([0.4, 0.1, 1.1])), abs=1e-12
        )


class TestSerialization:
    @pytest.mark.parametrize(
        "space",
        [
            lf.FlatTorus([1.0, 0.75]),
            lf.DoubledRectangle(2.0, 1.0),
            lf.Product([lf.FlatTorus([1.0]), lf.DoubledRectangle(1.0, 0.5)]),
        ],
    )
    def test_space_roundtrip(self, space):
        again = lf.space_from_dict(space.to_dict())
        assert again.to_dict() == space.to_dict()

    def test_point_roundtrip(self):
        p = D21.point([0.5, 0.25], "bottom")
        data = lf.point_to_dict(p)
        assert data == {"coords": [0.5, 0.25], "face": "bottom"}
        q = lf.point_from_dict(D21, data)
        assert q.face == "bottom" and np.array_equal(q.coords, p.coords)

    def test_bad_space_rejected(self):
        with pytest.raises(lf.ValidationError):
            lf.space_from_dict({"type": "sphere"})
        with pytest.raises(lf.ValidationError):
            lf.space_from_dict({"type": "flat_torus", "periods": [1.0, -2.0]})
