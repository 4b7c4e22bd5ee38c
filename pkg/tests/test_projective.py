"""Tests for projective plane geometry, normalization, rho, fence."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asl.errors import ConvexityViolation, DegenerateTuple, TooFewVertices
from asl.projective import (
    Q0,
    STANDARD_CHART,
    ConvexPolygon,
    NormalizedPolygon,
    ProjMap,
    ProjPoint,
    corner_invariants,
    cycle_rho,
    fence,
    four_point_map,
    hausdorff_distance,
    normalize_polygon,
    polygon_from_json,
    polygon_to_json,
)

PENTAGON_FIXED = (0.5, (3 + np.sqrt(5)) / 4)


def regular_polygon(k, radius=1.0, phase=np.pi / 2):
    ang = phase + 2 * np.pi * np.arange(k) / k
    return ConvexPolygon(
        [ProjPoint.from_chart(radius * np.cos(a), radius * np.sin(a)) for a in ang]
    )


def random_convex_polygon(rng, k, rmin=0.6, rmax=1.4):
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        if np.min(np.diff(ang)) < 0.25 or (2 * np.pi - ang[-1] + ang[0]) < 0.25:
            continue
        r = rng.uniform(rmin, rmax, k)
        try:
            return ConvexPolygon(
                [ProjPoint.from_chart(ri * np.cos(a), ri * np.sin(a)) for ri, a in zip(r, ang)]
            )
        except ConvexityViolation:
            continue


def random_proj_map(rng, scale=0.25, max_cond=10.0):
    while True:
        A = ProjMap(np.eye(3) + scale * rng.standard_normal((3, 3)))
        if A.cond() <= max_cond:
            return A


class TestProjPoint:
    def test_scale_free_equality(self):
        assert ProjPoint((1, 2, 3)) == ProjPoint((-2, -4, -6))
        assert ProjPoint((1, 0, 0)) != ProjPoint((0, 1, 0))

    def test_zero_rejected(self):
        with pytest.raises(Exception):
            ProjPoint((0, 0, 0))

    def test_canonical_form(self):
        v = ProjPoint((-3, 1, 2)).v
        assert abs(np.linalg.norm(v) - 1) < 1e-15
        assert v[0] > 0  # first nonzero coordinate positive


class TestFourPointMap:
    def test_identity_case(self):
        A = four_point_map(Q0, Q0)
        assert np.allclose(A.matrix, np.eye(3) * np.sign(A.matrix[0, 0]), atol=1e-12)
        assert A.det_error < 1e-12

    def test_cyclic_permutation_of_basis(self):
        # derived oracle: apply the map to all four points and compare
        pts = [ProjPoint(e) for e in np.eye(3)] + [ProjPoint((1, 1, 1))]
        perm = pts[1:] + pts[:1]
        A = four_point_map(pts, perm)
        for p, q in zip(pts, perm):
            assert A(p).isclose(q, 1e-12)

    def test_unit_square_to_rational_quad(self):
        square = [ProjPoint.from_chart(*xy) for xy in [(0, 0), (1, 0), (1, 1), (0, 1)]]
        quad = [
            ProjPoint.from_chart(*xy)
            for xy in [(1 / 3, -1 / 5), (7 / 6, 1 / 7), (5 / 4, 9 / 8), (-1 / 9, 4 / 5)]
        ]
        A = four_point_map(square, quad)
        for p, q in zip(square, quad):
            assert A(p).angular_distance(q) < 1e-12

    def test_degenerate_tuple(self):
        collinear = [
            ProjPoint.from_chart(0, 0),
            ProjPoint.from_chart(1, 1),
            ProjPoint.from_chart(2, 2),
            ProjPoint.from_chart(0, 1),
        ]
        with pytest.raises(DegenerateTuple):
            four_point_map(collinear, Q0)


class TestNormalization:
    def test_already_normalized_gives_identity(self):
        P = ConvexPolygon(list(Q0) + [ProjPoint.from_chart(*PENTAGON_FIXED)])
        NP, A = normalize_polygon(P, 0)
        assert np.allclose(np.abs(A.matrix), np.eye(3), atol=1e-9)
        assert NP.base.isclose(P)

    def test_regular_pentagon_hits_fixed_point(self):
        # paper's pentagon example: the regular pentagon normalizes to the
        # rho-fixed point regardless of planar embedding
        P = regular_polygon(5, radius=2.3, phase=0.37)
        for start in range(5):
            NP, _ = normalize_polygon(P, start)
            xy = NP.free_chart_coords()[0]
            assert np.allclose(xy, PENTAGON_FIXED, atol=1e-9)

    def test_random_hexagon_all_starts_valid(self):
        rng = np.random.default_rng(3)
        P = random_convex_polygon(rng, 6)
        for start in range(6):
            NP, _ = normalize_polygon(P, start)
            assert len(NP) == 6  # constructor re-checks convexity + half-strip

    def test_projective_invariance_of_normalization(self):
        rng = np.random.default_rng(5)
        P = random_convex_polygon(rng, 6)
        A = random_proj_map(rng)
        NP1, _ = normalize_polygon(P, 2)
        NP2, _ = normalize_polygon(P.apply(A), 2)
        for v, w in zip(NP1.vertices, NP2.vertices):
            assert v.angular_distance(w) < 1e-9


class TestCycleRho:
    def test_pentagon_fixed_point(self):
        P = NormalizedPolygon(
            ConvexPolygon(list(Q0) + [ProjPoint.from_chart(*PENTAGON_FIXED)], chart=STANDARD_CHART)
        )
        R = cycle_rho(P)
        assert np.allclose(R.free_chart_coords()[0], PENTAGON_FIXED, atol=1e-10)

    def test_rho_order_five(self):
        P = NormalizedPolygon(
            ConvexPolygon(list(Q0) + [ProjPoint.from_chart(0.4, 1.9)], chart=STANDARD_CHART)
        )
        Q = P
        for _ in range(5):
            Q = cycle_rho(Q)
        for v, w in zip(P.vertices, Q.vertices):
            assert v.angular_distance(w) < 1e-9

    def test_printed_cremona_formula(self):
        # the paper's printed rational map is the inverse of rho as defined
        # by A:(q2,q3,q4,p5)->(q1,q2,q3,q4); check printed(rho(x,y)) == (x,y)
        x, y = 0.5, 2.0
        P = NormalizedPolygon(
            ConvexPolygon(list(Q0) + [ProjPoint.from_chart(x, y)], chart=STANDARD_CHART)
        )
        rx, ry = cycle_rho(P).free_chart_coords()[0]
        D = rx * rx + rx * (ry - 1) + ry * (ry - 1)
        assert np.allclose([ry * (ry - 1) / D, ry * (rx + ry - 1) / D], [x, y], atol=1e-12)

    def test_orbit_visits_all_normalizations(self):
        rng = np.random.default_rng(7)
        P = random_convex_polygon(rng, 6)
        NP0, _ = normalize_polygon(P, 0)
        orbit = [NP0]
        for _ in range(5):
            orbit.append(cycle_rho(orbit[-1]))
        starts = [normalize_polygon(P, s)[0] for s in range(6)]
        for s in starts:
            assert any(s.isclose(o, 1e-9) for o in orbit)
        for o in orbit[:-1]:
            assert any(o.isclose(s, 1e-9) for s in starts)


class TestCornerInvariants:
    def test_too_few_vertices(self):
        with pytest.raises(TooFewVertices):
            corner_invariants(ConvexPolygon(list(Q0)))

    def test_projective_invariance(self):
        rng = np.random.default_rng(9)
        P = random_convex_polygon(rng, 7)
        A = random_proj_map(rng)
        x1 = corner_invariants(P)
        x2 = corner_invariants(P.apply(A))
        assert np.max(np.abs(np.array(x1) - np.array(x2))) < 1e-10

    def test_regular_pentagon_symmetric(self):
        x = corner_invariants(regular_polygon(5))
        assert np.ptp(x) < 1e-10

    def test_regular_pentagon_value(self):
        # frozen from the brute-force transversal oracle below; equals
        # the square of the golden ratio
        x = corner_invariants(regular_polygon(5))[0]
        assert abs(x - 2.618033988749895) < 1e-10
        assert abs(x - _oracle_corner_invariant(regular_polygon(5), 0)) < 1e-10

    def test_shift_under_rho(self):
        rng = np.random.default_rng(13)
        NP, _ = normalize_polygon(random_convex_polygon(rng, 6), 0)
        x0 = np.array(corner_invariants(NP.base))
        x1 = np.array(corner_invariants(cycle_rho(NP).base))
        assert np.allclose(x1, np.roll(x0, -1), atol=1e-9)


def _oracle_corner_invariant(P, i):
    """Brute force: cut the four lines with an explicit transversal."""
    k = len(P)
    v = P.vertices[i].chart(P.chart)
    targets = [P.vertices[(i + j) % k].chart(P.chart) for j in (-2, -1, 1, 2)]
    # transversal: the line through the two outer targets
    t0, t1 = np.array(targets[0]), np.array(targets[3])
    direction = t1 - t0

    def hit(target):
        # intersection parameter of line(v, target) with the transversal
        A = np.column_stack([direction, np.asarray(v) - np.asarray(target)])
        s = np.linalg.solve(A, np.asarray(v) - t0)
        return s[0]

    a, b, c, d = (hit(t) for t in targets)
    return ((a - c) * (b - d)) / ((a - b) * (c - d))


class TestFence:
    def test_quadrilateral_reduces_to_diagonal_point(self):
        rng = np.random.default_rng(17)
        P = random_convex_polygon(rng, 4)
        pt = fence(P)
        assert isinstance(pt, ProjPoint)
        # oracle: straight segment intersection in chart coordinates
        xy = P.chart_coords()
        d1, d2 = xy[2] - xy[0], xy[3] - xy[1]
        s = np.linalg.solve(np.column_stack([d1, -d2]), xy[1] - xy[0])
        expected = ProjPoint(P.chart.from_chart(xy[0] + s[0] * d1).v)
        assert pt.isclose(expected, 1e-10)

    def test_regular_pentagon_fence_is_regular(self):
        P = regular_polygon(5)
        F = fence(P)
        xy = F.chart_coords(P.chart)
        r = np.linalg.norm(xy, axis=1)
        assert np.ptp(r) < 1e-12  # same center, same symmetry
        assert np.linalg.norm(xy.mean(axis=0)) < 1e-12

    def test_fence_vertices_match_segment_oracle(self):
        rng = np.random.default_rng(19)
        P = random_convex_polygon(rng, 6)
        F = fence(P)
        xy = P.chart_coords()
        k = len(P)
        for i in range(k):
            a, b = xy[(i - 1) % k], xy[(i + 1) % k]
            c, d = xy[i], xy[(i + 2) % k]
            s = np.linalg.solve(np.column_stack([b - a, -(d - c)]), c - a)
            expected = P.chart.from_chart(a + s[0] * (b - a))
            assert F.vertices[i].isclose(expected, 1e-9)

    def test_product_invariant_on_pentagons(self):
        rng = np.random.default_rng(23)
        for _ in range(3):
            P = random_convex_polygon(rng, 5)
            X1 = np.prod(corner_invariants(P))
            X2 = np.prod(corner_invariants(fence(P)))
            assert abs(X1 - X2) < 1e-8 * max(1.0, abs(X1))

    def test_fence_strictly_inside(self):
        from shapely.geometry import Polygon as ShapelyPolygon

        rng = np.random.default_rng(29)
        for k in (5, 6, 7):
            P = random_convex_polygon(rng, k)
            F = fence(P)
            outer = ShapelyPolygon(P.chart_coords())
            inner = ShapelyPolygon(F.chart_coords(P.chart))
            assert outer.contains(inner)

    def test_too_few(self):
        with pytest.raises(TooFewVertices):
            fence(ConvexPolygon([(1, 0, 1), (0, 1, 1), (-1, -1, 1)]))


class TestPolygonType:
    def test_collinear_rejected(self):
        with pytest.raises(ConvexityViolation):
            ConvexPolygon(
                [ProjPoint.from_chart(*xy) for xy in [(0, 0), (1, 0), (2, 0), (1, 1)]]
            )

    def test_nonconvex_rejected(self):
        with pytest.raises(ConvexityViolation):
            ConvexPolygon(
                [
                    ProjPoint.from_chart(*xy)
                    for xy in [(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)]
                ]
            )

    def test_orientation_flag_matches_listing(self):
        P = regular_polygon(5)
        assert P.orientation == 1
        assert P.reversed().orientation == -1

    def test_half_strip_invariants(self):
        rng = np.random.default_rng(31)
        NP, _ = normalize_polygon(random_convex_polygon(rng, 7), 0)
        xy = NP.free_chart_coords()
        assert np.all(xy[:, 0] > 0) and np.all(xy[:, 0] < 1) and np.all(xy[:, 1] > 1)
        assert np.all(np.diff(xy[:, 0]) < 0)


class TestJson:
    def test_round_trip(self):
        rng = np.random.default_rng(37)
        P = random_convex_polygon(rng, 6)
        blob = json.dumps(polygon_to_json(P))
        Q = polygon_from_json(blob)
        assert P.isclose(Q, 1e-12)
        for row in json.loads(blob)["vertices"]:
            v = np.array(row)
            assert abs(np.linalg.norm(v) - 1) < 1e-12
            nz = v[np.nonzero(v)[0][0]]
            assert nz > 0


class TestHausdorff:
    def test_zero_on_self_and_scale(self):
        P = regular_polygon(5)
        assert hausdorff_distance(P, P, P.chart) < 1e-12
        Q = regular_polygon(5, radius=1.1)
        d = hausdorff_distance(P, Q, P.chart)
        assert 0.05 < d < 0.15


@settings(max_examples=25, deadline=None)
@given(
    x=st.floats(0.05, 0.95),
    y=st.floats(1.05, 8.0),
)
def test_rho_preserves_half_strip(x, y):
    # rho maps the pentagon chart into itself (Z/5 on the moduli strip)
    try:
        P = NormalizedPolygon(
            ConvexPolygon(list(Q0) + [ProjPoint.from_chart(x, y)], chart=STANDARD_CHART)
        )
    except ConvexityViolation:
        return
    rx, ry = cycle_rho(P).free_chart_coords()[0]
    assert 0 < rx < 1 and ry > 1
