import math

import numpy as np
import pytest

from rotbox.errors import DegenerateInputError, InvalidBoxError, InvalidPolygonError
from rotbox.geometry import (
    Convention,
    Quad,
    RBox,
    canonicalize,
    convert_convention,
    convex_hull,
    convex_intersection_area,
    iou_matrix,
    is_canonical,
    polygon_area,
    quad_to_rbox,
    rbox_to_quad,
    rotated_iou,
)

from oracles import brute_min_area_rect, random_canonical_box, rasterized_iou

OC, LE = Convention.OC, Convention.LE


def corner_set_distance(a: RBox, b: RBox) -> float:
    """Max over corners of a of the distance to the nearest corner of b."""
    ca, cb = a.corners(), b.corners()
    d = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class TestRBoxValidation:
    def test_rejects_nonpositive_sides(self):
        with pytest.raises(InvalidBoxError):
            RBox(0, 0, 0.0, 1, 0, LE)
        with pytest.raises(InvalidBoxError):
            RBox(0, 0, 1, -2, 0, LE)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidBoxError):
            RBox(0, 0, 1, 1, math.nan, LE)
        with pytest.raises(InvalidBoxError):
            RBox(math.inf, 0, 1, 1, 0, OC)

    def test_rejects_below_min_side(self):
        with pytest.raises(InvalidBoxError):
            RBox(0, 0, 1e-9, 1, 0, LE)


class TestCanonicalize:
    def test_le_90_wraps_to_minus_90(self):
        b = canonicalize(RBox(0, 0, 4, 2, 90, LE))
        assert (b.w, b.h, b.theta) == (4, 2, -90.0)

    def test_oc_already_canonical_unchanged(self):
        b = canonicalize(RBox(0, 0, 4, 2, -45, OC))
        assert (b.w, b.h, b.theta) == (4, 2, -45)

    def test_oc_axis_aligned_goes_to_minus_90(self):
        b = canonicalize(RBox(0, 0, 4, 2, 0, OC))
        assert (b.w, b.h, b.theta) == (2, 4, -90.0)
        assert corner_set_distance(b, RBox(0, 0, 4, 2, 0, OC)) < 1e-9

    def test_le_square_tie_break(self):
        b = canonicalize(RBox(0, 0, 2, 2, 30, LE))
        assert -90.0 <= b.theta < 0.0

    def test_idempotent_on_random_boxes(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            conv = OC if rng.random() < 0.5 else LE
            raw = RBox(
                rng.uniform(-10, 10), rng.uniform(-10, 10),
                rng.uniform(0.5, 9), rng.uniform(0.5, 9),
                rng.uniform(-720, 720), conv,
            )
            c1 = canonicalize(raw)
            assert is_canonical(c1)
            assert canonicalize(c1) == c1
            assert corner_set_distance(raw, c1) < 1e-9

    def test_wrap_edge_values(self):
        for theta in (-90.0, 89.999999999999986, -1e-18, 180.0, -270.0):
            for conv in (OC, LE):
                b = canonicalize(RBox(0, 0, 3, 3, theta, conv))
                assert canonicalize(b) == b
                assert is_canonical(b)


class TestConvertConvention:
    def test_oc_to_le_swaps_short_first(self):
        b = convert_convention(RBox(0, 0, 2, 4, -30, OC), LE)
        assert (b.w, b.h, b.theta, b.convention) == (4, 2, 60.0, LE)

    def test_oc_to_le_keeps_long_first(self):
        b = convert_convention(RBox(0, 0, 4, 2, -30, OC), LE)
        assert (b.w, b.h, b.theta, b.convention) == (4, 2, -30, LE)

    def test_round_trip_identity_on_canonical_boxes(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            b = random_canonical_box(rng, LE)
            assert convert_convention(convert_convention(b, OC), LE) == b
            o = random_canonical_box(rng, OC)
            assert convert_convention(convert_convention(o, LE), OC) == o

    def test_conversion_preserves_geometry(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            b = random_canonical_box(rng, OC)
            assert corner_set_distance(b, convert_convention(b, LE)) < 1e-9


class TestRboxToQuad:
    def test_axis_aligned(self):
        q = rbox_to_quad(RBox(0, 0, 4, 2, 0, LE))
        assert q.vertices == ((-2.0, -1.0), (2.0, -1.0), (2.0, 1.0), (-2.0, 1.0))

    def test_rotated_90_swaps_extents(self):
        q = rbox_to_quad(RBox(0, 0, 4, 2, -90, LE)).array()
        want = np.asarray([(-1, -2), (1, -2), (1, 2), (-1, 2)], dtype=float)
        d = np.linalg.norm(q[:, None, :] - want[None, :, :], axis=2)
        assert d.min(axis=1).max() < 1e-12

    def test_45_degrees_matches_rotation_matrix(self):
        q = rbox_to_quad(canonicalize(RBox(0, 0, 4, 2, 45, LE)))
        t = math.radians(45)
        expected = []
        for dx, dy in ((-2, -1), (2, -1), (2, 1), (-2, 1)):
            expected.append((dx * math.cos(t) - dy * math.sin(t), dx * math.sin(t) + dy * math.cos(t)))
        got = np.asarray(sorted(q.vertices))
        assert np.allclose(got, np.asarray(sorted(expected)), atol=1e-12)

    def test_quad_is_canonical(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = rbox_to_quad(random_canonical_box(rng))
            assert polygon_area(q.vertices) > 0
            assert q.vertices[0] == min(q.vertices)
            assert Quad(q.vertices) == q


class TestQuadToRbox:
    def test_rectangle_round_trip(self):
        src = canonicalize(RBox(3, 4, 5, 2, 30, LE))
        rec = quad_to_rbox(rbox_to_quad(src), LE)
        assert corner_set_distance(src, rec) < 1e-9
        assert abs(rec.theta - 30) < 1e-9

    def test_spec_example_quad(self):
        r = quad_to_rbox(Quad(((0, 0), (2, 0), (2, 1), (0, 2))), OC)
        assert (r.cx, r.cy, r.w, r.h, r.theta) == (1.0, 1.0, 2.0, 2.0, -90.0)
        assert abs(r.area - 4.0) < 1e-12

    def test_duplicated_vertex_uses_triangle_hull(self):
        r = quad_to_rbox(Quad(((0, 0), (0, 0), (1, 0), (1, 1))), OC)
        oracle = brute_min_area_rect(((0, 0), (0, 0), (1, 0), (1, 1)), OC)
        assert r == oracle
        assert abs(r.area - 1.0) < 1e-9

    def test_degenerate_hull_rejected(self):
        with pytest.raises(DegenerateInputError):
            quad_to_rbox(Quad(((0, 0), (1, 1), (2, 2), (3, 3))))

    def test_matches_brute_force_on_random_quads(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            q = rbox_to_quad(random_canonical_box(rng))
            jitter = rng.normal(0, 0.4, (4, 2))
            verts = tuple(map(tuple, q.array() + jitter))
            quad = Quad(verts)
            got = quad_to_rbox(quad, LE)
            want = brute_min_area_rect(verts, LE)
            assert abs(got.theta - want.theta) < 1e-9
            assert abs(got.area - want.area) < 1e-9 * max(1.0, want.area)
            assert polygon_area(convex_hull(verts)) <= got.area + 1e-9


class TestConvexIntersectionArea:
    def unit_square(self, cx=0.0, cy=0.0):
        return rbox_to_quad(RBox(cx, cy, 1, 1, -90, OC))

    def test_identical_squares(self):
        a = self.unit_square()
        assert convex_intersection_area(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_squares(self):
        assert convex_intersection_area(self.unit_square(), self.unit_square(5, 0)) == 0.0

    def test_square_vs_rotated_45(self):
        b = rbox_to_quad(RBox(0, 0, 1, 1, -45, OC))
        assert convex_intersection_area(self.unit_square(), b) == pytest.approx(
            2 * math.sqrt(2) - 2, abs=1e-12
        )

    def test_non_convex_rejected(self):
        with pytest.raises(InvalidPolygonError):
            convex_intersection_area(
                Quad(((0, 0), (2, 0), (0.5, 0.5), (0, 2))), self.unit_square()
            )

    def test_degenerate_rejected(self):
        with pytest.raises(InvalidPolygonError):
            convex_intersection_area(
                Quad(((0, 0), (1, 0), (2, 0), (3, 0))), self.unit_square()
            )


class TestRotatedIou:
    def test_identical(self):
        b = RBox(3, -2, 5, 2, -37, OC)
        assert rotated_iou(b, b) == pytest.approx(1.0, abs=1e-12)

    def test_square_vs_rotated_45(self):
        a = RBox(0, 0, 1, 1, -90, OC)
        b = RBox(0, 0, 1, 1, -45, OC)
        expected = (2 * math.sqrt(2) - 2) / (4 - 2 * math.sqrt(2))
        assert rotated_iou(a, b) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_axis_aligned_cross(self):
        assert rotated_iou(RBox(0, 0, 4, 2, 0, LE), RBox(0, 0, 2, 4, 0, LE)) == pytest.approx(
            1 / 3, abs=1e-12
        )

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            a, b = random_canonical_box(rng), random_canonical_box(rng)
            assert abs(rotated_iou(a, b) - rotated_iou(b, a)) <= 1e-12

    def test_rigid_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            a, b = random_canonical_box(rng), random_canonical_box(rng)
            base = rotated_iou(a, b)
            ang = float(rng.uniform(-180, 180))
            tx, ty = rng.uniform(-30, 30, 2)
            t = math.radians(ang)

            def moved(box):
                cx = box.cx * math.cos(t) - box.cy * math.sin(t) + tx
                cy = box.cx * math.sin(t) + box.cy * math.cos(t) + ty
                return RBox(cx, cy, box.w, box.h, box.theta + ang, box.convention)

            assert abs(rotated_iou(moved(a), moved(b)) - base) <= 1e-9

    def test_range_and_equality_condition(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            a, b = random_canonical_box(rng), random_canonical_box(rng)
            v = rotated_iou(a, b)
            assert 0.0 <= v <= 1.0
            if v > 1.0 - 1e-9:
                assert corner_set_distance(a, b) < 1e-6

    def test_matches_rasterization_sample(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            a = random_canonical_box(rng, center=15, lo=15, hi=45)
            b = random_canonical_box(rng, center=15, lo=15, hi=45)
            assert abs(rotated_iou(a, b) - rasterized_iou(a.corners(), b.corners())) <= 1e-3

    def test_accepts_quads_and_boxes_mixed(self):
        b = RBox(0, 0, 2, 1, -30, OC)
        assert rotated_iou(b, rbox_to_quad(b)) == pytest.approx(1.0, abs=1e-12)


class TestIouMatrix:
    def test_empty(self):
        assert iou_matrix([], []).shape == (0, 0)
        assert iou_matrix([RBox(0, 0, 1, 1, -90, OC)], []).shape == (1, 0)

    def test_single_self(self):
        b = RBox(0, 0, 1, 1, -90, OC)
        assert np.allclose(iou_matrix([b], [b]), [[1.0]], atol=1e-12)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(9)
        boxes_a = [random_canonical_box(rng) for _ in range(50)]
        boxes_b = [random_canonical_box(rng) for _ in range(60)]
        m = iou_matrix(boxes_a, boxes_b)
        for i in range(50):
            for j in range(60):
                assert abs(m[i, j] - rotated_iou(boxes_a[i], boxes_b[j])) <= 1e-12


def test_intersection_matches_shapely_when_available():
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import Polygon

    rng = np.random.default_rng(10)
    for _ in range(200):
        a = random_canonical_box(rng)
        b = random_canonical_box(rng)
        qa, qb = rbox_to_quad(a), rbox_to_quad(b)
        ours = convex_intersection_area(qa, qb)
        theirs = Polygon(qa.vertices).intersection(Polygon(qb.vertices)).area
        assert ours == pytest.approx(theirs, abs=1e-9)
