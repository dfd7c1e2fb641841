import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muralsim.compiler import (
    CompileError,
    CompileParams,
    PaintPath,
    add_lead_in_out,
    band_index,
    compile_svg,
    join_split_segments,
    order_paths,
    parse_plan,
    plan_hash,
    prune_short_paths,
    serialize_plan,
    total_travel,
)

from oracles import optimal_travel_bruteforce, optimal_travel_dp, travel_length

P = CompileParams()


def seg(a, b):
    return np.array([a, b], dtype=float)


def turn_angles_deg(pts):
    out = []
    for i in range(1, len(pts) - 1):
        d1 = pts[i] - pts[i - 1]
        d2 = pts[i + 1] - pts[i]
        c = np.dot(d1, d2) / (np.hypot(*d1) * np.hypot(*d2))
        out.append(math.degrees(math.acos(min(1.0, max(-1.0, c)))))
    return out


class TestJoinSplit:
    def test_collinear_segments_joined(self):
        out = join_split_segments([seg((0, 0), (1, 0)), seg((1, 0), (2, 0))], P)
        assert len(out) == 1
        assert np.allclose(out[0], [[0, 0], [1, 0], [2, 0]])

    def test_right_angle_split(self):
        ell = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        out = join_split_segments([ell], P)
        assert len(out) == 2
        assert np.allclose(out[0], [[0, 0], [1, 0]])
        assert np.allclose(out[1], [[1, 0], [1, 1]])

    def test_gentle_chain_stays_joined(self):
        # ten segments turning 10 degrees each
        pts = [np.zeros(2)]
        angle = 0.0
        pieces = []
        for _ in range(10):
            step = np.array([math.cos(math.radians(angle)), math.sin(math.radians(angle))])
            pieces.append(seg(pts[-1], pts[-1] + step))
            pts.append(pts[-1] + step)
            angle += 10.0
        out = join_split_segments(pieces, P)
        assert len(out) == 1
        assert all(a <= P.join_angle_max + 1e-9 for a in turn_angles_deg(out[0]))

    def test_reversed_segment_joined(self):
        # second segment stored end-to-start; join must flip it
        out = join_split_segments([seg((0, 0), (1, 0)), seg((2, 0), (1, 0))], P)
        assert len(out) == 1

    def test_near_endpoints_within_tolerance(self):
        out = join_split_segments([seg((0, 0), (1, 0)), seg((1.0005, 0), (2, 0))], P)
        assert len(out) == 1
        assert len(out[0]) == 4  # the 0.5 mm gap vertex is kept, geometry unmoved


class TestPrune:
    def test_short_isolated_removed(self):
        out = prune_short_paths([seg((0, 0), (0.02, 0))], P)
        assert out == []

    def test_long_kept(self):
        out = prune_short_paths([seg((0, 0), (1.0, 0))], P)
        assert len(out) == 1

    def test_short_piece_joined_first_survives(self):
        pieces = [seg((0, 0), (0.02, 0)), seg((0.02, 0), (0.5, 0))]
        joined = join_split_segments(pieces, P)
        out = prune_short_paths(joined, P)
        assert len(out) == 1
        assert np.isclose(out[0][-1][0] - out[0][0][0], 0.5)


class TestLeadInOut:
    def test_straight_segment_extended(self):
        path = add_lead_in_out(seg((0, 0), (1, 0)), P, "outline", 0)
        assert np.allclose(path.points[0], [-0.3, 0.0])
        assert np.allclose(path.points[-1], [1.3, 0.0])
        s0, s1 = path.drawing_interval
        assert np.isclose(s0, 0.3) and np.isclose(s1, path.length - 0.3)
        assert np.allclose(path.point_at(s0), [0, 0])
        assert np.allclose(path.point_at(s1), [1, 0])

    def test_zero_extension_identity(self):
        params = CompileParams(extension_len=0.0)
        path = add_lead_in_out(seg((0, 0), (1, 0)), params, "outline", 0)
        assert np.allclose(path.points, [[0, 0], [1, 0]])
        assert path.lead_in_len == 0.0 and path.lead_out_len == 0.0

    def test_arc_lead_out_follows_end_tangent(self):
        # quarter arc from (1,0) to (0,1); end tangent approaches (-1, 0)...
        # use one ending with tangent (0,1): arc from (0,-1) to (1,0) rotated
        theta = np.linspace(-np.pi / 2, 0.0, 50)
        arc = np.column_stack([np.cos(theta), np.sin(theta)])  # ends at (1, 0), tangent (0, 1)
        path = add_lead_in_out(arc, P, "outline", 0)
        # independent tangent estimate: finite difference of the last two arc vertices
        fd = arc[-1] - arc[-2]
        fd = fd / np.hypot(*fd)
        lead_out = path.points[-1] - path.points[-2]
        assert np.isclose(np.hypot(*lead_out), 0.30)
        assert np.allclose(lead_out / 0.30, fd, atol=1e-9)
        assert abs(fd[0]) < 0.05 and fd[1] > 0.99  # sanity: tangent is near-vertical


def make_path(a, b, pid, params=P):
    return add_lead_in_out(seg(a, b), params, "outline", pid)


class TestOrdering:
    def test_one_path_per_band(self):
        paths = [make_path((0, 2.5), (1, 2.5), 0),
                 make_path((0, 0.5), (1, 0.5), 1),
                 make_path((0, 1.5), (1, 1.5), 2)]
        plan = order_paths(paths, P, (4.0, 4.0))
        assert [p.id for p in plan.paths] == [1, 2, 0]

    def test_greedy_picks_near_neighbor(self):
        a = make_path((0.0, 0.1), (1.0, 0.1), 0)
        near = make_path((1.1, 0.2), (2.0, 0.2), 1)
        far = make_path((3.0, 0.2), (4.0, 0.2), 2)
        plan = order_paths([a, far, near], P, (5.0, 1.0))
        assert [p.id for p in plan.paths][:2] == [0, 1]

    def test_reversal_allowed_when_shorter(self):
        a = make_path((0.0, 0.1), (1.0, 0.1), 0)
        # entering b at its end is much closer than at its start
        b = make_path((3.0, 0.1), (1.2, 0.3), 1)
        plan = order_paths([a, b], P, (5.0, 1.0))
        second = plan.paths[1]
        assert second.id == 1
        assert np.allclose(second.drawing_points()[0], [1.2, 0.3])

    def test_band_monotone_and_not_worse_than_input(self):
        rng = np.random.default_rng(42)
        paths = []
        for i in range(12):
            a = rng.uniform(0, 3, size=2)
            b = a + rng.uniform(-0.5, 0.5, size=2)
            while np.hypot(*(b - a)) < 0.05:
                b = a + rng.uniform(-0.5, 0.5, size=2)
            paths.append(make_path(a, b, i))
        plan = order_paths(paths, P, (4.0, 4.0))
        bands = [band_index(p, P.band_height) for p in plan.paths]
        assert bands == sorted(bands)
        # compare travel against input order under the same band partition
        by_band: dict[int, list] = {}
        for p in paths:
            by_band.setdefault(band_index(p, P.band_height), []).append(p)
        input_order = [p for b in sorted(by_band) for p in by_band[b]]
        assert total_travel(plan.paths) <= total_travel(input_order) + 1e-9

    def test_dp_oracle_matches_bruteforce_small(self):
        rng = np.random.default_rng(7)
        for trial in range(3):
            endpoints = [(rng.uniform(0, 2, 2), rng.uniform(0, 2, 2)) for _ in range(5)]
            start = np.zeros(2)
            assert np.isclose(optimal_travel_dp(endpoints, start),
                              optimal_travel_bruteforce(endpoints, start), atol=1e-12)

    def test_eight_paths_within_factor_of_optimal(self):
        rng = np.random.default_rng(1234)
        paths = []
        for i in range(8):
            a = rng.uniform(0, 2, size=2) * [1.0, 0.2]  # keep all in one band
            b = a + [rng.uniform(0.2, 0.8), 0.0]
            paths.append(make_path(a, b, i))
        plan = order_paths(paths, P, (4.0, 1.0))
        greedy_travel = total_travel(plan.paths)
        endpoints = [(p.points[0], p.points[-1]) for p in paths]
        optimum = optimal_travel_dp(endpoints, np.zeros(2))
        assert greedy_travel <= 1.5 * optimum + 1e-9


SVG_FIXTURE = (
    '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 200 200">'
    '<path d="M 20 180 L 180 180"/>'
    '<rect x="40" y="40" width="60" height="60"/>'
    "</svg>"
)


class TestCompilePipeline:
    def test_deterministic_byte_identical(self):
        p1 = compile_svg(SVG_FIXTURE, P)
        p2 = compile_svg(SVG_FIXTURE, P)
        assert serialize_plan(p1) == serialize_plan(p2)

    def test_plan_roundtrip(self):
        plan = compile_svg(SVG_FIXTURE, P)
        text = serialize_plan(plan)
        back = parse_plan(text)
        assert serialize_plan(back) == text
        assert plan_hash(back) == plan_hash(plan)

    def test_drawing_geometry_preserved(self):
        # the drawing portions survive extension + ordering unchanged
        drawn = {}
        plan = compile_svg(SVG_FIXTURE, P)
        for p in plan.paths:
            pts = p.drawing_points()
            key = min(
                tuple(np.round(pts, 9).ravel()),
                tuple(np.round(pts[::-1], 9).ravel()),
            )
            drawn[key] = p.kind
        # the bottom line must appear exactly, at v = (200-180)*0.01 = 0.2
        line_fwd = tuple(np.round(np.array([[0.2, 0.2], [1.8, 0.2]]), 9).ravel())
        assert line_fwd in drawn

    def test_square_contour_split_into_four_sides(self):
        plan = compile_svg(SVG_FIXTURE, P)
        outlines = [p for p in plan.paths if p.kind == "outline"]
        infills = [p for p in plan.paths if p.kind == "infill"]
        # one free line + four square sides
        assert len(outlines) == 5
        # 0.6 m square at 0.02 m spacing -> 30 scanlines
        assert len(infills) == 30

    def test_empty_document_rejected(self):
        with pytest.raises(CompileError, match="no drawable"):
            compile_svg('<svg xmlns="http://www.w3.org/2000/svg" width="1" height="1"></svg>', P)

    def test_band_monotonicity_invariant(self):
        plan = compile_svg(SVG_FIXTURE, P)
        bands = [band_index(p, P.band_height) for p in plan.paths]
        assert bands == sorted(bands)


class TestPaintPath:
    def test_rejects_duplicate_vertices(self):
        with pytest.raises(CompileError):
            PaintPath(points=np.array([[0, 0], [0, 0], [1, 0]]), lead_in_len=0,
                      lead_out_len=0, kind="outline", id=0)

    def test_reversed_swaps_leads(self):
        path = add_lead_in_out(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.5]]),
                               CompileParams(extension_len=0.1), "outline", 3)
        rev = path.reversed()
        assert rev.id == path.id
        assert np.allclose(rev.points, path.points[::-1])
        fwd = path.drawing_points()
        back = rev.drawing_points()
        assert np.allclose(fwd, back[::-1])

    def test_point_and_tangent_lookup(self):
        path = PaintPath(points=np.array([[0.0, 0.0], [2.0, 0.0]]), lead_in_len=0.5,
                         lead_out_len=0.5, kind="outline", id=0)
        assert np.allclose(path.point_at(1.0), [1.0, 0.0])
        assert np.allclose(path.tangent_at(1.0), [1.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.lists(
    st.tuples(st.floats(0, 3), st.floats(0, 3), st.floats(0.1, 1.0),
              st.floats(0, 2 * math.pi)),
    min_size=1, max_size=10))
def test_ordering_band_monotone_property(specs):
    paths = []
    for i, (x, y, ln, ang) in enumerate(specs):
        a = np.array([x, y])
        b = a + ln * np.array([math.cos(ang), math.sin(ang)])
        paths.append(make_path(a, b, i))
    plan = order_paths(paths, P, (6.0, 6.0))
    bands = [band_index(p, P.band_height) for p in plan.paths]
    assert bands == sorted(bands)
    assert sorted(p.id for p in plan.paths) == list(range(len(specs)))
