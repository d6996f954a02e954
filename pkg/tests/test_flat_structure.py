"""Distance fields, ball areas, density profiles, fibers, and branch balls."""

import json
import math
import random

import pytest

from catflat.complex_core import PointLocation, parse_location
from catflat.errors import InvalidLocation, TruncationTooSmall
from catflat.flat_structure import (DistanceField, _field, _pivot_vertices,
                                    ball_area, classify_point, conicality,
                                    density_profile, detect_branch,
                                    fiber_graph, flatness_test,
                                    packing_number)
from catflat.geodesics import geodesic
from catflat.support_sets import fixture_cycles, support


@pytest.fixture(scope="module")
def plane10():
    x, c = fixture_cycles("plane", 10)
    return x, support(x, c)


@pytest.fixture(scope="module")
def tripod8():
    x, c = fixture_cycles("tripod_times_r", 8)
    return x, support(x, c)


@pytest.fixture(scope="module")
def bent8():
    x, c = fixture_cycles("bent_flat", 8)
    return x, support(x, c)


@pytest.fixture(scope="module")
def glasses8():
    x, c = fixture_cycles("glasses", 8)
    return x, support(x, c)


@pytest.fixture(scope="module")
def cone_half():
    x, c = fixture_cycles("cone_points", 0.5)
    return x, support(x, c)


def _face_pt(x, fid, cx, cy):
    return x.locate(PointLocation("face", fid, coords=(cx, cy)))


# ----------------------------------------------------------------------
# distance fields against flat models and the geodesic engine


def test_plane_field_is_exact_euclidean(plane10):
    x, _ = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    f = _field(x, p, 6.0)
    assert f.frontier_clearance() == pytest.approx(4.5, abs=1e-9)
    rng = random.Random(3)
    for _ in range(200):
        i, j = rng.randrange(10), rng.randrange(10)
        cx, cy = rng.random(), rng.random()
        want = math.hypot(i + cx - 4.5, j + cy - 4.5)
        lb, ub = f.bounds(f"f{i}_{j}", (cx, cy))
        if want <= 6.0:
            assert lb == pytest.approx(want, abs=1e-9)
            assert ub == pytest.approx(want, abs=1e-9)
        else:
            # bounds may be loose past rmax but must still bracket
            assert lb <= want + 1e-9
            assert ub >= want - 1e-9


def test_tripod_field_matches_sheet_model(tripod8):
    x, _ = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    f = _field(x, p, 5.0)
    assert f.frontier_clearance() == pytest.approx(3.5, abs=1e-9)
    rng = random.Random(5)
    for _ in range(120):
        s = rng.randrange(3)
        i, j = rng.randrange(8), rng.randrange(8)
        cx, cy = rng.random(), rng.random()
        want = math.hypot(i + cx, j + cy - 4.5)
        lb, ub = f.bounds(f"s{s}f{i}_{j}", (cx, cy))
        if want <= 5.0:
            assert lb == pytest.approx(want, abs=1e-9)
            assert ub == pytest.approx(want, abs=1e-9)
        else:
            assert lb <= want + 1e-9
            assert ub >= want - 1e-9


def test_flat_sheets_unfold_across_the_gluing_line():
    for name in ("bent_flat", "two_planes_glued"):
        x, c = fixture_cycles(name, 8)
        assert _pivot_vertices(x) == []
        p = _face_pt(x, "s0f2_4", 0.5, 0.5)
        f = _field(x, p, 6.0)
        # perpendicular legs add up across the line, the along coordinate is shared
        want = math.hypot(2.5 + 1.3, 4.5 - 2.7)
        lb, ub = f.bounds("s1f1_2", (0.3, 0.7))
        assert lb == pytest.approx(want, abs=1e-9)
        assert ub == pytest.approx(want, abs=1e-9)
        g = geodesic(x, p, _face_pt(x, "s1f1_2", 0.3, 0.7))
        assert g.length == pytest.approx(want, abs=1e-9)


def test_cone_wedge_shadow_bends_at_the_apex(cone_half):
    x, _ = cone_half
    assert _pivot_vertices(x) == ["v10_10"]
    p = x.locate(PointLocation("vertex", "v8_10"))
    f = _field(x, p, 5.0)
    # the inserted wedge sits in the apex shadow: d = d(p, apex) + rho exactly
    for rho, phi in ((0.8, 0.25), (0.9, 0.1), (0.5, 0.4)):
        y = (rho * math.cos(phi), rho * math.sin(phi))
        lb, ub = f.bounds("w0a", y)
        assert lb == pytest.approx(2.0 + rho, abs=1e-9)
        assert ub == pytest.approx(2.0 + rho, abs=1e-9)
        g = geodesic(x, p, x.locate(PointLocation("face", "w0a", coords=y)))
        assert g.length == pytest.approx(2.0 + rho, abs=1e-9)
    # off-shadow point: straight route wins, engine and field agree
    lb, ub = f.bounds("f11_9", (0.94, 0.505))
    g = geodesic(x, p, _face_pt(x, "f11_9", 0.94, 0.505))
    assert lb == pytest.approx(g.length, abs=1e-9)
    assert ub == pytest.approx(g.length, abs=1e-9)
    assert g.length == pytest.approx(3.970972803, abs=1e-8)


def test_glasses_cross_disk_routes(glasses8):
    x, _ = glasses8
    assert _pivot_vertices(x) == ["o"]
    p = _face_pt(x, "g1t0", 3.0, 1.0)
    f = _field(x, p, 8.0)
    # nearest frontier is the rim chord of the sector holding p
    ang = math.atan2(1.0, 3.0)
    chord_dist = 10.0 * math.cos(math.pi / 8) \
        - math.sqrt(10.0) * math.cos(math.pi / 8 - ang)
    assert f.frontier_clearance() == pytest.approx(chord_dist, abs=1e-9)
    # symmetric pair near the joining wedge: unfolds straight through it
    want = math.sqrt(20.0 - 20.0 * math.cos(2 * ang + 1.0))
    lb, ub = f.bounds("g2t0", (3.0, 1.0))
    assert lb == pytest.approx(want, abs=1e-9)
    assert ub == pytest.approx(want, abs=1e-9)
    assert geodesic(x, p, _face_pt(x, "g2t0", 3.0, 1.0)).length == \
        pytest.approx(want, abs=1e-9)
    # far side of the other disk: the route bends at the shared apex
    y2 = (4.0 * math.cos(0.6), 4.0 * math.sin(0.6))
    want2 = math.sqrt(10.0) + 4.0
    lb2, ub2 = f.bounds("g2t3", y2)
    assert lb2 == pytest.approx(want2, abs=1e-9)
    assert ub2 == pytest.approx(want2, abs=1e-9)
    g2 = geodesic(x, p, x.locate(PointLocation("face", "g2t3", coords=y2)))
    assert g2.length == pytest.approx(want2, abs=1e-9)


def test_faces_beyond_rmax_have_no_terms(plane10):
    x, _ = plane10
    p = _face_pt(x, "f0_0", 0.5, 0.5)
    f = DistanceField(x, p, 2.0)
    assert "f9_9" not in f.terms
    lb, ub = f.bounds("f9_9", (0.5, 0.5))
    assert lb == 2.0 and math.isinf(ub)


# ----------------------------------------------------------------------
# ball areas


def test_plane_ball_area_nine_pi(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    a = ball_area(x, S, p, 3.0)
    assert abs(a.value - 9 * math.pi) <= a.error + 1e-12
    assert a.error < 0.15


def test_cone_apex_ball_area_closed_form(cone_half):
    x, S = cone_half
    p = x.locate(PointLocation("vertex", "v10_10"))
    a = ball_area(x, S, p, 2.0)
    # cone of total angle 2 pi + 1/2: area (2 pi + 1/2) r^2 / 2
    assert abs(a.value - (2 * math.pi + 0.5) * 2.0) <= a.error + 1e-12


def test_glasses_disk_ball_area(glasses8):
    x, S = glasses8
    p = _face_pt(x, "g1t1", 4.0, 1.5)
    a = ball_area(x, S, p, 3.0, tol=0.05)
    assert abs(a.value - 9 * math.pi) <= a.error + 1e-12


def test_spoke_midpoint_ball_matches_monte_carlo(glasses8):
    # the joining wedge is outside the support, so the spoke midpoint is a
    # flat point of S and a small ball has area pi r^2
    x, S = glasses8
    p = x.locate(PointLocation("edge", "g1s0", param=0.5))
    a = ball_area(x, S, p, 1.0, tol=0.05)
    assert abs(a.value - math.pi) <= a.error + 1e-12

    f = _field(x, p, 4.0)
    rng = random.Random(7)
    est = 0.0
    n = 25000
    for fid in ("g1t0", "g1t7"):
        (axx, ay), (bx, by), (cx, cy) = x.faces[fid].chart
        area = 0.5 * abs((bx - axx) * (cy - ay) - (cx - axx) * (by - ay))
        hit = 0
        for _ in range(n):
            su = math.sqrt(rng.random())
            v = rng.random()
            q = (axx + su * ((bx - axx) + v * (cx - bx)),
                 ay + su * ((by - ay) + v * (cy - by)))
            if f.value(fid, q) <= 1.0:
                hit += 1
        est += area * hit / n
    assert abs(est - a.value) < 0.25


# ----------------------------------------------------------------------
# density profiles


def test_plane_density_is_flat(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    prof = density_profile(x, S, p, [1.0, 2.0, 4.0])
    for v, e in zip(prof.ratios, prof.ratio_errors):
        assert abs(v - math.pi) <= e + 1e-12
    assert prof.monotone and prof.in_support
    assert prof.lower_bound_ok and prof.flat_equality
    assert prof.trend == "stable"
    data = prof.to_data()
    assert json.dumps(data) == json.dumps(density_profile(
        x, S, p, [1.0, 2.0, 4.0]).to_data())


def test_tripod_line_density_three_half_pi(tripod8):
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    prof = density_profile(x, S, p, [1.0, 2.0])
    for v, e in zip(prof.ratios, prof.ratio_errors):
        assert abs(v - 1.5 * math.pi) <= e + 1e-12
    assert prof.monotone and prof.lower_bound_ok
    assert not prof.flat_equality


def test_cone_apex_density_exceeds_pi():
    x, c = fixture_cycles("cone_points", 0.1)
    S = support(x, c)
    p = x.locate(PointLocation("vertex", "v10_10"))
    prof = density_profile(x, S, p, [1.0, 2.0, 4.0])
    for v, e in zip(prof.ratios, prof.ratio_errors):
        assert abs(v - (math.pi + 0.05)) <= e + 1e-12
    assert prof.monotone and prof.lower_bound_ok
    assert not prof.flat_equality


def test_density_rejects_bad_radii(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    with pytest.raises(ValueError):
        density_profile(x, S, p, [2.0, 1.0])
    with pytest.raises(ValueError):
        density_profile(x, S, p, [])
    with pytest.raises(ValueError):
        density_profile(x, S, p, [-1.0, 1.0])


# ----------------------------------------------------------------------
# pointwise classification


def test_classify_plane_points_flat(plane10):
    x, S = plane10
    assert classify_point(x, S, _face_pt(x, "f4_4", 0.5, 0.5)).kind == "flat"
    assert classify_point(
        x, S, PointLocation("edge", "u5_5", param=0.5)).kind == "flat"
    assert classify_point(x, S, PointLocation("vertex", "v5_5")).kind == "flat"


def test_classify_singular_line(tripod8):
    x, S = tripod8
    pc = classify_point(x, S, PointLocation("edge", "ell4", param=0.5))
    assert (pc.kind, pc.valence) == ("singular_line", 3)
    pcv = classify_point(x, S, PointLocation("vertex", "L4"))
    assert (pcv.kind, pcv.valence) == ("singular_line", 3)


def test_classify_cone_apex_vertex_like(cone_half):
    x, S = cone_half
    pc = classify_point(x, S, PointLocation("vertex", "v10_10"))
    assert pc.kind == "vertex_like" and pc.valence is None
    assert pc.snapshot["total_length"] > 2 * math.pi


def test_classify_bent_line_is_flat(bent8):
    # isometrically bent sheets: the line looks singular in the embedding
    # but its support link is a 2 pi circle
    x, S = bent8
    assert classify_point(
        x, S, PointLocation("edge", "ell4", param=0.5)).kind == "flat"


def test_classify_respects_the_support(glasses8):
    # the spoke carries three sheets in the complex but only two in S
    x, S = glasses8
    assert classify_point(
        x, S, PointLocation("edge", "g1s0", param=0.5)).kind == "flat"


def test_classify_frontier_and_outside(plane10):
    x, S = plane10
    assert classify_point(
        x, S, PointLocation("vertex", "v0_0")).kind == "frontier_censored"
    with pytest.raises(InvalidLocation):
        xg, cg = fixture_cycles("glasses", 8)
        classify_point(xg, support(xg, cg),
                       PointLocation("face", "gbw", coords=(5.0, 0.1)))


# ----------------------------------------------------------------------
# fibers of the distance function


def test_plane_fibers_are_circles(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    for r in (2.5, 2.3):
        g, rep = fiber_graph(x, S, p, r)
        assert rep["circle"] and rep["components"] == 1
        assert rep["valences"] == {"2": 16}
        assert rep["branch_nodes"] == []
        assert rep["total_length"] == pytest.approx(2 * math.pi * r, abs=0.01)
        for brief in rep["node_points"].values():
            parse_location(brief)     # every node names a real location


def test_tripod_line_fiber_is_a_theta_graph(tripod8):
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    g, rep = fiber_graph(x, S, p, 2.2)
    assert rep["valences"] == {"2": 24, "3": 2}
    assert rep["components"] == 1 and not rep["circle"]
    assert rep["branch_nodes"] == ["x:ell2:0", "x:ell6:0"]
    # line crossings sit at offsets +-2.2 from line coordinate 4.5
    lo = parse_location(rep["node_points"]["x:ell2:0"])
    hi = parse_location(rep["node_points"]["x:ell6:0"])
    assert (lo.id, hi.id) == ("ell2", "ell6")
    assert lo.param == pytest.approx(0.3, abs=1e-6)
    assert hi.param == pytest.approx(0.7, abs=1e-6)


def test_tripod_fiber_through_line_vertices(tripod8):
    # radius chosen so the fiber meets the line exactly at vertices
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    g, rep = fiber_graph(x, S, p, 2.5)
    assert rep["valences"] == {"2": 18, "3": 2}
    assert rep["branch_nodes"] == ["xv:L2", "xv:L7"]
    assert rep["components"] == 1


def test_tripod_off_line_fibers(tripod8):
    x, S = tripod8
    p = _face_pt(x, "s0f2_4", 0.5, 0.5)
    g1, rep1 = fiber_graph(x, S, p, 1.2)
    assert rep1["circle"] and rep1["valences"] == {"2": 8}
    g2, rep2 = fiber_graph(x, S, p, 3.3)
    assert rep2["valences"] == {"2": 26, "3": 2}
    assert rep2["components"] == 1
    assert rep2["branch_nodes"] == ["x:ell2:0", "x:ell6:0"]


def test_bent_flat_line_fiber_is_a_circle(bent8):
    x, S = bent8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    g, rep = fiber_graph(x, S, p, 2.2)
    assert rep["circle"] and rep["valences"] == {"2": 18}


def test_fiber_report_is_deterministic(tripod8):
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    _, rep1 = fiber_graph(x, S, p, 2.2)
    _, rep2 = fiber_graph(x, S, p, 2.2)
    assert json.dumps(rep1, sort_keys=True) == json.dumps(rep2, sort_keys=True)


# ----------------------------------------------------------------------
# branch certificates


def test_tripod_branch_certificate(tripod8):
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    cert = detect_branch(x, S, p, 0.6, 1.2)
    assert cert is not None
    assert cert.valence == 3 and cert.radius == 1.2
    assert cert.center == "e:ell2:0.4"
    assert len(cert.sheets) == 3
    assert cert.line_ends == ["e:ell1:0.2", "e:ell3:0.6"]
    assert cert.max_model_error <= 1e-9
    assert all(cert.checks.values())
    data = cert.to_data()
    assert json.dumps(data, sort_keys=True) == json.dumps(
        detect_branch(x, S, p, 0.6, 1.2).to_data(), sort_keys=True)


def test_no_branch_on_flat_fixtures(plane10, bent8):
    x, S = plane10
    assert detect_branch(x, S, _face_pt(x, "f4_4", 0.5, 0.5), 0.6, 1.2) is None
    xb, Sb = bent8
    pb = xb.locate(PointLocation("edge", "ell4", param=0.5))
    assert detect_branch(xb, Sb, pb, 0.6, 1.2) is None


def test_branch_rejects_bad_arguments(tripod8):
    x, S = tripod8
    p = x.locate(PointLocation("edge", "ell4", param=0.5))
    with pytest.raises(ValueError):
        detect_branch(x, S, p, 0.6, 0.0)
    with pytest.raises(ValueError):
        detect_branch(x, S, p, -0.5, 1.0)


# ----------------------------------------------------------------------
# conicality


def test_conicality_matches_the_flat_angle(tripod8):
    x, S = tripod8
    p = _face_pt(x, "s0f1_4", 0.5, 0.5)      # height 1.5 over line coord 4.5
    got = []
    for t in (2.0, 3.0, 4.0):
        yc = 4.5 - t
        at = x.locate(PointLocation("edge", f"ell{int(yc)}",
                                    param=yc - int(yc)))
        val = conicality(x, S, p, at)
        assert val == pytest.approx(math.atan2(1.5, t), abs=1e-9)
        got.append(val)
    assert got == sorted(got, reverse=True)   # shallower with distance


def test_conicality_flat_point_zero(tripod8):
    x, S = tripod8
    p = _face_pt(x, "s0f1_4", 0.5, 0.5)
    assert conicality(x, S, p, _face_pt(x, "s0f2_2", 0.5, 0.5)) == 0.0


def test_conicality_invalid_inputs(tripod8, cone_half):
    x, S = tripod8
    p = _face_pt(x, "s0f1_4", 0.5, 0.5)
    with pytest.raises(InvalidLocation):
        conicality(x, S, p, p)
    xc, Sc = cone_half
    with pytest.raises(InvalidLocation):
        conicality(xc, Sc, _face_pt(xc, "f5_5", 0.5, 0.5),
                   PointLocation("vertex", "v10_10"))


# ----------------------------------------------------------------------
# packing and the combined flatness verdict


def test_plane_packing_count(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    n = packing_number(x, S, p, 2.0, 0.5)
    assert n == 10
    assert packing_number(x, S, p, 2.0, 0.5) == n
    with pytest.raises(ValueError):
        packing_number(x, S, p, 2.0, -0.1)


def test_flatness_verdicts(plane10, tripod8):
    x, S = plane10
    out = flatness_test(x, S, _face_pt(x, "f4_4", 0.5, 0.5),
                        radii=[1.0, 2.0])
    assert out["verdict"] == "flat" and out["witness"] is None
    assert out["points_checked"] > 10
    xt, St = tripod8
    outt = flatness_test(xt, St,
                         xt.locate(PointLocation("edge", "ell4", param=0.5)),
                         radii=[1.0, 2.0])
    assert outt["verdict"] == "non_flat"
    assert outt["witness"] == {"point": "e:ell4:0.5",
                               "class": "singular_line", "valence": 3}


# ----------------------------------------------------------------------
# truncation guards


def test_truncation_guards(plane10):
    x, S = plane10
    p = _face_pt(x, "f4_4", 0.5, 0.5)
    with pytest.raises(TruncationTooSmall):
        ball_area(x, S, p, 5.0)
    with pytest.raises(ValueError):
        ball_area(x, S, p, -1.0)
    with pytest.raises(TruncationTooSmall):
        fiber_graph(x, S, p, 5.0)
    with pytest.raises(ValueError):
        fiber_graph(x, S, p, 0.0)
    with pytest.raises(TruncationTooSmall):
        packing_number(x, S, p, 5.0, 0.5)
