"""Half-plane regions, maximal half-grids, and support decompositions."""

import json
import math

import pytest

from catflat.complex_core import PointLocation
from catflat.errors import CatflatError, NotSquareComplex, TruncationTooSmall
from catflat.geodesics import _sub_ids
from catflat.link_graphs import GraphPoint, link_at
from catflat.square_halfplanes import (Semicircle, decompose,
                                       maximal_halfplane_subcomplex,
                                       semicircle_centered,
                                       semicircle_halfplane)
from catflat.support_sets import fixture_cycles, support

PI = math.pi
SEC8 = 1.0 / math.cos(PI / 8.0)


@pytest.fixture(scope="module")
def plane20():
    x, c = fixture_cycles("plane", 20)
    return x, support(x, c)


@pytest.fixture(scope="module")
def plane10():
    x, c = fixture_cycles("plane", 10)
    return x, support(x, c)


@pytest.fixture(scope="module")
def tripod12():
    x, c = fixture_cycles("tripod_times_r", 12)
    return x, support(x, c)


@pytest.fixture(scope="module")
def bent12():
    x, c = fixture_cycles("bent_flat", 12)
    return x, support(x, c)


def _slink(x, S, loc):
    sfaces, sedges = _sub_ids(x, S)
    link = link_at(x, loc)
    return link.graph.restrict(link.subgraph_for(sfaces, sedges))


@pytest.fixture(scope="module")
def plane20_decomposition(plane20):
    x, S = plane20
    return decompose(x, S, PointLocation("vertex", "v10_10"), r2=3.0)


@pytest.fixture(scope="module")
def tripod12_decomposition(tripod12):
    x, S = tripod12
    return decompose(x, S, PointLocation("edge", "ell6", param=0.5), r2=3.0)


# ----------------------------------------------------------------------
# semicircles


def test_semicircle_walk_around_a_flat_vertex(plane20):
    x, S = plane20
    g = _slink(x, S, PointLocation("vertex", "v13_10"))
    tau = semicircle_centered(g, GraphPoint("v", "d:h12_10:1"))
    assert tau.start.brief() == "d:u13_10:0"
    assert tau.end.brief() == "d:u13_9:1"
    assert tau.path == ("c:f12_10:1", "c:f12_9:2")
    assert tau.s0 == 0.0
    mid = tau.point_at(g, PI / 2)
    assert mid.brief() == "d:h12_10:1"
    q = tau.point_at(g, PI / 4)
    assert q.kind == "e" and q.id == "c:f12_10:1"
    assert q.s == pytest.approx(PI / 4, abs=1e-12)


def test_semicircle_center_must_be_a_two_arc_vertex(plane20, tripod12):
    x, S = plane20
    g = _slink(x, S, PointLocation("vertex", "v13_10"))
    with pytest.raises(CatflatError):
        semicircle_centered(g, GraphPoint("e", "c:f12_10:1", 0.3))
    xt, St = tripod12
    gt = _slink(xt, St, PointLocation("vertex", "L9"))
    poles = [v for v in sorted(gt.adj) if len(gt.adj[v]) == 3]
    assert len(poles) == 2
    with pytest.raises(CatflatError, match="3 arcs|incident"):
        semicircle_centered(gt, GraphPoint("v", poles[0]))


def test_semicircle_validation_rejects_foreign_chain(plane20):
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    bad = Semicircle("v:v13_10", GraphPoint("v", "d:u13_10:0"),
                     GraphPoint("v", "d:u13_9:1"), (("nope", 0),), 0.0)
    with pytest.raises(CatflatError):
        semicircle_halfplane(x, S, loc, bad, PI / 16)


# ----------------------------------------------------------------------
# flowing out to a region


def test_region_parameter_domains(plane20):
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "d:h13_10:0"))
    with pytest.raises(ValueError):
        semicircle_halfplane(x, S, loc, tau, PI / 4)
    with pytest.raises(ValueError):
        semicircle_halfplane(x, S, loc, tau, 0.0)
    with pytest.raises(ValueError):
        semicircle_halfplane(x, S, loc, tau, PI / 16, n_rays=2)


def test_region_is_flat_with_exact_ray_lengths(plane20):
    """Rays from (13,10) facing +x in a 20-grid stop at the frontier; the
    exit lengths follow from the direction angles alone."""
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "d:h13_10:0"))
    reg = semicircle_halfplane(x, S, loc, tau, PI / 16,
                               avoid=PointLocation("vertex", "v10_10"),
                               avoid_radius=3 * math.sin(PI / 16))
    assert reg.ok
    assert len(reg.rays) == 9
    assert all(reg.certificate["truncated"])
    for t, ray in zip(reg.ts, reg.rays):
        ux, uy = math.sin(t), math.cos(t)  # t = 0 points along +y
        want = min(7.0 / ux if ux > 1e-12 else math.inf,
                   10.0 / abs(uy) if abs(uy) > 1e-12 else math.inf)
        assert ray.length == pytest.approx(want, abs=1e-9)
    assert reg.certificate["alpha_gap"] == pytest.approx(PI / 2, abs=1e-9)
    assert reg.certificate["max_model_error"] <= 1e-9
    assert reg.certificate["worst_margin"] >= -1e-9


def test_region_toward_the_center_is_rejected(plane20):
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "d:h12_10:1"))
    with pytest.raises(CatflatError, match="alpha"):
        semicircle_halfplane(x, S, loc, tau, PI / 16,
                             avoid=PointLocation("vertex", "v10_10"),
                             avoid_radius=0.5)


def test_ray_crossing_a_branch_line_is_ambiguous(tripod12):
    """A semicircle whose rays run into the three-sheet line cannot extend
    uniquely through it."""
    x, S = tripod12
    loc = PointLocation("vertex", "s0v3_6")
    g = _slink(x, S, loc)
    # the direction pointing at the line: distance 3 to it along the sheet
    toward = "d:s0h2_6:1"
    assert toward in g.adj
    tau = semicircle_centered(g, GraphPoint("v", toward))
    with pytest.raises(CatflatError, match="not unique"):
        semicircle_halfplane(x, S, loc, tau, PI / 16)


# ----------------------------------------------------------------------
# maximal half-grids


def test_halfgrid_aligned_boundary_keeps_every_square(plane20):
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "d:h13_10:0"))
    reg = semicircle_halfplane(x, S, loc, tau, PI / 16)
    h = maximal_halfplane_subcomplex(x, reg)
    assert not h.empty
    assert h.checks["strip_removed"] == 0.0
    assert h.rows == 7
    assert len(h.faces) == 140
    assert h.boundary_squares == tuple(sorted(f"f13_{j}" for j in range(20)))
    assert set(h.faces) == {f"f{i}_{j}" for i in range(13, 20) for j in range(20)}
    assert h.checks["half_grid"] and h.checks["internal_flat"]
    assert h.checks["boundary_geodesic"]
    assert h.checks["boundary_margin"] >= -1e-9


def test_halfgrid_offset_boundary_drops_the_partial_strip(plane20):
    """A region based a fraction 0.3 along an edge keeps only the squares
    beyond the next grid line, losing a strip of height 0.7."""
    x, S = plane20
    loc = x.locate(PointLocation("edge", "h13_10", param=0.3))
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "p:1"))
    reg = semicircle_halfplane(x, S, loc, tau, PI / 16)
    assert reg.ok
    h = maximal_halfplane_subcomplex(x, reg)
    assert not h.empty
    assert h.checks["strip_removed"] == pytest.approx(0.7, abs=1e-9)
    assert h.boundary_squares == tuple(sorted(f"f14_{j}" for j in range(20)))
    assert len(h.faces) == 120 and h.rows == 6


def test_halfgrid_slanted_boundary_is_empty(plane20):
    """A flat region whose boundary is not parallel to any square side
    contains no whole square rows."""
    x, S = plane20
    loc = x.locate(PointLocation("face", "f13_10", coords=(0.5, 0.5)))
    theta = 0.37
    tau = Semicircle(loc.brief(), GraphPoint("e", "h:0", theta),
                     GraphPoint("e", "h:1", theta),
                     (("h:0", 0), ("h:1", 0)), theta)
    reg = semicircle_halfplane(x, S, loc, tau, PI / 16)
    assert reg.ok
    h = maximal_halfplane_subcomplex(x, reg)
    assert h.empty
    assert "parallel" in h.reason


def test_halfgrid_requires_certified_region(plane20):
    x, S = plane20
    loc = PointLocation("vertex", "v13_10")
    g = _slink(x, S, loc)
    tau = semicircle_centered(g, GraphPoint("v", "d:h13_10:0"))
    reg = semicircle_halfplane(x, S, loc, tau, PI / 16)
    reg.certificate["flat_ok"] = False
    h = maximal_halfplane_subcomplex(x, reg)
    assert h.empty and "certified" in h.reason


# ----------------------------------------------------------------------
# decompositions


def test_plane_decomposes_into_halfplanes_and_a_central_core(
        plane20_decomposition):
    dec = plane20_decomposition
    assert dec.ok
    assert len(dec.halfplanes) >= 4
    assert dec.certificate["core_bound"] == pytest.approx(3.0 + SEC8 + 1.0)
    assert dec.certificate["core_bounded"]
    assert dec.certificate["halfplane_near"]
    assert dec.certificate["uncovered"] == []
    want_core = tuple(sorted(f"f{i}_{j}" for i in range(8, 12)
                             for j in range(8, 12)))
    assert dec.core == want_core
    assert not dec.skipped


def test_plane_halfplanes_partition_with_the_core(plane20,
                                                  plane20_decomposition):
    x, S = plane20
    dec = plane20_decomposition
    sfaces, _ = _sub_ids(x, S)
    covered = set()
    for h in dec.halfplanes:
        assert not h.empty
        assert set(h.faces) <= sfaces
        assert h.checks["strip_removed"] == 0.0
        covered |= set(h.faces)
    assert covered | set(dec.core) == sfaces
    keys = [h.key() for h in dec.halfplanes]
    assert len(set(keys)) == len(keys)
    assert all(d <= 4.0 + 1e-9 for d in dec.certificate["near_distances"])


def test_plane_decomposition_is_deterministic(plane10):
    x, S = plane10
    p = PointLocation("vertex", "v5_5")
    a = decompose(x, S, p, r2=2.0)
    b = decompose(x, S, p, r2=2.0)
    assert a.ok and len(a.halfplanes) == 8 and len(a.core) == 4
    assert json.dumps(a.to_data(), sort_keys=True) == \
        json.dumps(b.to_data(), sort_keys=True)


def test_bent_plane_gets_halfplanes_across_the_line(bent12):
    x, S = bent12
    dec = decompose(x, S, PointLocation("vertex", "L6"), r2=3.0)
    assert dec.ok
    assert len(dec.halfplanes) >= 2
    crossing = [h for h in dec.halfplanes
                if {f[:2] for f in h.boundary_squares} == {"s0", "s1"}]
    assert len(crossing) >= 2
    assert not dec.skipped


def test_branching_line_defeats_the_covering(tripod12_decomposition):
    dec = tripod12_decomposition
    assert not dec.ok
    assert not dec.certificate["core_bounded"]
    unc = dec.certificate["uncovered"]
    assert unc
    # everything that stays uncovered hugs the singular line
    for fid in unc:
        perp = int(fid.split("f")[1].split("_")[0])
        assert perp <= 1
    reasons = " | ".join(s["reason"] for s in dec.skipped)
    assert "not unique" in reasons
    assert "no canonical semicircle" in reasons
    # the per-sheet halfplanes away from the line still appear
    assert len(dec.halfplanes) == 6
    sheets = {h.boundary_squares[0][:2] for h in dec.halfplanes}
    assert sheets == {"s0", "s1", "s2"}


def test_decompose_rejects_non_square_complexes():
    x, c = fixture_cycles("glasses", 8)
    S = support(x, c)
    with pytest.raises(NotSquareComplex):
        decompose(x, S, PointLocation("vertex", "o"), r2=2.0)
    x2, c2 = fixture_cycles("cone_points", 0.5)
    S2 = support(x2, c2)
    with pytest.raises(NotSquareComplex):
        decompose(x2, S2, PointLocation("vertex", "v10_10"), r2=2.0)


def test_decompose_guards_truncation_and_alpha(plane10):
    x, S = plane10
    p = PointLocation("vertex", "v5_5")
    with pytest.raises(TruncationTooSmall):
        decompose(x, S, p, r2=3.0)
    with pytest.raises(ValueError):
        decompose(x, S, p, r2=2.0, alpha=PI / 4)


def test_decompose_reports_suspension_modulus(plane20_decomposition,
                                              tripod12_decomposition):
    dec = plane20_decomposition
    assert dec.certificate["suspension_modulus"] == "inf"
    assert dec.certificate["link_family"] == 1
    dect = tripod12_decomposition
    assert dect.certificate["link_family"] == 2
    beta = dect.certificate["suspension_modulus"]
    assert isinstance(beta, float) and beta > 0.0


def test_decomposition_report_is_json_clean(plane20_decomposition):
    data = plane20_decomposition.to_data()
    text = json.dumps(data, sort_keys=True, allow_nan=False)
    assert json.loads(text) == data
