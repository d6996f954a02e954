import math

import pytest

from catflat.complex_core import SQUARE, Edge, Face, PEComplex, PointLocation
from catflat.errors import CatflatError, FrontierLink
from catflat.link_graphs import (GEdge, GraphPoint, MetricGraph, Subgraph,
                                 antipodal_set, girth,
                                 isolated_suspension_modulus, link_at,
                                 suspension_structure)

from conftest import square_grid, triangle_cone
from mesh_oracle import MeshGraph, brute_girth, mesh_modulus

PI = math.pi
HALF = PI / 2


# -- graph builders -----------------------------------------------------

def cycle_graph(n, total):
    vs = [f"x{i}" for i in range(n)]
    es = [GEdge(f"e{i}", (f"x{i}", f"x{(i+1) % n}"), total / n) for i in range(n)]
    return MetricGraph(vs, es)


def k23():
    vs = ["u", "w", "m1", "m2", "m3"]
    es = [GEdge(f"a{j}", ("u", f"m{j}"), HALF) for j in (1, 2, 3)]
    es += [GEdge(f"b{j}", (f"m{j}", "w"), HALF) for j in (1, 2, 3)]
    return MetricGraph(vs, es)


def k33():
    vs = [f"u{i}" for i in (1, 2, 3)] + [f"w{i}" for i in (1, 2, 3)]
    es = [GEdge(f"e{i}{j}", (f"u{i}", f"w{j}"), HALF)
          for i in (1, 2, 3) for j in (1, 2, 3)]
    return MetricGraph(vs, es)


def susp3_multigraph():
    es = [GEdge(f"arc{i}", ("u", "w"), PI) for i in (1, 2, 3)]
    return MetricGraph(["u", "w"], es)


def as_oracle_edges(g: MetricGraph):
    return [(e.id, e.ends, e.length) for e in g.edges.values()]


def three_page_book():
    """Three unit squares sharing one spine edge."""
    vertices = ["a", "b"] + [f"c{i}" for i in range(3)] + [f"d{i}" for i in range(3)]
    edges = [Edge("e", ("a", "b"), 1.0)]
    faces = []
    frontier = []
    for i in range(3):
        edges += [Edge(f"r{i}", ("b", f"c{i}"), 1.0),
                  Edge(f"t{i}", (f"c{i}", f"d{i}"), 1.0),
                  Edge(f"l{i}", (f"d{i}", "a"), 1.0)]
        faces.append(Face(f"pg{i}", ["e", f"r{i}", f"t{i}", f"l{i}"], SQUARE))
        frontier += [f"r{i}", f"t{i}", f"l{i}"]
    return PEComplex(vertices, edges, faces, frontier_edges=frontier)


# -- links of complex points -------------------------------------------

def test_grid_vertex_link_is_4_cycle():
    x = square_grid(2)
    link = link_at(x, PointLocation("vertex", "v1_1"))
    g = link.graph
    assert len(g.vertices) == 4
    assert len(g.edges) == 4
    assert all(abs(e.length - HALF) < 1e-12 for e in g.edges.values())
    assert girth(g) == pytest.approx(2 * PI, abs=1e-9)
    assert not link.partial


def test_grid_edge_link_is_circle():
    x = square_grid(3)
    link = link_at(x, PointLocation("edge", "h1_1", 0.5))
    g = link.graph
    assert sorted(g.vertices) == ["p:0", "p:1"]
    assert len(g.edges) == 2
    assert all(abs(e.length - PI) < 1e-12 for e in g.edges.values())
    susp = suspension_structure(g)
    assert susp is not None and susp.all_points_are_poles


def test_three_page_spine_link_is_suspension_of_3():
    x = three_page_book()
    link = link_at(x, PointLocation("edge", "e", 0.5))
    g = link.graph
    assert len(g.edges) == 3
    susp = suspension_structure(g)
    assert susp is not None
    assert susp.arc_count == 3
    assert [p.id for p in susp.poles] == ["p:0", "p:1"]
    assert not susp.all_points_are_poles


def test_face_link_is_2pi_circle():
    x = square_grid(2)
    link = link_at(x, PointLocation("face", "f0_0", coords=(0.4, 0.6)))
    g = link.graph
    assert g.total_length() == pytest.approx(2 * PI, abs=1e-12)
    assert girth(g) == pytest.approx(2 * PI, abs=1e-12)


def test_cone_apex_link_total_angle():
    x = triangle_cone(8, PI / 4)
    link = link_at(x, PointLocation("vertex", "o"))
    assert link.graph.total_length() == pytest.approx(2 * PI, abs=1e-9)
    assert girth(link.graph) == pytest.approx(2 * PI, abs=1e-9)


def test_frontier_vertex_link_refused_then_flagged():
    x = square_grid(2)
    with pytest.raises(FrontierLink):
        link_at(x, PointLocation("vertex", "v0_0"))
    link = link_at(x, PointLocation("vertex", "v0_0"), allow_partial=True)
    assert link.partial
    # corner of the board: a single quarter-turn arc
    assert len(link.graph.edges) == 1
    assert girth(link.graph) == math.inf


def test_vertex_link_direction_round_trip():
    x = square_grid(2)
    link = link_at(x, PointLocation("vertex", "v1_1"))
    for aid in sorted(link.graph.edges):
        for s in (0.0, 0.3, HALF):
            pt = GraphPoint("e", aid, s) if 0 < s < HALF else None
            if pt is None:
                e = link.graph.edges[aid]
                pt = GraphPoint("v", e.ends[0 if s == 0.0 else 1])
            motion = link.point_direction(pt)
            if motion["kind"] == "face":
                back = link.direction_point(motion["face"], motion["dir"])
                assert back.kind == pt.kind and back.id == pt.id
                assert back.s == pytest.approx(pt.s, abs=1e-9)


def test_edge_link_direction_round_trip():
    x = square_grid(3)
    link = link_at(x, PointLocation("edge", "h1_1", 0.25))
    for aid in sorted(link.graph.edges):
        for s in (0.2, HALF, 2.5):
            motion = link.point_direction(GraphPoint("e", aid, s))
            back = link.direction_point(motion["face"], motion["dir"])
            assert back.id == aid
            assert back.s == pytest.approx(s, abs=1e-9)


# -- girth --------------------------------------------------------------

def test_girth_k33_matches_brute_force():
    g = k33()
    expect = brute_girth(g.vertices, as_oracle_edges(g))
    assert expect == pytest.approx(2 * PI, abs=1e-12)
    assert girth(g) == pytest.approx(expect, abs=1e-12)


def test_girth_tripod_infinite():
    g = MetricGraph(["c", "l1", "l2", "l3"],
                    [GEdge(f"s{i}", ("c", f"l{i}"), 1.0) for i in (1, 2, 3)])
    assert girth(g) == math.inf


def test_girth_parallel_edges():
    g = MetricGraph(["u", "w"], [GEdge("e1", ("u", "w"), 0.7),
                                 GEdge("e2", ("u", "w"), 0.9)])
    assert girth(g) == pytest.approx(1.6, abs=1e-12)
    assert girth(g) == pytest.approx(
        brute_girth(g.vertices, as_oracle_edges(g)), abs=1e-12)


def test_girth_self_loop():
    g = MetricGraph(["u"], [GEdge("loop", ("u", "u"), 0.4)])
    assert girth(g) == pytest.approx(0.4, abs=1e-15)


def test_girth_witness_cycle():
    g = cycle_graph(4, 2 * PI)
    val, cyc = girth(g, with_cycle=True)
    assert val == pytest.approx(2 * PI, abs=1e-12)
    # alternating vertex/edge ids, closed
    assert len(cyc) == 8


# -- antipodal sets -----------------------------------------------------

def test_antipode_circle_is_single_point():
    g = cycle_graph(4, 2 * PI)
    ant = antipodal_set(g, GraphPoint("v", "x0"))
    assert ant.vertices == ["x2"]
    assert ant.intervals == []
    # from an edge-interior point: one antipode inside the opposite edge
    ant = antipodal_set(g, GraphPoint("e", "e0", 0.3))
    assert ant.vertices == []
    assert len(ant.intervals) == 1
    eid, s0, s1 = ant.intervals[0]
    assert eid == "e2" and s0 == pytest.approx(s1, abs=1e-9)
    assert s0 == pytest.approx(0.3, abs=1e-9)


def test_antipode_susp3_pole():
    g = susp3_multigraph()
    ant = antipodal_set(g, GraphPoint("v", "u"))
    assert ant.vertices == ["w"]
    assert ant.intervals == []


def test_antipode_k33_vertex_matches_mesh_oracle():
    g = k33()
    ant = antipodal_set(g, GraphPoint("v", "u1"))
    # every neighbor sits at pi/2, the other side of the bipartition at pi
    assert ant.vertices == ["u2", "u3"]
    assert ant.intervals == []
    mg = MeshGraph(g.vertices, as_oracle_edges(g), 1e-3)
    pts = mg.antipode_points("e11", 0.0, [e.id for e in g.edges.values()])
    # mesh peaks sit at the far ends of edges into u2/u3 (vertex antipodes)
    assert len(pts) > 0
    for fid, s in pts:
        d = mg.point_to_point("e11", 0.0, fid, s)
        assert d == pytest.approx(PI, abs=1e-6)
        ends = mg.ends[fid]
        L = mg.lengths[fid]
        near_vertex = (s < 1e-5 and ends[0] in ("u2", "u3")) or \
                      (s > L - 1e-5 and ends[1] in ("u2", "u3"))
        assert near_vertex


def test_antipode_distances_verified_independently():
    g = k23()
    mg = MeshGraph(g.vertices, as_oracle_edges(g), 1e-3)
    v = GraphPoint("e", "a1", PI / 4)
    ant = antipodal_set(g, v, Subgraph.whole(g))
    pts = ant.sample_points()
    assert pts, "expected antipodes on the far side"
    for p in pts:
        if p.kind == "v":
            d = mg.point_to_vertex("a1", PI / 4, p.id)
        else:
            d = mg.point_to_point("a1", PI / 4, p.id, p.s)
        assert d == pytest.approx(PI, abs=1e-9)


def test_antipode_restricted_to_subgraph():
    g = k23()
    # restrict to the 4-cycle through m1 and m2: from the far side of m3's
    # edge the antipodes inside the subgraph differ from the ambient ones
    sub = Subgraph.from_edges(g, ["a1", "b1", "a2", "b2"])
    ant = antipodal_set(g, GraphPoint("v", "m3"), sub)
    assert ant.vertices == ["m1", "m2"]


# -- suspension recognition --------------------------------------------

def test_suspension_4cycle_lexicographic_poles():
    g = cycle_graph(4, 2 * PI)
    susp = suspension_structure(g)
    assert susp is not None
    assert susp.all_points_are_poles
    assert susp.arc_count == 2
    assert [p.id for p in susp.poles] == ["x0", "x2"]


def test_suspension_k23():
    g = k23()
    susp = suspension_structure(g)
    assert susp is not None
    assert susp.arc_count == 3
    assert [p.id for p in susp.poles] == ["u", "w"]
    assert not susp.all_points_are_poles
    # each arc pairs one u-side and one w-side half
    for arc in susp.arcs:
        assert len(arc) == 2


def test_suspension_circle_wrong_length_none():
    assert suspension_structure(cycle_graph(4, 2 * PI + 0.3)) is None


def test_suspension_unequal_arcs_none():
    g = MetricGraph(["u", "w"], [GEdge("arc1", ("u", "w"), PI),
                                 GEdge("arc2", ("u", "w"), PI),
                                 GEdge("arc3", ("u", "w"), 1.2)])
    assert suspension_structure(g) is None


def test_suspension_multigraph():
    susp = suspension_structure(susp3_multigraph())
    assert susp is not None
    assert susp.arc_count == 3
    assert [p.id for p in susp.poles] == ["u", "w"]


def test_suspension_low_degree_none():
    g = MetricGraph(["a", "b"], [GEdge("e", ("a", "b"), 1.0)])
    assert suspension_structure(g) is None


# -- isolated-suspension modulus ---------------------------------------

def test_modulus_circle_2pi_infinite():
    res = isolated_suspension_modulus([cycle_graph(4, 2 * PI)], PI / 4)
    assert res.beta == math.inf
    assert res.witness is None
    assert res.supports_checked == 1


def test_modulus_k23_beta_is_2alpha():
    # On K_{2,3} the only non-circle support is the whole graph, a suspension
    # with poles u, w.  A point at arc t in [alpha, pi/2] from a pole has
    # exactly two antipodes, at arc t from the opposite pole on the other two
    # arcs, at mutual distance 2t.  The infimum over bad points is 2*alpha.
    for alpha in (PI / 8, PI / 4):
        res = isolated_suspension_modulus([k23()], alpha)
        assert res.beta == pytest.approx(2 * alpha, abs=1e-8)
        assert res.witness is not None
        assert res.witness.point.kind == "e"
        assert res.witness.bad_reason == "far_from_poles"


def test_modulus_family_matches_mesh_oracle():
    family = [cycle_graph(4, 2 * PI), k23()]
    res = isolated_suspension_modulus(family, PI / 4)
    # oracle: supports classified by hand (3 single cycles of K_{2,3} are
    # circles of length 2*pi and contribute nothing; the whole graph is a
    # suspension with poles u, w; the 4-cycle's only support is a circle)
    g = k23()
    oracle = mesh_modulus(
        [(cycle_graph(4, 2 * PI).vertices,
          as_oracle_edges(cycle_graph(4, 2 * PI)), []),
         (g.vertices, as_oracle_edges(g),
          [([e.id for e in g.edges.values()], ("u", "w"))])],
        PI / 4, 1e-3)
    assert res.beta == pytest.approx(oracle, abs=1e-3)


def test_modulus_monotone_in_alpha():
    vals = [isolated_suspension_modulus([k23()], a).beta
            for a in (PI / 8, PI / 4, PI / 2)]
    assert vals[0] <= vals[1] + 1e-12
    assert vals[1] <= vals[2] + 1e-12


def test_modulus_excess_circle():
    # circle of length 2*pi + 0.5: its only cycle support is not a
    # suspension, so every point is bad; the antipodes of any point are the
    # two points at arc distance pi either way, which are 0.5 apart
    res = isolated_suspension_modulus([cycle_graph(4, 2 * PI + 0.5)], PI / 8)
    assert math.isfinite(res.beta)
    assert res.beta == pytest.approx(0.5, abs=1e-8)
    assert res.witness is not None
    assert res.witness.bad_reason == "support_not_suspension"


def test_modulus_rejects_small_girth():
    bad = cycle_graph(3, 3.0)
    with pytest.raises(CatflatError):
        isolated_suspension_modulus([bad], PI / 4)


def test_modulus_susp3_multigraph_witness():
    # arcs of length pi: bad points sit at arc distance in [alpha, pi-alpha]
    # from the poles, with two antipodes at mutual distance 2*min(t, pi-t)
    res = isolated_suspension_modulus([susp3_multigraph()], PI / 4)
    assert res.beta == pytest.approx(PI / 2, abs=1e-8)
