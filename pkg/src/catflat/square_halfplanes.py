"""Half-plane decompositions of square complex supports.

Outside a ball around a chosen center, the support of a chain in a square
complex can often be split into finitely many isometric Euclidean
half-plane subcomplexes plus a finite core.  The operations here flow a
semicircle of link directions out to geodesic rays, certify that their
union is flat, extract the largest grid-aligned subcomplex inside such a
region, and assemble the pieces into a certified decomposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as _dcfield

from . import geom
from .complex_core import PEComplex, PointLocation, SQUARE
from .errors import CatflatError, InvalidLocation, NoAntipode, NotSquareComplex, \
    TruncationTooSmall
from .flat_structure import _field, density_profile
from .geodesics import GeodesicPath, PathSegment, _face_exit, _junctions, \
    _seg_link_point, _sub_ids, distance, extend_in_subcomplex, geodesic
from .link_graphs import GraphPoint, MetricGraph, antipodal_set, \
    isolated_suspension_modulus, link_at

PI = math.pi
SEC8 = 1.0 / math.cos(PI / 8.0)


def _require_squares(x: PEComplex, face_ids) -> None:
    for fid in face_ids:
        if x.faces[fid].shape != SQUARE:
            raise NotSquareComplex(f"face {fid} is not a unit square")


# ----------------------------------------------------------------------
# semicircles in a link


@dataclass(frozen=True)
class Semicircle:
    """A geodesic arc of length exactly pi in a link graph.

    The arc is stored as the chain of link edges it traverses from start
    to end; chain entries are (edge id, entry end index) and s0 is the
    arc position of the start point measured from the entry end of the
    first chain edge.
    """

    at: str
    start: GraphPoint
    end: GraphPoint
    chain: tuple
    s0: float

    @property
    def path(self) -> tuple:
        return tuple(eid for eid, _ in self.chain)

    def point_at(self, g: MetricGraph, t: float) -> GraphPoint:
        if t < -1e-9 or t > PI + 1e-9:
            raise ValueError("arc parameter outside [0, pi]")
        rem = self.s0 + min(max(t, 0.0), PI)
        for eid, enter in self.chain:
            L = g.edges[eid].length
            if rem <= L + 1e-12:
                rem = min(max(rem, 0.0), L)
                s = rem if enter == 0 else L - rem
                e = g.edges[eid]
                if s <= 1e-9:
                    return GraphPoint("v", e.ends[0])
                if s >= L - 1e-9:
                    return GraphPoint("v", e.ends[1])
                return GraphPoint("e", eid, s)
            rem -= L
        eid, enter = self.chain[-1]
        return GraphPoint("v", g.edges[eid].ends[1 - enter])

    def to_data(self) -> dict:
        return {"at": self.at, "start": self.start.brief(),
                "end": self.end.brief(), "path": list(self.path),
                "length": PI}


def _march(g: MetricGraph, eid: str, enter: int, budget: float):
    """Walk a link graph from the given entry end of an edge, consuming
    `budget` of arc length; at every vertex passed the continuation must
    be the unique other incident arc."""
    hops = []
    while True:
        e = g.edges[eid]
        hops.append((eid, enter))
        if budget <= e.length + 1e-9:
            s_in = min(budget, e.length)
            s = s_in if enter == 0 else e.length - s_in
            if s <= 1e-9:
                return GraphPoint("v", e.ends[0]), hops
            if s >= e.length - 1e-9:
                return GraphPoint("v", e.ends[1]), hops
            return GraphPoint("e", eid, s), hops
        budget -= e.length
        w = e.ends[1 - enter]
        nxt = [item for item in g.adj.get(w, ()) if item[0] != eid]
        if len(nxt) != 1:
            raise CatflatError(
                f"no canonical semicircle: {len(nxt) + 1} arcs meet at {w}")
        eid = nxt[0][0]
        enter = 0 if g.edges[eid].ends[0] == w else 1


def semicircle_centered(g: MetricGraph, center: GraphPoint,
                        at: str = "") -> Semicircle:
    """The geodesic arc of length pi centered at a link vertex, when the
    walk of pi/2 each way is forced.

    Requires exactly two incident arcs at the center and at every vertex
    passed; a branch point leaves no canonical choice and raises
    CatflatError.  The result is rejected if the two endpoints come out
    closer than pi in the link, since the arc is then not geodesic.
    """
    if center.kind != "v":
        raise CatflatError("semicircle center must be a link vertex")
    inc = g.adj.get(center.id, ())
    if len(inc) != 2:
        raise CatflatError(
            f"no canonical semicircle at {center.id}: {len(inc)} incident arcs")
    legs = []
    for eid, _, _ in inc:
        enter = 0 if g.edges[eid].ends[0] == center.id else 1
        legs.append(_march(g, eid, enter, PI / 2.0))
    (start, hops_a), (end, hops_b) = legs
    chain = tuple((eid, 1 - enter) for eid, enter in reversed(hops_a)) \
        + tuple(hops_b)
    e0 = g.edges[chain[0][0]]
    if start.kind == "e":
        s0 = start.s if chain[0][1] == 0 else e0.length - start.s
    else:
        s0 = 0.0 if e0.ends[chain[0][1]] == start.id else e0.length
    d = g.point_distance(start, end)
    if d < PI - 1e-7:
        raise CatflatError(
            f"arc through {center.id} is not geodesic: endpoints {d:.6f} apart")
    return Semicircle(at, start, end, chain, s0)


def _validate_semicircle(g: MetricGraph, tau: Semicircle) -> None:
    if not tau.chain:
        raise CatflatError("semicircle has an empty chain")
    total = 0.0
    prev_far = None
    for eid, enter in tau.chain:
        e = g.edges.get(eid)
        if e is None:
            raise CatflatError(f"semicircle edge {eid} is not in the link")
        if prev_far is not None and e.ends[enter] != prev_far:
            raise CatflatError("semicircle chain is not connected")
        prev_far = e.ends[1 - enter]
        total += e.length
    if tau.s0 < -1e-9 or tau.s0 + PI > total + 1e-7:
        raise CatflatError("semicircle chain does not cover an arc of length pi")
    d = g.point_distance(tau.start, tau.end)
    if d < PI - 1e-7:
        raise CatflatError("semicircle is not geodesic in the link")


# ----------------------------------------------------------------------
# flowing a semicircle out to a flat region


@dataclass
class HalfPlaneRegion:
    """Union of the geodesic rays spawned by a semicircle of directions.

    `rays[i]` starts at the base point in the direction `tau.point_at(ts[i])`;
    the certificate records per-crossing uniqueness, deviation of sampled
    pairwise distances from the Euclidean polar model, and clearance from
    the avoided ball when one was given.
    """

    at: PointLocation
    tau: Semicircle
    ts: tuple
    rays: list
    s_faces: tuple
    s_edges: tuple
    certificate: dict = _dcfield(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.certificate.get("flat_ok"))

    def to_data(self) -> dict:
        return {"at": self.at.brief(), "tau": self.tau.to_data(),
                "ts": list(self.ts),
                "ray_lengths": [r.length for r in self.rays],
                "truncated": [bool(r.partial) for r in self.rays],
                "certificate": dict(self.certificate)}


def _launch(x: PEComplex, at: PointLocation, motion: dict) -> GeodesicPath:
    """Seed path for one link direction: run across the first carrier."""
    if motion["kind"] == "face":
        fid = motion["face"]
        base = tuple(motion["base"])
        d = geom.unit(motion["dir"])
        s, pt = _face_exit(x, fid, base, d)
        seg = PathSegment("face", fid, base, pt, s)
        end = x.locate(PointLocation("face", fid, coords=pt))
        return GeodesicPath((at, end), [seg], [f"f:{fid}"], s, [])
    eid = motion["edge"]
    e = x.edges[eid]
    if "from_end" in motion:
        t0 = float(motion["from_end"])
        t1 = 1.0 - t0
    else:
        t0 = at.param
        t1 = float(motion["toward_end"])
    seg = PathSegment("edge", eid, t0, t1, abs(t1 - t0) * e.length)
    end = x.locate(PointLocation("vertex", e.ends[int(round(t1))]))
    return GeodesicPath((at, end), [seg], [f"e:{eid}"], seg.length, [])


def _ambiguity(x: PEComplex, sfaces, sedges, j) -> dict | None:
    """Check that the continuation at a junction is forced in the support:
    the antipodal set of the incoming direction must be a single point.
    Transversal crossings of an edge with exactly two support faces are
    forced already and are not recomputed."""
    loc = j["loc"]
    if loc.kind == "edge":
        k = sum(1 for f, _ in x.edge_faces[loc.id] if f in sfaces)
        if k == 2:
            return None
    link = link_at(x, loc, allow_partial=True)
    g = link.graph.restrict(link.subgraph_for(sfaces, sedges))
    ant = antipodal_set(g, j["in_pt"], tol=1e-7)
    n = len(ant.vertices) + len(ant.intervals)
    plateau = any(s1 - s0 > 1e-7 for _, s0, s1 in ant.intervals)
    if n == 1 and not plateau:
        return None
    return {"at": loc.brief(), "antipodes": n, "plateau": plateau}


def semicircle_halfplane(x: PEComplex, S, at, tau: Semicircle, alpha: float,
                         avoid=None, avoid_radius: float | None = None,
                         n_rays: int = 9, ray_length: float | None = None,
                         flat_tol: float = 1e-9) -> HalfPlaneRegion:
    """Flow a semicircle of directions out to geodesic rays and certify
    that their union is an isometric Euclidean half-plane region.

    alpha must lie in (0, pi/8).  When `avoid` is given, the semicircle
    must keep link distance greater than alpha from the direction of
    `avoid`, and every ray must stay outside the ball of `avoid_radius`
    around it.  Rays are truncated at the frontier; a continuation that
    is ambiguous (several antipodes) or bends (negative margin) raises
    CatflatError, as does a ray entering the avoided ball.
    """
    if not 0.0 < alpha < PI / 8.0:
        raise ValueError("alpha must lie in (0, pi/8)")
    if n_rays < 3:
        raise ValueError("need at least three rays")
    sfaces, sedges = _sub_ids(x, S)
    _require_squares(x, sfaces)
    loc = x.locate(at if isinstance(at, PointLocation) else at)
    link = link_at(x, loc, allow_partial=True)
    g_s = link.graph.restrict(link.subgraph_for(sfaces, sedges))
    _validate_semicircle(g_s, tau)

    cert: dict = {"alpha": alpha}
    avoid_loc = None
    if avoid is not None:
        avoid_loc = x.locate(avoid)
        gp = geodesic(x, loc, avoid_loc)
        log_pt = _seg_link_point(x, link, gp.segments[0], "out")
        gap = math.inf
        k = 32
        for i in range(k + 1):
            pt = tau.point_at(g_s, PI * i / k)
            gap = min(gap, g_s.point_distance(log_pt, pt))
        cert["alpha_gap"] = gap
        if gap <= alpha:
            raise CatflatError(
                f"semicircle comes within {gap:.6f} <= alpha of the center direction")

    if ray_length is None:
        ray_length = 1.5 * len(sfaces) + 4.0
    ts = tuple(PI * i / (n_rays - 1) for i in range(n_rays))
    rays = []
    worst_margin = math.inf
    for t in ts:
        gpt = tau.point_at(g_s, t)
        seed = _launch(x, loc, link.point_direction(gpt))
        ray = seed if seed.length >= ray_length \
            else extend_in_subcomplex(x, S, seed, ray_length)
        segs = [s for s in ray.segments if s.length > 1e-12]
        for j in _junctions(x, segs):
            if j["in_pt"] is None:
                raise CatflatError(f"ray breaks at {j['loc'].brief()}: {j.get('note')}")
            if j["margin"] < -1e-7:
                raise CatflatError(
                    f"ray bends at {j['loc'].brief()}: margin {j['margin']:.3e}")
            worst_margin = min(worst_margin, j["margin"])
            amb = _ambiguity(x, sfaces, sedges, j)
            if amb is not None:
                raise CatflatError(
                    f"geodesic continuation not unique at {amb['at']}: "
                    f"{amb['antipodes']} antipodes")
        rays.append(ray)
    cert["worst_margin"] = worst_margin if math.isfinite(worst_margin) else None
    cert["truncated"] = [bool(r.partial) for r in rays]

    if avoid_loc is not None and avoid_radius is not None:
        fld = _field(x, avoid_loc, avoid_radius + 2.0)
        low = math.inf
        for ray in rays:
            for seg in ray.segments:
                if seg.length <= 1e-12:
                    continue
                for k in range(5):
                    u = k / 4.0
                    if seg.kind == "face":
                        pt = geom.add(seg.a, geom.scale(geom.sub(seg.b, seg.a), u))
                        lb, _ = fld.bounds(seg.id, pt)
                    else:
                        fid, pt = _edge_chart(x, sfaces, seg.id,
                                              seg.a + u * (seg.b - seg.a))
                        lb, _ = fld.bounds(fid, pt)
                    low = min(low, lb)
        cert["clearance"] = low
        if low <= avoid_radius - 1e-9:
            raise CatflatError(
                f"ray re-enters the ball of radius {avoid_radius:.6f}: "
                f"clearance {low:.6f}")

    # pairwise distances against the polar model of a flat half-plane
    lmin = min(r.length for r in rays)
    samples = []
    max_dev = 0.0
    if lmin > 0.25:
        pairs = [(i, i + 1, 0.9 * lmin, 0.9 * lmin) for i in range(n_rays - 1)]
        pairs += [(0, n_rays - 1, 0.6 * lmin, 0.6 * lmin),
                  (0, n_rays - 1, 0.95 * lmin, 0.4 * lmin)]
        for i, jx, si, sj in pairs:
            model = math.sqrt(max(0.0, si * si + sj * sj
                                  - 2.0 * si * sj * math.cos(ts[jx] - ts[i])))
            pa = rays[i].point_at(x, si)
            pb = rays[jx].point_at(x, sj)
            actual = distance(x, pa, pb)
            dev = abs(actual - model)
            max_dev = max(max_dev, dev)
            samples.append({"i": i, "j": jx, "s_i": si, "s_j": sj,
                            "model": model, "actual": actual, "dev": dev})
    cert["samples"] = samples
    cert["max_model_error"] = max_dev
    cert["flat_ok"] = max_dev <= flat_tol and worst_margin >= -1e-7
    return HalfPlaneRegion(loc, tau, ts, rays, tuple(sorted(sfaces)),
                           tuple(sorted(sedges)), cert)


def _edge_chart(x: PEComplex, sfaces, eid: str, t: float):
    """Chart coordinates of an edge point inside one adjacent support face."""
    for fid, i in x.edge_faces[eid]:
        if fid not in sfaces:
            continue
        a, b = x.side_endpoints(fid, i)
        if x.faces[fid].dirs[i] != 1:
            a, b = b, a
        return fid, geom.add(a, geom.scale(geom.sub(b, a), t))
    raise InvalidLocation(f"edge {eid} has no support face")


# ----------------------------------------------------------------------
# maximal half-plane subcomplex


@dataclass
class HalfPlaneSubcomplex:
    """Largest half-grid of whole squares inside a certified flat region.

    Row 0 carries the boundary squares; the boundary line is the grid line
    below them.  `empty` is set (with a reason) when no whole square fits,
    when the region boundary is not grid aligned, or when the march meets
    an obstruction.
    """

    base: str
    faces: tuple
    boundary_squares: tuple
    boundary_edges: tuple
    rows: int
    empty: bool
    reason: str | None
    checks: dict = _dcfield(default_factory=dict)
    grid: dict = _dcfield(default_factory=dict)

    def key(self) -> frozenset:
        return frozenset(self.boundary_squares)

    def to_data(self) -> dict:
        return {"base": self.base, "faces": list(self.faces),
                "boundary_squares": list(self.boundary_squares),
                "boundary_edges": list(self.boundary_edges),
                "rows": self.rows, "empty": self.empty,
                "reason": self.reason, "checks": dict(self.checks),
                "grid": {f: list(rc) for f, rc in sorted(self.grid.items())}}


def _empty_h(base: str, reason: str, checks=None) -> HalfPlaneSubcomplex:
    return HalfPlaneSubcomplex(base, (), (), (), 0, True, reason,
                               dict(checks or {}))


def _outward(a, b):
    # charts are CCW, interiors on the left of each directed side
    d = geom.unit(geom.sub(b, a))
    return (d[1], -d[0])


def _side_iso(x: PEComplex, fid: str, i: int, gid: str, j: int) -> geom.Isometry:
    f, g = x.faces[fid], x.faces[gid]
    fa, fb = x.side_endpoints(fid, i)
    ga, gb = x.side_endpoints(gid, j)
    if f.dirs[i] != 1:
        fa, fb = fb, fa
    if g.dirs[j] != 1:
        ga, gb = gb, ga
    # unfolding reflects exactly when both sides run the edge the same way
    return geom.Isometry.from_segment_map(fa, fb, ga, gb,
                                          flip=f.dirs[i] == g.dirs[j])


def _ivec(v):
    return (round(v[0]), round(v[1]))


def _step(x: PEComplex, sfaces, fid: str, want):
    """Cross the side of a square whose outward normal matches `want`.
    Returns (status, edge id, neighbour id, mapped normal map)."""
    f = x.faces[fid]
    for i in range(f.nsides):
        a, b = x.side_endpoints(fid, i)
        if geom.dot(_outward(a, b), want) < 0.9:
            continue
        eid = f.loop[i]
        if eid in x.frontier_edges:
            return "frontier", eid, None, None
        ent = [(g2, j) for g2, j in x.edge_faces[eid]
               if (g2, j) != (fid, i) and g2 in sfaces]
        if len(ent) != 1:
            return "obstructed", eid, None, None
        gid, j = ent[0]
        return "ok", eid, gid, _side_iso(x, fid, i, gid, j)
    return "missing", None, None, None


def _central_frame(x: PEComplex, region: HalfPlaneRegion):
    """A face adjacent to the base point together with the chart direction
    of the central ray seen from it."""
    mid = len(region.rays) // 2
    central = region.rays[mid]
    seg0 = next(s for s in central.segments if s.length > 1e-12)
    if seg0.kind == "face":
        return seg0.id, tuple(seg0.a), geom.unit(geom.sub(seg0.b, seg0.a))
    # the central ray runs along an edge; recover its direction inside the
    # launch face of the nearest ray that does enter a face
    eid = seg0.id
    t0, t1 = float(seg0.a), float(seg0.b)
    order = sorted(range(len(region.rays)),
                   key=lambda i: abs(region.ts[i] - PI / 2.0))
    for i in order:
        s = region.rays[i].segments[0]
        if s.kind != "face" or s.length <= 1e-12:
            continue
        f = x.faces[s.id]
        for k in range(f.nsides):
            if f.loop[k] != eid:
                continue
            a, b = x.side_endpoints(s.id, k)
            if f.dirs[k] != 1:
                a, b = b, a
            d = geom.unit(geom.sub(b, a))
            if t1 < t0:
                d = (-d[0], -d[1])
            base = geom.add(a, geom.scale(geom.sub(b, a), t0))
            return s.id, tuple(base), d
    return None


def maximal_halfplane_subcomplex(x: PEComplex,
                                 region: HalfPlaneRegion) -> HalfPlaneSubcomplex:
    """Extract the largest subcomplex of whole squares inside a flat
    half-plane region, aligned to the grid.

    The region boundary need not run along grid lines; the strip below the
    first full grid line is dropped (never a whole square, so less than
    height 1 is lost).  A boundary direction that is not parallel to a
    square side leaves no room for whole squares and the result is empty.
    """
    base = region.at.brief()
    if not region.ok:
        return _empty_h(base, "region is not certified flat")
    sfaces = set(region.s_faces)
    frame = _central_frame(x, region)
    if frame is None:
        return _empty_h(base, "cannot orient rows from the central ray")
    fid, bpt, n_vec = frame
    if max(abs(n_vec[0]), abs(n_vec[1])) < 1.0 - 1e-7:
        return _empty_h(base, "boundary is not parallel to a square side")
    n_vec = (round(n_vec[0]), round(n_vec[1]))

    # height of the base point within the frame face, measured along n
    lo = min(geom.dot(n_vec, c) for c in x.faces[fid].chart)
    lam = geom.dot(n_vec, bpt) - lo
    removed = 0.0
    if lam > 1e-7 and lam < 1.0 - 1e-7:
        removed = 1.0 - lam
    if 1e-7 < lam:
        st, _, gid, iso = _step(x, sfaces, fid, n_vec)
        if st != "ok":
            return _empty_h(base, "no whole square above the boundary",
                            {"strip_removed": removed})
        fid, n_vec = gid, iso.apply_vec(n_vec)
        n_vec = (round(n_vec[0]), round(n_vec[1]))

    tv0 = (n_vec[1], -n_vec[0])
    placed: dict = {fid: (0, 0, n_vec, tv0)}
    rows: list = [[fid]]
    obstructed: list = []
    row = 0
    while True:
        # close the current row sideways
        queue = list(rows[row])
        while queue:
            cur = queue.pop()
            _, col, nv, tv = placed[cur]
            for dcol in (1, -1):
                want = tv if dcol == 1 else (-tv[0], -tv[1])
                st, eid, gid, iso = _step(x, sfaces, cur, want)
                if st == "frontier":
                    continue
                if st in ("obstructed", "missing"):
                    obstructed.append({"at": eid or cur, "row": row})
                    continue
                cell = (row, col + dcol, _ivec(iso.apply_vec(nv)),
                        _ivec(iso.apply_vec(tv)))
                if gid in placed:
                    if placed[gid] != cell:
                        return _empty_h(base, f"inconsistent transport at {gid}")
                    continue
                placed[gid] = cell
                rows[row].append(gid)
                queue.append(gid)
        # seed the next row upward
        nxt = []
        for cur in rows[row]:
            _, col, nv, tv = placed[cur]
            st, eid, gid, iso = _step(x, sfaces, cur, nv)
            if st == "frontier":
                continue
            if st in ("obstructed", "missing"):
                obstructed.append({"at": eid or cur, "row": row + 1})
                continue
            cell = (row + 1, col, _ivec(iso.apply_vec(nv)),
                    _ivec(iso.apply_vec(tv)))
            if gid in placed:
                if placed[gid] != cell:
                    return _empty_h(base, f"inconsistent transport at {gid}")
                continue
            placed[gid] = cell
            nxt.append(gid)
        if not nxt:
            break
        rows.append(nxt)
        row += 1

    if obstructed:
        return _empty_h(base, f"obstructed at {obstructed[0]['at']}",
                        {"obstructions": obstructed, "strip_removed": removed})

    faces = tuple(sorted(placed))
    boundary = tuple(sorted(rows[0]))
    bedges = []
    for f0 in rows[0]:
        nv = placed[f0][2]
        down = (-nv[0], -nv[1])
        f = x.faces[f0]
        for i in range(f.nsides):
            a, b = x.side_endpoints(f0, i)
            if geom.dot(_outward(a, b), down) > 0.9:
                bedges.append(f.loop[i])
    bedges = tuple(sorted(set(bedges)))

    checks = {"strip_removed": removed, "rows": len(rows),
              "half_grid": True, "internal_flat": True,
              "boundary_geodesic": True}
    # every square must keep its upward and sideways neighbours unless
    # the frontier cuts them off; downward likewise above row 0
    for f0, (r0, _c, nv, _t) in placed.items():
        dirs = [nv, (nv[1], -nv[0]), (-nv[1], nv[0])]
        if r0 > 0:
            dirs.append((-nv[0], -nv[1]))
        for dv in dirs:
            st, eid, gid, _ = _step(x, sfaces, f0, dv)
            if st == "frontier":
                continue
            if st != "ok" or gid not in placed:
                checks["half_grid"] = False
    # corner counts: interior vertices of a half-grid see four squares
    corner_count: dict = {}
    for f0 in faces:
        for vid in x.faces[f0].corners:
            corner_count[vid] = corner_count.get(vid, 0) + 1
    if any(c > 4 for c in corner_count.values()):
        checks["internal_flat"] = False
    # the boundary line must run straight through the complex
    bverts: dict = {}
    for eid in bedges:
        for end, vid in enumerate(x.edges[eid].ends):
            bverts.setdefault(vid, []).append((eid, end))
    wmargin = math.inf
    for vid, incid in sorted(bverts.items()):
        if len(incid) != 2:
            continue
        vlink = link_at(x, PointLocation("vertex", vid), allow_partial=True)
        if vlink.partial:
            continue
        (e1, k1), (e2, k2) = incid
        d = vlink.graph.point_distance(GraphPoint("v", f"d:{e1}:{k1}"),
                                       GraphPoint("v", f"d:{e2}:{k2}"))
        wmargin = min(wmargin, d - PI)
        if d < PI - 1e-7:
            checks["boundary_geodesic"] = False
    checks["boundary_margin"] = wmargin if math.isfinite(wmargin) else None
    ok = checks["half_grid"] and checks["internal_flat"] \
        and checks["boundary_geodesic"]
    if not ok:
        return _empty_h(base, "half-grid verification failed", checks)
    grid = {f0: (cell[0], cell[1]) for f0, cell in placed.items()}
    return HalfPlaneSubcomplex(base, faces, boundary, bedges, len(rows),
                               False, None, checks, grid)


# ----------------------------------------------------------------------
# decomposition of a support


@dataclass
class Decomposition:
    """Finite core plus half-plane subcomplexes covering a support outside
    a ball around the center."""

    center: str
    r2: float
    alpha: float
    r1: float
    core: tuple
    halfplanes: list
    skipped: list
    certificate: dict = _dcfield(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.certificate.get("ok"))

    def to_data(self) -> dict:
        return {"center": self.center, "r2": self.r2, "alpha": self.alpha,
                "r1": self.r1, "core": list(self.core),
                "halfplanes": [h.to_data() for h in self.halfplanes],
                "skipped": list(self.skipped),
                "certificate": dict(self.certificate)}


def _link_signature(g: MetricGraph):
    degs = tuple(sorted(len(v) for v in g.adj.values()))
    arcs = tuple(sorted(round(e.length, 9) for e in g.edges.values()))
    return degs, arcs


def _corner_map(x: PEComplex, sfaces) -> dict:
    out: dict = {}
    for fid in sorted(sfaces):
        f = x.faces[fid]
        for i, vid in enumerate(f.corners):
            out.setdefault(vid, (fid, tuple(f.chart[i])))
    return out


def decompose(x: PEComplex, S, p, r2: float | None = None,
              alpha: float = PI / 16.0, n_rays: int = 9) -> Decomposition:
    """Split a square complex support outside a ball around `p` into
    isometric flat half-plane subcomplexes plus a finite core.

    Candidate half-planes are flown from vertices near the sphere of
    radius r2: each link direction v at angle at least 5 pi/8 from the
    direction of p spawns a semicircle centered at v, which is flowed out
    and converted to its maximal half-grid.  Duplicates are merged by
    boundary square set.  The certificate reports whether the leftover
    core fits inside the ball of radius r2 + sec(pi/8) + 1, listing the
    uncovered faces when it does not.
    """
    sfaces, sedges = _sub_ids(x, S)
    if not sfaces:
        raise InvalidLocation("empty support")
    _require_squares(x, sfaces)
    if not 0.0 < alpha < PI / 8.0:
        raise ValueError("alpha must lie in (0, pi/8)")
    p_loc = x.locate(p)

    # every vertex link of the support must be made of quarter arcs, and
    # the family must have isolated suspensions at this alpha
    family = []
    sigs = {}
    corners = _corner_map(x, sfaces)
    for vid in sorted(corners):
        vloc = PointLocation("vertex", vid)
        link = link_at(x, vloc, allow_partial=True)
        if link.partial:
            continue
        g = link.graph.restrict(link.subgraph_for(sfaces, sedges))
        if not g.edges:
            continue
        for e in g.edges.values():
            if abs(e.length - PI / 2.0) > 1e-7:
                raise NotSquareComplex(
                    f"link arc of length {e.length:.6f} at {vid}")
        sig = _link_signature(g)
        if sig not in sigs:
            sigs[sig] = True
            family.append(g)
    modulus = isolated_suspension_modulus(family, alpha=alpha) if family else None

    bound = 0.0 if r2 is None else r2 + SEC8 + 1.0
    probe = _field(x, p_loc, max(bound + 3.0, 8.0))
    clearance = probe.frontier_clearance()
    if r2 is None:
        radii = [r for r in (1.0, 2.0, 4.0, 8.0) if r + SEC8 + 3.0 < clearance]
        r2 = 1.0
        if radii:
            prof = density_profile(x, S, p, radii=radii)
            flat = [r for r, fe in zip(prof.radii, prof.flat_equality) if fe]
            r2 = (max(flat) if flat else 1.0) + 2.0
        bound = r2 + SEC8 + 1.0
    fld = _field(x, p_loc, bound + 3.0)
    clearance = fld.frontier_clearance()
    if clearance <= bound:
        raise TruncationTooSmall(
            f"frontier clearance {clearance:.4f} inside the core bound {bound:.4f}")
    r1 = r2 * math.sin(alpha)

    ring = []
    for vid, (fid, cpt) in sorted(corners.items()):
        _, ub = fld.bounds(fid, cpt)
        if abs(ub - r2) <= 0.75:
            ring.append((vid, ub))

    halfplanes: list = []
    keys = set()
    skipped: list = []
    for vid, dist_v in ring:
        vloc = PointLocation("vertex", vid)
        link = link_at(x, vloc, allow_partial=True)
        if link.partial:
            skipped.append({"at": f"v:{vid}", "reason": "frontier link"})
            continue
        g_s = link.graph.restrict(link.subgraph_for(sfaces, sedges))
        gp = geodesic(x, vloc, p_loc)
        log_pt = _seg_link_point(x, link, gp.segments[0], "out")
        if (log_pt.kind == "v" and log_pt.id not in g_s.adj) or \
                (log_pt.kind == "e" and log_pt.id not in g_s.edges):
            skipped.append({"at": f"v:{vid}",
                            "reason": "direction of center leaves the support"})
            continue
        pvd = g_s.point_vertex_distances(log_pt)
        for w in sorted(g_s.adj):
            if pvd.get(w, 0.0) < PI / 2.0 + PI / 8.0 - 1e-7:
                continue
            try:
                tau = semicircle_centered(g_s, GraphPoint("v", w), at=f"v:{vid}")
                region = semicircle_halfplane(
                    x, S, vloc, tau, alpha, avoid=p_loc, avoid_radius=r1,
                    n_rays=n_rays)
            except (CatflatError, NoAntipode) as exc:
                skipped.append({"at": f"v:{vid}", "v": w, "reason": str(exc)})
                continue
            h = maximal_halfplane_subcomplex(x, region)
            if h.empty:
                skipped.append({"at": f"v:{vid}", "v": w,
                                "reason": h.reason or "empty half-grid"})
                continue
            if h.key() in keys:
                continue
            keys.add(h.key())
            halfplanes.append(h)

    covered = set()
    for h in halfplanes:
        covered.update(h.faces)
    core = tuple(sorted(set(sfaces) - covered))

    uncovered = []
    for fid in core:
        f = x.faces[fid]
        worst = 0.0
        for c in f.chart:
            _, ub = fld.bounds(fid, tuple(c))
            worst = max(worst, ub)
        if worst > bound + 1e-7:
            uncovered.append(fid)
    near_ok = True
    near = []
    for h in halfplanes:
        best = math.inf
        for fid in h.boundary_squares:
            f = x.faces[fid]
            for c in f.chart:
                _, ub = fld.bounds(fid, tuple(c))
                best = min(best, ub)
        near.append(best)
        if best > 1.0 + r2 + 1e-7:
            near_ok = False

    cert = {
        "clearance": clearance,
        "core_bound": bound,
        "core_faces": len(core),
        "halfplane_faces": len(covered),
        "support_faces": len(sfaces),
        "core_bounded": not uncovered,
        "uncovered": uncovered,
        "halfplane_near": near_ok,
        "near_distances": near,
        "distinct_boundaries": True,
        "link_family": len(family),
        "suspension_modulus": None if modulus is None else
        (modulus.beta if math.isfinite(modulus.beta) else "inf"),
        "ok": (not uncovered) and near_ok,
    }
    return Decomposition(p_loc.brief(), r2, alpha, r1, core, halfplanes,
                         skipped, cert)
