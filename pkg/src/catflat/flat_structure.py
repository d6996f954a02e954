"""Area densities, point classes, level-set fibers, and branch certificates
for supports inside CAT(0) complexes.

Everything here runs off one primitive: the distance field of a source
point, stored per face as a short list of unfolded straight-line terms.
Evaluating the terms without their corridor test gives a certified lower
bound for d(p, .); with the test, an upper bound.  The two agree wherever
the search found the corridor of the true geodesic, which it does for
every point within the working radius, so areas come with honest error
bars even when the envelope is locally loose.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

from . import geom
from .complex_core import PEComplex, PointLocation, parse_location
from .errors import (CatflatError, GeodesicExitsTruncation, InvalidLocation,
                     TruncationTooSmall)
from .geodesics import (GeodesicPath, PathSegment, _seg_link_point,
                        extend_in_subcomplex, geodesic)
from .link_graphs import (GEdge, MetricGraph, girth, link_at,
                          suspension_structure)

TWO_PI = 2.0 * math.pi
_FIELD_MARGIN = 3.0       # corridor search overshoot past the queried radius
_DEPTH_CAP = 12
_STATE_CAP = 200_000
_CORRIDOR_CAP = 96        # portals per corridor


# ---------------------------------------------------------------------------
# distance field


def _point_diameter(g: MetricGraph) -> float:
    """Diameter of a metric graph over edge-interior points, not just its
    vertices.  For each edge pair the distance is a lower envelope of linear
    functions of the two offsets; the maximum sits at an arrangement vertex,
    so finitely many candidates suffice."""
    D = g.all_pairs()
    eids = sorted(g.edges)
    best = 0.0
    for ii, ei in enumerate(eids):
        e = g.edges[ei]
        le = e.length
        u0, u1 = e.ends
        best = max(best, 0.5 * (D[u0][u1] + le))
        for ej in eids[ii + 1:]:
            f = g.edges[ej]
            lf = f.length
            v0, v1 = f.ends
            A, B = D[u0][v0], D[u0][v1]
            C, E = D[u1][v0], D[u1][v1]
            if math.isinf(A):
                return math.inf
            # envelope of A+s+t, B+s+lf-t, C+le-s+t, E+le-s+lf-t
            planes = ((1.0, 1.0, A), (1.0, -1.0, B + lf),
                      (-1.0, 1.0, C + le), (-1.0, -1.0, E + le + lf))
            cands = [(0.0, 0.0), (le, 0.0), (0.0, lf), (le, lf)]
            lines = []
            for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(planes, 2):
                lines.append((a1 - a2, b1 - b2, c2 - c1))
            for la, lb_, lc in lines:
                for a1, b1, c1, a2, b2, c2 in (
                        (la, lb_, lc, 1.0, 0.0, 0.0),
                        (la, lb_, lc, 1.0, 0.0, le),
                        (la, lb_, lc, 0.0, 1.0, 0.0),
                        (la, lb_, lc, 0.0, 1.0, lf)):
                    det = a1 * b2 - a2 * b1
                    if abs(det) < 1e-12:
                        continue
                    s = (c1 * b2 - c2 * b1) / det
                    t = (a1 * c2 - a2 * c1) / det
                    cands.append((s, t))
            for (l1, l2) in itertools.combinations(lines, 2):
                det = l1[0] * l2[1] - l2[0] * l1[1]
                if abs(det) < 1e-12:
                    continue
                s = (l1[2] * l2[1] - l2[2] * l1[1]) / det
                t = (l1[0] * l2[2] - l2[0] * l1[2]) / det
                cands.append((s, t))
            for s, t in cands:
                if -1e-9 <= s <= le + 1e-9 and -1e-9 <= t <= lf + 1e-9:
                    val = min(pa * s + pb * t + pc for pa, pb, pc in planes)
                    best = max(best, val)
    return best


def _pivot_vertices(x: PEComplex) -> list:
    """Vertices where geodesics can bend strictly: link diameter beyond pi.
    These act as secondary sources for the distance field.  Frontier
    vertices are skipped (censored surroundings).  A vertex whose corner
    count matches its edge-end count and whose angles sum to at most 2*pi
    has a single-circle link of that length under the link condition, hence
    diameter at most pi: the common flat case, skipped cheaply."""
    got = x._cache.get("pivot_vertices")
    if got is not None:
        return got
    out = []
    for vid in x.vertices:
        if vid in x.frontier_vertices:
            continue
        total = sum(x.faces[fid].angles[ci] for fid, ci in x.vertex_corners[vid])
        if total <= TWO_PI + 1e-9 and \
                len(x.vertex_corners[vid]) == len(x.vertex_edge_ends[vid]):
            continue
        link = link_at(x, PointLocation("vertex", vid), allow_partial=True)
        if link.partial:
            continue
        if _point_diameter(link.graph) > math.pi + 1e-7:
            out.append(vid)
    x._cache["pivot_vertices"] = out
    return out


def _corridor_ok(z, y, portals) -> bool:
    """Does the straight segment z -> y cross every portal inside its extent,
    in corridor order?  Ordered crossings of the sides of convex faces fold
    back to a genuine path of the same length."""
    dx, dy = y[0] - z[0], y[1] - z[1]
    t_prev = -1e-9
    for a, b in portals:
        ex, ey = b[0] - a[0], b[1] - a[1]
        den = dx * ey - dy * ex
        wx, wy = a[0] - z[0], a[1] - z[1]
        if abs(den) < 1e-14:
            # parallel ray: fine only when z sits on the portal itself
            if abs(wx * ey - wy * ex) > 1e-9:
                return False
            continue
        t = (wx * ey - wy * ex) / den
        if t < t_prev - 1e-9 or t > 1.0 + 1e-9:
            return False
        s = (wx * dy - wy * dx) / den
        if s < -1e-7 or s > 1.0 + 1e-7:
            return False
        t_prev = max(t_prev, t)
    return True


def _wedge_cross(u, v) -> float:
    return u[0] * v[1] - u[1] * v[0]


def _unit_to(q, z):
    dx, dy = q[0] - z[0], q[1] - z[1]
    n = math.hypot(dx, dy)
    return (dx / n, dy / n)


def _rot_eps(u, s):
    c, sn = math.cos(s), math.sin(s)
    return (u[0] * c - u[1] * sn, u[0] * sn + u[1] * c)


def _wedge_after(wedge, z, chart, pos):
    """Intersect a direction wedge at z (None = all directions) with the cone
    of directions that genuinely enter the face through side pos of chart.
    Returns the new wedge, or False when it closes.  Wedges are (left, right)
    unit vectors, counterclockwise left to right, span under pi; zero-width
    wedges count as closed, since exactly-grazing rays are covered by the
    tolerance of the evaluation-time corridor test."""
    n = len(chart)
    a, b = chart[pos], chart[(pos + 1) % n]
    dax, day = a[0] - z[0], a[1] - z[1]
    dbx, dby = b[0] - z[0], b[1] - z[1]
    la = math.hypot(dax, day)
    lb_ = math.hypot(dbx, dby)
    if la <= 1e-9:
        # source sits on this corner: the interior cone of the face there
        cone = (_unit_to(b, a), _unit_to(chart[(pos - 1) % n], a))
    elif lb_ <= 1e-9:
        cone = (_unit_to(chart[(pos + 2) % n], b), _unit_to(a, b))
    else:
        da = (dax / la, day / la)
        db = (dbx / lb_, dby / lb_)
        c = _wedge_cross(da, db)
        if abs(c) <= 1e-12:
            if da[0] * db[0] + da[1] * db[1] < 0.0:
                # source interior to the entry side: the half-plane inside,
                # pulled in a hair to keep the span under pi
                e = _unit_to(b, a)
                cone = (_rot_eps(e, 1e-9), _rot_eps((-e[0], -e[1]), -1e-9))
            else:
                return False    # grazing along the side line
        else:
            if c < 0:
                da, db = db, da
            cone = (da, db)
    if wedge is None:
        return cone
    dl, dr = wedge
    da, db = cone
    left = da if _wedge_cross(dl, da) >= 0.0 else dl
    right = dr if _wedge_cross(dr, db) >= 0.0 else db
    if _wedge_cross(left, right) < 1e-12:
        return False
    return (left, right)


class DistanceField:
    """Per-face unfolded-distance terms for one source point.

    A term (offset, anchor, portals) says: paths from the source enter this
    face through the chain of side segments `portals` (stored in this face's
    chart frame), the source unfolding to the plane point `anchor`; `offset`
    is zero for straight routes and the exact source-to-vertex distance for
    routes pivoting at a cone vertex.  Corridors are pruned once their entry
    portal is farther than rmax, so faces with no terms are entirely farther
    than rmax from the source.
    """

    def __init__(self, x: PEComplex, p: PointLocation, rmax: float):
        self.x = x
        self.p = x.locate(p)
        self.rmax = float(rmax)
        self.terms: dict = {}
        self._iso = {}
        self._run()

    # -- construction --------------------------------------------------

    def _sources(self):
        out = [(0.0, self.p)]
        for vid in _pivot_vertices(self.x):
            loc = PointLocation("vertex", vid)
            if self.x.same_point(self.p, loc):
                continue
            try:
                d = geodesic(self.x, self.p, loc).length
            except GeodesicExitsTruncation:
                continue        # pivot beyond the trusted region
            if d <= self.rmax + 1e-9:
                out.append((d, loc))
        return out

    def _cross(self, fid, i, gid, j):
        key = (fid, i, gid, j)
        got = self._iso.get(key)
        if got is None:
            x = self.x
            f, g = x.faces[fid], x.faces[gid]
            fa, fb = x.side_endpoints(fid, i)
            ga, gb = x.side_endpoints(gid, j)
            if f.dirs[i] != 1:
                fa, fb = fb, fa
            if g.dirs[j] != 1:
                ga, gb = gb, ga
            # charts are CCW, interiors left of each directed side; unfolding
            # must land the neighbour on the far side, so it reflects exactly
            # when both sides run the edge the same way
            iso = geom.Isometry.from_segment_map(fa, fb, ga, gb,
                                                 flip=f.dirs[i] == g.dirs[j])
            det = iso.m00 * iso.m11 - iso.m01 * iso.m10
            got = (iso, det)
            self._iso[key] = got
        return got

    def _run(self):
        # Corridor search: each state is one unfolded route, keeping the
        # wedge of directions at the unfolded source that still cross all
        # its portals.  Routes whose wedge closes are dead: no straight
        # segment uses them.  The route a geodesic itself takes always
        # survives, so upper bounds from the terms are exact within rmax.
        x = self.x
        heap = []
        cnt = itertools.count()
        for off, src in self._sources():
            for fid in x.faces_at(src):
                z = x.embed(src, fid)
                heapq.heappush(heap, (off, next(cnt), fid, off, z, None, (),
                                      None))
        popped = 0
        while heap:
            _, _, fid, off, z, wedge, portals, entry = heapq.heappop(heap)
            popped += 1
            if popped > _STATE_CAP:
                raise CatflatError("distance field search exceeded its state budget")
            self.terms.setdefault(fid, []).append((off, z, portals))
            if len(portals) >= _CORRIDOR_CAP:
                continue
            f = x.faces[fid]
            for i in range(f.nsides):
                if i == entry:
                    continue    # a straight segment cannot recross its entry side
                for gid, pos in x.edge_faces[f.loop[i]]:
                    if gid == fid and pos == i:
                        continue
                    iso, det = self._cross(fid, i, gid, pos)
                    z2 = iso.apply(z)
                    a2, b2 = x.side_endpoints(gid, pos)
                    lb2 = off + geom.point_segment_dist(z2, a2, b2)
                    if lb2 > self.rmax + 1e-9:
                        continue
                    if wedge is None:
                        wedge2 = None
                    else:
                        dl, dr = wedge
                        dl2, dr2 = iso.apply_vec(dl), iso.apply_vec(dr)
                        wedge2 = (dl2, dr2) if det > 0 else (dr2, dl2)
                    wedge2 = _wedge_after(wedge2, z2, x.faces[gid].chart, pos)
                    if wedge2 is False:
                        continue
                    portals2 = tuple((iso.apply(pa), iso.apply(pb))
                                     for pa, pb in portals) + ((a2, b2),)
                    heapq.heappush(heap, (lb2, next(cnt), gid, off, z2,
                                          wedge2, portals2, pos))

    # -- evaluation ----------------------------------------------------

    def bounds(self, fid: str, y) -> tuple:
        """(lower, upper) bounds on d(source, y) for chart point y of face
        fid.  The lower bound is capped at rmax (a face with no terms is
        certifiably farther than that); the upper bound is inf when no
        discovered corridor passes its validity test at y."""
        ts = self.terms.get(fid)
        if not ts:
            return self.rmax, math.inf
        vals = sorted((off + math.hypot(z[0] - y[0], z[1] - y[1]), k)
                      for k, (off, z, _) in enumerate(ts))
        lb = vals[0][0]
        ub = math.inf
        for v, k in vals:
            if _corridor_ok(ts[k][1], y, ts[k][2]):
                ub = v
                break
        return min(lb, self.rmax), ub

    def value(self, fid: str, y) -> float:
        lb, ub = self.bounds(fid, y)
        return ub if math.isfinite(ub) else lb

    def frontier_clearance(self) -> float:
        """Certified lower bound on the source-to-frontier distance, capped
        at rmax."""
        x = self.x
        best = self.rmax
        for eid in sorted(x.frontier_edges):
            for fid, pos in x.edge_faces[eid]:
                ts = self.terms.get(fid)
                if not ts:
                    continue
                a, b = x.side_endpoints(fid, pos)
                for off, z, _ in ts:
                    best = min(best, off + geom.point_segment_dist(z, a, b))
        for vid in sorted(x.frontier_vertices):
            for fid, ci in x.vertex_corners[vid]:
                ts = self.terms.get(fid)
                if not ts:
                    continue
                c = x.faces[fid].chart[ci]
                for off, z, _ in ts:
                    best = min(best, off + geom.dist(z, c))
        return best


def _field(x: PEComplex, p: PointLocation, rmax: float) -> DistanceField:
    cache = x._cache.setdefault("distance_fields", {})
    key = x.locate(p).brief()
    f = cache.get(key)
    if f is None or f.rmax < rmax - 1e-9:
        f = DistanceField(x, p, rmax)
        cache[key] = f
    return f


# ---------------------------------------------------------------------------
# ball areas and density profiles


@dataclass(frozen=True)
class AreaEstimate:
    value: float
    error: float

    def to_data(self) -> dict:
        return {"value": self.value, "error": self.error}


def _poly_area(poly) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        s += a[0] * b[1] - b[0] * a[1]
    return 0.5 * abs(s)


def _split_cell(poly):
    if len(poly) == 3:
        a, b, c = poly
        ab = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
        bc = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
        ca = ((c[0] + a[0]) / 2, (c[1] + a[1]) / 2)
        return ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))
    a, b, c, d = poly
    ab = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
    bc = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
    cd = ((c[0] + d[0]) / 2, (c[1] + d[1]) / 2)
    da = ((d[0] + a[0]) / 2, (d[1] + a[1]) / 2)
    m = ((a[0] + b[0] + c[0] + d[0]) / 4, (a[1] + b[1] + c[1] + d[1]) / 4)
    return ((a, ab, m, da), (ab, b, bc, m), (m, bc, c, cd), (da, m, cd, d))


def ball_area(x: PEComplex, S, p: PointLocation, r: float,
              tol: float | None = None) -> AreaEstimate:
    """Area of {y in S : d(p, y) <= r}, with a certified error bar.

    Faces are subdivided adaptively; a cell is resolved once the distance
    bounds at its centre, padded by the cell radius, put it entirely inside
    or outside the ball (d is 1-Lipschitz against chart distance).  Cells
    still straddling the sphere at depth 12 raise; unresolved cells within
    budget are counted at half weight and reported as the error.
    """
    p = x.locate(p)
    if r <= 0:
        raise ValueError("ball radius must be positive")
    if tol is None:
        tol = 0.01 * r * r
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    field = _field(x, p, r + _FIELD_MARGIN)
    if field.frontier_clearance() <= r:
        raise TruncationTooSmall(
            f"ball of radius {r} at {p.brief()} may reach the frontier")

    area_in = 0.0
    boundary: list = []

    def consider(fid, poly, sink):
        nonlocal area_in
        cx = sum(q[0] for q in poly) / len(poly)
        cy = sum(q[1] for q in poly) / len(poly)
        rho = max(math.hypot(q[0] - cx, q[1] - cy) for q in poly)
        lb, ub = field.bounds(fid, (cx, cy))
        if ub + rho <= r + 1e-12:
            area_in += _poly_area(poly)
        elif lb - rho > r - 1e-12:
            pass
        else:
            sink.append((fid, poly))

    for fid in sorted(set(S.faces)):
        if fid not in field.terms:
            continue            # certifiably farther than r
        consider(fid, tuple(tuple(q) for q in x.faces[fid].chart), boundary)

    depth = 0
    while boundary:
        unresolved = sum(_poly_area(q) for _, q in boundary)
        if unresolved <= 2.0 * tol:
            break
        if depth >= _DEPTH_CAP:
            raise CatflatError(
                f"ball_area cannot reach tolerance {tol} within subdivision "
                f"depth {_DEPTH_CAP} (unresolved area {unresolved:.3g})")
        depth += 1
        nxt: list = []
        for fid, poly in boundary:
            for child in _split_cell(poly):
                consider(fid, child, nxt)
        boundary = nxt
        if len(boundary) > 400_000:
            raise CatflatError(
                "ball_area boundary refinement exploded; the distance "
                "bounds are too loose for this configuration")
    unresolved = sum(_poly_area(q) for _, q in boundary)
    return AreaEstimate(area_in + 0.5 * unresolved, 0.5 * unresolved)


@dataclass
class DensityProfile:
    """Area ratios Area(B(p, r) cap S) / r^2 over a ladder of radii."""

    center: str
    radii: list
    areas: list
    ratios: list
    ratio_errors: list
    monotone: bool
    in_support: bool
    lower_bound_ok: bool | None    # None when the centre is outside S
    flat_equality: bool
    limit: float
    trend: str

    def to_data(self) -> dict:
        return {"center": self.center, "radii": list(self.radii),
                "areas": [a.to_data() for a in self.areas],
                "ratios": list(self.ratios),
                "ratio_errors": list(self.ratio_errors),
                "monotone": self.monotone, "in_support": self.in_support,
                "lower_bound_ok": self.lower_bound_ok,
                "flat_equality": self.flat_equality,
                "limit": self.limit, "trend": self.trend}


def density_profile(x: PEComplex, S, p: PointLocation, radii,
                    tol: float | None = None) -> DensityProfile:
    """Ball areas over increasing radii, their r^2 ratios, and the verdicts:
    monotonicity within error bars, the lower bound >= pi for centres in the
    support, and the equality flag that marks flat-looking profiles."""
    p = x.locate(p)
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or \
            any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly increasing")
    areas = [ball_area(x, S, p, r, tol) for r in radii]
    ratios = [a.value / (r * r) for a, r in zip(areas, radii)]
    errs = [a.error / (r * r) for a, r in zip(areas, radii)]
    monotone = all(ratios[i + 1] + errs[i + 1] >= ratios[i] - errs[i] - 1e-12
                   for i in range(len(ratios) - 1))
    in_support = S.contains(p)
    lb_ok = None
    if in_support:
        lb_ok = all(v >= math.pi - e - 1e-12 for v, e in zip(ratios, errs))
    flat_eq = in_support and all(abs(v - math.pi) <= e + 1e-12
                                 for v, e in zip(ratios, errs))
    if len(ratios) >= 2:
        d = ratios[-1] - ratios[-2]
        comb = errs[-1] + errs[-2]
        trend = "stable" if abs(d) <= comb else \
            ("increasing" if d > 0 else "decreasing")
    else:
        trend = "stable"
    return DensityProfile(p.brief(), radii, areas, ratios, errs, monotone,
                          in_support, lb_ok, flat_eq, ratios[-1], trend)


# ---------------------------------------------------------------------------
# point classification


@dataclass(frozen=True)
class PointClass:
    kind: str                  # flat | singular_line | vertex_like | frontier_censored
    valence: int | None
    snapshot: dict

    def to_data(self) -> dict:
        return {"kind": self.kind, "valence": self.valence,
                "snapshot": dict(self.snapshot)}


def _is_circle(g: MetricGraph) -> bool:
    if not g.edges:
        return False
    if any(len(g.adj.get(v, ())) != 2 for v in g.vertices):
        return False
    verts = list(g.vertices)
    seen = {verts[0]}
    stack = [verts[0]]
    while stack:
        v = stack.pop()
        for _, w, _ in g.adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(verts)


def classify_point(x: PEComplex, S, at: PointLocation,
                   tol: float = 1e-9) -> PointClass:
    """Local type of a support point, read off the link of at restricted to
    directions into S: a circle of length exactly 2*pi is flat, a suspension
    of i >= 3 points is a singular line of valence i, anything else (longer
    circles included) is vertex-like.  Points whose link is truncated by the
    frontier come back censored rather than misclassified."""
    at = x.locate(at)
    if not S.contains(at):
        raise InvalidLocation(f"{at.brief()} is not in the support")
    if x.is_frontier(at) or (at.kind == "vertex" and at.id in x.frontier_vertices):
        return PointClass("frontier_censored", None, {})
    link = link_at(x, at, allow_partial=True)
    if link.partial:
        return PointClass("frontier_censored", None, {})
    g = link.graph.restrict(link.subgraph_for(S.faces, S.edges))
    total = sum(e.length for e in g.edges.values())
    gg = girth(g)
    snap = {"nodes": len(g.vertices), "arcs": len(g.edges),
            "total_length": total,
            "girth": None if math.isinf(gg) else gg}
    if _is_circle(g):
        if abs(total - TWO_PI) <= tol:
            return PointClass("flat", None, snap)
        return PointClass("vertex_like", None, snap)
    sd = suspension_structure(g)
    if sd is not None and sd.arc_count >= 3:
        return PointClass("singular_line", sd.arc_count, snap)
    return PointClass("vertex_like", None, snap)


# ---------------------------------------------------------------------------
# fibers of the distance function


def _bisect_root(fun, ta, tb, va):
    for _ in range(60):
        tm = 0.5 * (ta + tb)
        vm = fun(tm)
        if vm == 0.0:
            return tm
        if (va < 0) != (vm < 0):
            tb = tm
        else:
            ta, va = tm, vm
    return 0.5 * (ta + tb)


def _march_face(field: DistanceField, fid: str, poly, r: float, n: int):
    """Marching-squares polylines of {d = r} over the face's bounding box.
    Returns (chains, cell): chains are ("open"|"closed", [points]) with
    points inside the face (midpoint test for triangle charts)."""
    xs = [q[0] for q in poly]
    ys = [q[1] for q in poly]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    hx = (x1 - x0) / n
    hy = (y1 - y0) / n
    vals = [[field.value(fid, (x0 + i * hx, y0 + j * hy)) - r
             for j in range(n + 1)] for i in range(n + 1)]

    def key_pt(k):
        kind, i, j = k
        if kind == "h":
            va, vb = vals[i][j], vals[i + 1][j]
            t = va / (va - vb)
            return (x0 + (i + t) * hx, y0 + j * hy)
        va, vb = vals[i][j], vals[i][j + 1]
        t = va / (va - vb)
        return (x0 + i * hx, y0 + (j + t) * hy)

    triangle = len(poly) == 3
    segs = []
    for i in range(n):
        for j in range(n):
            b0 = vals[i][j] < 0.0
            b1 = vals[i + 1][j] < 0.0
            b2 = vals[i + 1][j + 1] < 0.0
            b3 = vals[i][j + 1] < 0.0
            B, T = ("h", i, j), ("h", i, j + 1)
            L, R = ("v", i, j), ("v", i + 1, j)
            crossed = []
            if b0 != b1:
                crossed.append(B)
            if b1 != b2:
                crossed.append(R)
            if b3 != b2:
                crossed.append(T)
            if b0 != b3:
                crossed.append(L)
            if len(crossed) == 2:
                pairs = (tuple(crossed),)
            elif len(crossed) == 4:
                centre = field.value(fid, (x0 + (i + 0.5) * hx,
                                           y0 + (j + 0.5) * hy)) - r
                joined = centre < 0.0
                if b0:
                    pairs = ((B, R), (T, L)) if joined else ((B, L), (R, T))
                else:
                    pairs = ((B, L), (R, T)) if joined else ((B, R), (T, L))
            else:
                continue
            for ka, kb in pairs:
                if triangle:
                    pa, pb = key_pt(ka), key_pt(kb)
                    mid = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2)
                    if not geom.point_in_convex(mid, list(poly), tol=1e-9):
                        continue
                segs.append((ka, kb))

    adj: dict = {}
    for idx, (ka, kb) in enumerate(segs):
        adj.setdefault(ka, []).append(idx)
        adj.setdefault(kb, []).append(idx)
    used = [False] * len(segs)
    chains = []

    def walk(start_key):
        pts = [key_pt(start_key)]
        cur = start_key
        while True:
            nxt_idx = None
            for idx in adj.get(cur, ()):
                if not used[idx]:
                    nxt_idx = idx
                    break
            if nxt_idx is None:
                return "open", pts, cur
            used[nxt_idx] = True
            ka, kb = segs[nxt_idx]
            cur = kb if ka == cur else ka
            pts.append(key_pt(cur))
            if cur == start_key:
                return "closed", pts, cur

    for k in sorted(k for k, lst in adj.items() if len(lst) == 1):
        if all(used[i] for i in adj[k]):
            continue
        kind, pts, _ = walk(k)
        chains.append((kind, pts))
    for idx in range(len(segs)):
        if not used[idx]:
            kind, pts, _ = walk(segs[idx][0])
            chains.append((kind, pts))
    return chains, max(hx, hy)


def fiber_graph(x: PEComplex, S, p: PointLocation, r: float,
                resolution: int | None = None):
    """Level set {y in S : d(p, y) = r} as a metric graph plus a valence
    report.

    Nodes are the crossings of the level set with support edges (snapped to
    vertices when a crossing lands on one); arcs are marching polylines
    across single faces, so a singular edge with k support sheets yields
    valence-k nodes.  Arc lengths are polyline approximations; the graph
    structure and the valences are the combinatorial deliverable.
    """
    p = x.locate(p)
    if r <= 0:
        raise ValueError("fiber radius must be positive")
    field = _field(x, p, r + _FIELD_MARGIN)
    if field.frontier_clearance() <= r:
        raise TruncationTooSmall(
            f"the level set at radius {r} may touch the frontier")

    sfaces = set(S.faces)
    node_loc: dict = {}
    edge_nodes: dict = {}

    # 1) crossings along support edges, shared between their faces
    for eid in sorted(S.edges):
        adj_faces = [fid for fid, _ in x.edge_faces[eid] if fid in sfaces]
        fev = next((f for f in adj_faces if f in field.terms), None)
        if fev is None:
            continue
        e = x.edges[eid]

        def fe(t, _eid=eid, _fid=fev):
            y = x.embed(PointLocation("edge", _eid,
                                      param=min(max(t, 0.0), 1.0)), _fid)
            return field.value(_fid, y) - r

        steps = max(32, min(4096, int(math.ceil(e.length * 64))))
        ts = [k / steps for k in range(steps + 1)]
        vs = [fe(t) for t in ts]
        # zeros lean outside: tangential touches are not crossings
        sg = [1 if v >= 0.0 else -1 for v in vs]
        roots = []
        for k in range(steps):
            if sg[k] != sg[k + 1]:
                va = vs[k] if vs[k] != 0.0 else -1e-300 * sg[k + 1]
                roots.append(_bisect_root(fe, ts[k], ts[k + 1], va))
        roots.sort()
        cleaned = []
        for t in roots:
            if not cleaned or t - cleaned[-1] > 0.25 / steps:
                cleaned.append(t)
        lst = []
        for idx, t in enumerate(cleaned):
            if t * e.length < 1e-7:
                nid, loc = f"xv:{e.ends[0]}", PointLocation("vertex", e.ends[0])
            elif (1.0 - t) * e.length < 1e-7:
                nid, loc = f"xv:{e.ends[1]}", PointLocation("vertex", e.ends[1])
            else:
                nid, loc = f"x:{eid}:{idx}", PointLocation("edge", eid, param=t)
            node_loc[nid] = loc
            if not any(n == nid for _, n in lst):
                lst.append((t, nid))
        if lst:
            edge_nodes[eid] = lst

    # 2) polylines across faces, ends snapped to the shared edge crossings
    arcs = []
    aseq = itertools.count()
    for fid in sorted(sfaces):
        if fid not in field.terms:
            continue
        f = x.faces[fid]
        poly = tuple(tuple(q) for q in f.chart)
        cx = sum(q[0] for q in poly) / len(poly)
        cy = sum(q[1] for q in poly) / len(poly)
        rho = max(math.hypot(q[0] - cx, q[1] - cy) for q in poly)
        lb, ub = field.bounds(fid, (cx, cy))
        if lb - rho > r + 1e-9:
            continue
        if math.isfinite(ub) and ub + rho < r - 1e-9:
            continue
        extent = max(max(q[0] for q in poly) - min(q[0] for q in poly),
                     max(q[1] for q in poly) - min(q[1] for q in poly))
        if resolution is not None:
            n = resolution
        else:
            target = min(1.0 / 32.0, r / 16.0)
            n = max(16, min(128, int(math.ceil(extent / target))))
        chains, cell = _march_face(field, fid, poly, r, n)
        snap_tol = 3.0 * cell * math.sqrt(2.0)

        def attach(pt):
            best = None
            for i in range(f.nsides):
                a, b = x.side_endpoints(fid, i)
                if geom.point_segment_dist(pt, a, b) > snap_tol:
                    continue
                for _, nid in edge_nodes.get(f.loop[i], ()):
                    np_ = x.embed(node_loc[nid], fid)
                    d = geom.dist(pt, np_)
                    if d <= snap_tol and (best is None or d < best[0]):
                        best = (d, nid, np_)
            if best is None:
                raise CatflatError(
                    f"fiber endpoint in face {fid} found no edge crossing "
                    f"to attach to (radius {r})")
            return best[1], best[2]

        for kind, pts in chains:
            if kind == "closed":
                if len(pts) < 3:
                    continue
                nid = f"o:{fid}:{next(aseq)}"
                node_loc[nid] = x.locate(PointLocation("face", fid,
                                                       coords=pts[0]))
                length = sum(geom.dist(pts[k], pts[k + 1])
                             for k in range(len(pts) - 1))
                arcs.append((f"c{next(aseq)}", nid, nid, max(length, 1e-9)))
            else:
                na, pa = attach(pts[0])
                nb, pb = attach(pts[-1])
                chain = [pa] + pts + [pb]
                length = sum(geom.dist(chain[k], chain[k + 1])
                             for k in range(len(chain) - 1))
                if na == nb and length <= 3.0 * cell:
                    continue    # corner clip at an exact vertex hit
                arcs.append((f"c{next(aseq)}", na, nb, max(length, 1e-9)))

    nodes = sorted(node_loc)
    g = MetricGraph(nodes, [GEdge(aid, (na, nb), ln)
                            for aid, na, nb, ln in arcs])
    deg = {v: len(g.adj.get(v, ())) for v in nodes}
    hist: dict = {}
    for d in deg.values():
        hist[d] = hist.get(d, 0) + 1
    seen: set = set()
    comps = 0
    for v in nodes:
        if v in seen:
            continue
        comps += 1
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            for _, w, _ in g.adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    report = {"radius": r,
              "nodes": len(nodes),
              "arcs": len(arcs),
              "valences": {str(k): hist[k] for k in sorted(hist)},
              "components": comps,
              "branch_nodes": sorted(v for v, d in deg.items() if d >= 3),
              "circle": comps == 1 and all(d == 2 for d in deg.values()),
              "total_length": sum(a[3] for a in arcs),
              "node_points": {nid: node_loc[nid].brief() for nid in nodes}}
    return g, report


# ---------------------------------------------------------------------------
# branch detection


@dataclass
class BranchCertificate:
    """An embedded product ball around a singular-line point: i flat
    half-strips glued along a geodesic segment, verified by comparing
    sampled distances against the product model."""

    center: str
    radius: float
    valence: int
    sheets: list
    line_ends: list
    samples: list
    max_model_error: float
    checks: dict

    def to_data(self) -> dict:
        return {"center": self.center, "radius": self.radius,
                "valence": self.valence, "sheets": list(self.sheets),
                "line_ends": list(self.line_ends),
                "samples": [dict(s) for s in self.samples],
                "max_model_error": self.max_model_error,
                "checks": dict(self.checks)}


def _singular_edge_test(x, S):
    cache: dict = {}

    def test(eid):
        got = cache.get(eid)
        if got is None:
            if eid not in S.edges:
                got = False
            else:
                try:
                    pc = classify_point(x, S, PointLocation("edge", eid, param=0.5))
                    got = pc.kind == "singular_line"
                except InvalidLocation:
                    got = False
            cache[eid] = got
        return got

    return test


def _walk_line(x, is_singular, start: PointLocation, offset: float) -> PointLocation:
    """Point at a signed arc-length offset along the singular line through an
    edge-interior start (positive toward the edge's second end).  The line
    must continue uniquely through every vertex passed."""
    eid, t = start.id, start.param
    sign = 1 if offset >= 0 else -1
    rem = abs(offset)
    if rem == 0.0:
        return start
    while True:
        L = x.edges[eid].length
        avail = (1.0 - t) * L if sign > 0 else t * L
        if rem <= avail - 1e-12:
            t2 = t + sign * rem / L
            return PointLocation("edge", eid, param=t2)
        rem -= avail
        v = x.edges[eid].ends[1 if sign > 0 else 0]
        if v in x.frontier_vertices:
            raise TruncationTooSmall(
                f"singular line reaches the frontier at {v}")
        if rem <= 1e-12:
            return PointLocation("vertex", v)
        cand = [(e2, end) for e2, end in x.vertex_edge_ends[v]
                if e2 != eid and is_singular(e2)]
        if len(cand) != 1:
            raise CatflatError(
                f"singular line does not continue uniquely at {v}")
        eid, enter_end = cand[0]
        t = 0.0 if enter_end == 0 else 1.0
        sign = 1 if enter_end == 0 else -1


def _line_point(x, is_singular, z, a):
    loc = _walk_line(x, is_singular, z, a)
    if loc.kind != "edge":
        nudged = a + (0.0703125 if a >= 0 else -0.0703125)
        loc = _walk_line(x, is_singular, z, nudged)
        if loc.kind != "edge":
            raise CatflatError("line sample landed on vertices twice")
    return loc


def _sheet_components(x, S, line_edges):
    """Faces adjacent to the walked line edges, grouped into sheets: faces
    sharing a non-line edge are the same sheet.  Returns {face: label} with
    the lexicographically least member as the label."""
    line_set = set(line_edges)
    faces = sorted({fid for eid in line_edges
                    for fid, _ in x.edge_faces[eid] if fid in set(S.faces)})
    parent = {f: f for f in faces}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    fset = set(faces)
    for fid in faces:
        for eid in x.faces[fid].loop:
            if eid in line_set:
                continue
            for gid, _ in x.edge_faces[eid]:
                if gid in fset and gid != fid:
                    ra, rb = find(fid), find(gid)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
    return {f: find(f) for f in faces}


def _perp_point(x, S, w: PointLocation, fid: str, h: float) -> PointLocation:
    """Point at distance h from the line point w, straight into face fid."""
    base = x.embed(w, fid)
    pos = next(pos for f2, pos in x.edge_faces[w.id] if f2 == fid)
    a, b = x.side_endpoints(fid, pos)
    nrm = geom.unit(geom.perp(geom.sub(b, a)))   # CCW chart: left is inward
    s_exit, _ = _ray_exit(x, fid, base, nrm)
    if h <= s_exit - 1e-9:
        return x.locate(PointLocation("face", fid,
                                      coords=geom.add(base, geom.scale(nrm, h))))
    delta = 0.5 * s_exit
    mid = geom.add(base, geom.scale(nrm, delta))
    seed = GeodesicPath((w, x.locate(PointLocation("face", fid, coords=mid))),
                        [PathSegment("face", fid, base, mid, delta)],
                        [f"f:{fid}"], delta, [])
    ext = extend_in_subcomplex(x, S, seed, h)
    if ext.partial:
        raise TruncationTooSmall("branch ball leaves the truncated region")
    return x.locate(ext.endpoints[1])


def _ray_exit(x, fid, base, d):
    best = None
    f = x.faces[fid]
    for i in range(f.nsides):
        a, b = x.side_endpoints(fid, i)
        hit = geom.ray_segment_hit(base, d, a, b)
        if hit is not None and (best is None or hit[0] < best[0]):
            best = (hit[0], i)
    if best is None:
        raise CatflatError(f"ray does not leave face {fid}")
    return best


def _model_dist(m1, m2) -> float:
    s1, a1, h1 = m1
    s2, a2, h2 = m2
    dh = abs(h1 - h2) if (s1 == s2 or h1 == 0.0 or h2 == 0.0) else h1 + h2
    return math.hypot(a1 - a2, dh)


def _certify_branch(x, S, z: PointLocation, R: float, valence: int,
                    tol_geom: float) -> BranchCertificate:
    is_singular = _singular_edge_test(x, S)

    # the 2R segment through z, collecting the edges it runs along
    line_edges = {z.id}
    for a in (-R, -0.5 * R, 0.5 * R, R):
        loc = _walk_line(x, is_singular, z, a)
        if loc.kind == "edge":
            line_edges.add(loc.id)
    end_lo = _walk_line(x, is_singular, z, -R)
    end_hi = _walk_line(x, is_singular, z, R)

    comp = _sheet_components(x, S, sorted(line_edges))
    labels = sorted(set(comp.values()))
    if len(labels) != valence:
        raise CatflatError(
            f"expected {valence} sheets along the line, found {len(labels)}")

    samples = []           # (model triple, location)
    for a in (-0.9, -0.45, 0.0, 0.45, 0.9):
        loc = _line_point(x, is_singular, z, a * R)
        samples.append(((None, a * R, 0.0), loc))
    for label in labels:
        for a, h in ((0.0, 0.6), (-0.45, 0.5), (0.45, 0.5)):
            w = _line_point(x, is_singular, z, a * R)
            fid = next(f for f, _ in x.edge_faces[w.id] if comp.get(f) == label)
            pt = _perp_point(x, S, w, fid, h * R)
            samples.append(((label, a * R, h * R), pt))

    checks = {"line_singular": True, "sheets_flat": True,
              "segment_length": 2.0 * R}
    for a in (-0.45, 0.0, 0.45):
        pc = classify_point(x, S, _line_point(x, is_singular, z, a * R))
        if pc.kind != "singular_line" or pc.valence != valence:
            checks["line_singular"] = False
    for m, loc in samples:
        if m[0] is None:
            continue
        if classify_point(x, S, loc).kind != "flat":
            checks["sheets_flat"] = False
    if not (checks["line_singular"] and checks["sheets_flat"]):
        raise CatflatError("branch ball failed its local classification checks")

    worst = 0.0
    for (m1, l1), (m2, l2) in itertools.combinations(samples, 2):
        want = _model_dist(m1, m2)
        got = geodesic(x, l1, l2).length
        worst = max(worst, abs(got - want))
    if worst > tol_geom:
        raise CatflatError(
            f"branch ball deviates from the product model by {worst:.3g}")

    return BranchCertificate(
        z.brief(), R, valence, labels, [end_lo.brief(), end_hi.brief()],
        [{"model": [m[0], m[1], m[2]], "at": loc.brief()}
         for m, loc in samples],
        worst, checks)


def detect_branch(x: PEComplex, S, p: PointLocation, r0: float, R: float,
                  tol_geom: float = 1e-9):
    """Search the fibers beyond radius r0 for branch nodes; certify an
    embedded product ball of radius R around one, or return None when every
    fiber is a plain circle.  A branch node that cannot be certified raises
    rather than being silently dropped."""
    p = x.locate(p)
    if R <= 0 or r0 < 0:
        raise ValueError("need R > 0 and r0 >= 0")
    attempted = 0
    for k in (1.25, 1.5, 2.0):
        rad = r0 + k * R
        try:
            _, report = fiber_graph(x, S, p, rad)
        except TruncationTooSmall:
            continue
        attempted += 1
        for nid in report["branch_nodes"]:
            z = x.locate(parse_location(report["node_points"][nid]))
            if z.kind != "edge":
                continue        # vertex hits: try a neighbouring radius
            pc = classify_point(x, S, z)
            if pc.kind != "singular_line":
                continue
            return _certify_branch(x, S, z, R, pc.valence, tol_geom)
    if attempted == 0:
        raise TruncationTooSmall(
            "no fiber radius between r0+R and r0+2R fits the truncation")
    return None


# ---------------------------------------------------------------------------
# conicality, packing, flatness


def conicality(x: PEComplex, S, p: PointLocation, at: PointLocation) -> float:
    """Angle at `at` between the direction of the geodesic toward p and the
    support directions: for singular-line points, the link distance from
    that direction to the pole pair (the line's own directions); for flat
    points, the distance to the support subgraph (zero when the geodesic
    leaves inside S)."""
    p, at = x.locate(p), x.locate(at)
    if x.same_point(p, at):
        raise InvalidLocation("conicality needs two distinct points")
    pc = classify_point(x, S, at)
    if pc.kind not in ("flat", "singular_line"):
        raise InvalidLocation(f"conicality undefined at a {pc.kind} point")
    path = geodesic(x, at, p)
    if not path.segments:
        raise InvalidLocation("degenerate geodesic")
    link = link_at(x, at, allow_partial=True)
    dpt = _seg_link_point(x, link, path.segments[0], "out")
    pvd = link.graph.point_vertex_distances(dpt)
    if pc.kind == "singular_line":
        if link.kind == "edge":
            poles = ("p:0", "p:1")
        else:
            sub = link.subgraph_for(S.faces, S.edges)
            sd = suspension_structure(link.graph.restrict(sub))
            poles = tuple(q.id for q in sd.poles)
        return min(pvd[q] for q in poles)
    sub = link.subgraph_for(S.faces, S.edges)
    if sub.contains_point(dpt):
        return 0.0
    if not sub.vertices:
        raise InvalidLocation("support has no directions at " + at.brief())
    return min(pvd[v] for v in sorted(sub.vertices))


def packing_number(x: PEComplex, S, p: PointLocation, r: float,
                   eps: float) -> int:
    """Size of a greedy maximal (eps*r)-separated subset of B(p, r) cap S.

    Candidates are a deterministic chart grid over the support faces (pitch
    min(eps*r/2, 1/2), row-major within sorted face ids); a candidate is
    admitted when its distance to every admitted point certifiably exceeds
    eps*r.  The count is reproducible rather than canonical; that is the
    point."""
    p = x.locate(p)
    if r <= 0 or eps <= 0:
        raise ValueError("need r > 0 and eps > 0")
    sep = eps * r
    field = _field(x, p, r + _FIELD_MARGIN)
    if field.frontier_clearance() <= r:
        raise TruncationTooSmall(
            f"ball of radius {r} at {p.brief()} may reach the frontier")
    pitch = min(0.5 * sep, 0.5)
    chosen: list = []
    for fid in sorted(set(S.faces)):
        if fid not in field.terms:
            continue
        poly = x.faces[fid].chart
        x0 = min(q[0] for q in poly)
        x1 = max(q[0] for q in poly)
        y0 = min(q[1] for q in poly)
        y1 = max(q[1] for q in poly)
        nj = int((y1 - y0) / pitch) + 1
        ni = int((x1 - x0) / pitch) + 1
        for j in range(nj):
            cy = y0 + (j + 0.5) * pitch
            if cy > y1:
                continue
            for i in range(ni):
                cx = x0 + (i + 0.5) * pitch
                if cx > x1:
                    continue
                y = (cx, cy)
                if not geom.point_in_convex(y, list(poly), tol=-1e-7):
                    continue
                _, ub = field.bounds(fid, y)
                if not (math.isfinite(ub) and ub <= r):
                    continue
                far = True
                for _, cf in chosen:
                    lb, _ = cf.bounds(fid, y)
                    if lb <= sep:
                        far = False
                        break
                if far:
                    loc = x.locate(PointLocation("face", fid, coords=y))
                    chosen.append((loc, DistanceField(x, loc, sep + 1.0)))
    return len(chosen)


def flatness_test(x: PEComplex, S, p: PointLocation, radii=None) -> dict:
    """Combine the density profile with pointwise classification: flat when
    every ratio equals pi within its error bar and every sampled support
    point classifies flat; non_flat with a witness otherwise; inconclusive
    when the error bars straddle pi without a clean witness."""
    p = x.locate(p)
    probe = _field(x, p, 16.0)
    clearance = probe.frontier_clearance()
    if radii is None:
        radii = [r for r in (1.0, 2.0, 4.0, 8.0) if r <= clearance - 0.75]
        if not radii:
            radii = [max(0.25, 0.5 * clearance)]
    rmax = max(radii)
    profile = density_profile(x, S, p, radii)

    sample_locs = [p]
    for vid in sorted(S.vertices):
        loc = PointLocation("vertex", vid)
        fid = next((f for f in x.faces_at(loc) if f in probe.terms), None)
        if fid is None:
            continue
        _, ub = probe.bounds(fid, x.embed(loc, fid))
        if math.isfinite(ub) and ub <= rmax:
            sample_locs.append(loc)
    for eid in sorted(S.edges):
        loc = PointLocation("edge", eid, param=0.5)
        fid = next((f for f in x.faces_at(loc) if f in probe.terms), None)
        if fid is None:
            continue
        _, ub = probe.bounds(fid, x.embed(loc, fid))
        if math.isfinite(ub) and ub <= rmax:
            sample_locs.append(loc)

    witness = None
    checked = 0
    for loc in sample_locs:
        pc = classify_point(x, S, loc)
        if pc.kind == "frontier_censored":
            continue
        checked += 1
        if pc.kind != "flat":
            witness = {"point": loc.brief(), "class": pc.kind,
                       "valence": pc.valence}
            break
    ratio_high = next((i for i, (v, e)
                       in enumerate(zip(profile.ratios, profile.ratio_errors))
                       if v - e > math.pi + 1e-12), None)
    if witness is not None or ratio_high is not None:
        if witness is None:
            witness = {"radius": profile.radii[ratio_high],
                       "ratio": profile.ratios[ratio_high]}
        verdict = "non_flat"
    elif profile.flat_equality:
        verdict = "flat"
    else:
        verdict = "inconclusive"
        straddle = next((i for i, (v, e)
                         in enumerate(zip(profile.ratios, profile.ratio_errors))
                         if abs(v - math.pi) > e + 1e-12), None)
        if straddle is not None:
            witness = {"radius": profile.radii[straddle],
                       "ratio": profile.ratios[straddle]}
    return {"verdict": verdict, "witness": witness,
            "points_checked": checked, "profile": profile.to_data()}
