"""Metric graphs, links of points, antipodal sets, suspension recognition.

Links of points in a piecewise-Euclidean 2-complex are finite metric graphs:
a circle of length 2*pi at a face point, a suspension of the adjacent face
count at an edge point, and the corner-angle graph at a vertex.  Antipodal
sets are exact level sets {d = pi}; set diameters are measured in the angle
metric, i.e. graph distance truncated at pi (two directions never make an
angle larger than pi).
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

from . import geom
from .complex_core import PEComplex, PointLocation
from .errors import CatflatError, FrontierLink, InvalidComplex
from .geom import TOL_GEOM

PI = math.pi


# ----------------------------------------------------------------------
# metric graphs


@dataclass(frozen=True)
class GraphPoint:
    """A point of a metric graph: a vertex, or an interior point of an edge
    at arc length s from the edge's first endpoint."""

    kind: str          # "v" | "e"
    id: str
    s: float = 0.0

    def sort_key(self):
        return (0, self.id, 0.0) if self.kind == "v" else (1, self.id, self.s)

    def brief(self) -> str:
        return self.id if self.kind == "v" else f"{self.id}@{self.s:.9g}"


@dataclass
class GEdge:
    id: str
    ends: tuple[str, str]
    length: float


class MetricGraph:
    """Finite metric multigraph (parallel edges and self-loops allowed)."""

    def __init__(self, vertices, edges: list[GEdge]):
        self.vertices: list[str] = sorted(set(vertices))
        self.edges: dict[str, GEdge] = {}
        self.adj: dict[str, list[tuple[str, str, float]]] = {v: [] for v in self.vertices}
        for e in edges:
            if e.length <= 0:
                raise InvalidComplex(f"graph edge {e.id}: nonpositive length")
            if e.id in self.edges:
                raise InvalidComplex(f"duplicate graph edge id {e.id}")
            self.edges[e.id] = e
            a, b = e.ends
            self.adj[a].append((e.id, b, e.length))
            if b != a:
                self.adj[b].append((e.id, a, e.length))
        for v in self.adj:
            self.adj[v].sort()
        self._apsp: dict[str, dict[str, float]] | None = None

    def degree(self, v: str) -> int:
        d = 0
        for eid, other, _ in self.adj[v]:
            d += 2 if other == v else 1
        return d

    def total_length(self) -> float:
        return sum(e.length for e in self.edges.values())

    def dijkstra(self, source: str, banned_edge: str | None = None):
        dist = {source: 0.0}
        prev: dict[str, tuple[str, str]] = {}
        pq = [(0.0, source)]
        while pq:
            d, v = heapq.heappop(pq)
            if d > dist.get(v, math.inf):
                continue
            for eid, w, L in self.adj[v]:
                if eid == banned_edge:
                    continue
                nd = d + L
                if nd < dist.get(w, math.inf) - 1e-15:
                    dist[w] = nd
                    prev[w] = (v, eid)
                    heapq.heappush(pq, (nd, w))
        return dist, prev

    def all_pairs(self) -> dict[str, dict[str, float]]:
        if self._apsp is None:
            self._apsp = {v: self.dijkstra(v)[0] for v in self.vertices}
        return self._apsp

    def vertex_distance(self, a: str, b: str) -> float:
        return self.all_pairs()[a].get(b, math.inf)

    def point_vertex_distances(self, p: GraphPoint) -> dict[str, float]:
        """Distance from p to every graph vertex."""
        D = self.all_pairs()
        if p.kind == "v":
            return dict(D[p.id])
        e = self.edges[p.id]
        a, b = e.ends
        out = {}
        for v in self.vertices:
            out[v] = min(p.s + D[a].get(v, math.inf),
                         (e.length - p.s) + D[b].get(v, math.inf))
        return out

    def point_distance(self, p: GraphPoint, q: GraphPoint) -> float:
        if p.kind == "v" and q.kind == "v":
            return self.vertex_distance(p.id, q.id)
        if p.kind == "v":
            p, q = q, p
        dp = self.point_vertex_distances(p)
        if q.kind == "v":
            return dp[q.id]
        e = self.edges[q.id]
        a, b = e.ends
        best = min(dp[a] + q.s, dp[b] + (e.length - q.s))
        if q.id == p.id:
            best = min(best, abs(q.s - p.s))
        return best

    def angle_distance(self, p: GraphPoint, q: GraphPoint) -> float:
        """Graph distance truncated at pi (the angle metric on a link)."""
        return min(PI, self.point_distance(p, q))

    def restrict(self, sub: "Subgraph") -> "MetricGraph":
        return MetricGraph(sub.vertices,
                           [self.edges[eid] for eid in sorted(sub.edges)])


@dataclass(frozen=True)
class Subgraph:
    """A closed subgraph: a set of whole edges plus all their endpoints and
    possibly extra isolated vertices."""

    edges: frozenset
    vertices: frozenset

    @staticmethod
    def from_edges(g: MetricGraph, edge_ids, extra_vertices=()) -> "Subgraph":
        es = frozenset(edge_ids)
        vs = set(extra_vertices)
        for eid in es:
            vs.update(g.edges[eid].ends)
        return Subgraph(es, frozenset(vs))

    @staticmethod
    def whole(g: MetricGraph) -> "Subgraph":
        return Subgraph(frozenset(g.edges), frozenset(g.vertices))

    def contains_point(self, p: GraphPoint) -> bool:
        return p.id in (self.vertices if p.kind == "v" else self.edges)


# ----------------------------------------------------------------------
# girth


def girth(g: MetricGraph, with_cycle: bool = False):
    """Length of the shortest nontrivial cycle, infinity for forests.

    The shortest closed geodesic in a metric graph is a simple combinatorial
    cycle, found as min over edges e=(u,v) of len(e) + d(u, v in g - e).
    """
    best = math.inf
    best_cycle: list[str] = []
    for eid in sorted(g.edges):
        e = g.edges[eid]
        a, b = e.ends
        if a == b:
            cand, cyc = e.length, [a, eid]
        else:
            dist, prev = g.dijkstra(a, banned_edge=eid)
            if b not in dist:
                continue
            cand = dist[b] + e.length
            cyc = []
            v = b
            while v != a:
                pv, pe = prev[v]
                cyc.extend([v, pe])
                v = pv
            cyc.append(a)
            cyc.append(eid)
        if cand < best - 1e-15:
            best = cand
            best_cycle = cyc
    if with_cycle:
        return best, best_cycle
    return best


# ----------------------------------------------------------------------
# antipodal sets


@dataclass
class AntipodalSet:
    """Points of a subgraph at distance exactly pi from a base point:
    finitely many vertices plus closed edge subintervals (s in arc length,
    degenerate intervals being single antipodes)."""

    base: GraphPoint
    vertices: list[str]
    intervals: list[tuple[str, float, float]]

    def is_empty(self) -> bool:
        return not self.vertices and not self.intervals

    def sample_points(self) -> list[GraphPoint]:
        pts = [GraphPoint("v", v) for v in self.vertices]
        for eid, s0, s1 in self.intervals:
            pts.append(GraphPoint("e", eid, s0))
            if s1 > s0 + 1e-15:
                pts.append(GraphPoint("e", eid, s1))
        return pts

    def least_point(self) -> GraphPoint:
        if self.is_empty():
            raise CatflatError("empty antipodal set has no least point")
        return min(self.sample_points(), key=GraphPoint.sort_key)


def _level_regions(pieces, L, c, tol):
    """Subintervals of [0, L] where the lower envelope of linear pieces
    (val0, slope, lo, hi) equals c within tol: isolated crossings come out as
    degenerate intervals, plateaus as genuine ones."""
    cuts = {0.0, L}
    for v0, sl, lo, hi in pieces:
        cuts.add(max(0.0, min(L, lo)))
        cuts.add(max(0.0, min(L, hi)))
    for (v0, s0, lo0, hi0), (v1, s1, lo1, hi1) in itertools.combinations(pieces, 2):
        if abs(s0 - s1) > 1e-15:
            t = (v1 - v0) / (s0 - s1)
            if 0.0 < t < L:
                cuts.add(t)
    for v0, sl, lo, hi in pieces:
        if abs(sl) > 1e-15:
            t = (c - v0) / sl
            if 0.0 < t < L:
                cuts.add(t)
    grid = sorted(cuts)

    def env(t):
        best = math.inf
        for v0, sl, lo, hi in pieces:
            if lo - 1e-12 <= t <= hi + 1e-12:
                best = min(best, v0 + sl * t)
        return best

    out = []

    def push(a, b):
        if out and a <= out[-1][1] + 1e-12:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))

    for a, b in zip(grid, grid[1:]):
        if b - a < 1e-15:
            continue
        # envelope is linear on the cell: within the band iff both ends are
        if abs(env(a) - c) <= tol and abs(env(b) - c) <= tol:
            push(a, b)
        else:
            if abs(env(a) - c) <= tol:
                push(a, a)
            if abs(env(b) - c) <= tol:
                push(b, b)
    return out


def antipodal_set(g: MetricGraph, v: GraphPoint, sub: Subgraph | None = None,
                  tol: float = TOL_GEOM) -> AntipodalSet:
    """Ant(v, Y): points of Y whose distance from v equals pi, within tol.

    Distances are measured in the ambient graph g; the set is restricted to
    the closed subgraph Y (default: all of g).  The result is a finite list
    of vertices plus edge subintervals; generic antipodes are degenerate
    intervals, and a nondegenerate interval is a plateau where the distance
    function sits at pi.
    """
    if sub is None:
        sub = Subgraph.whole(g)
    dv = g.point_vertex_distances(v)
    verts = [w for w in sorted(sub.vertices)
             if abs(dv.get(w, math.inf) - PI) <= tol]
    intervals = []
    for eid in sorted(sub.edges):
        e = g.edges[eid]
        a, b = e.ends
        L = e.length
        pieces = [(dv[a], 1.0, 0.0, L), (dv[b] + L, -1.0, 0.0, L)]
        if v.kind == "e" and v.id == eid:
            pieces.append((-v.s, 1.0, v.s, L))
            pieces.append((v.s, -1.0, 0.0, v.s))
        for s0, s1 in _level_regions(pieces, L, PI, tol):
            # edge endpoints are reported through the vertex list
            if s1 - s0 < TOL_GEOM and (s0 < TOL_GEOM or s1 > L - TOL_GEOM):
                continue
            intervals.append((eid, max(s0, 0.0), min(s1, L)))
    return AntipodalSet(v, verts, intervals)


def antipodal_diameter(g: MetricGraph, ant: AntipodalSet) -> float:
    """Diameter of an antipodal set in the angle metric (truncated at pi).
    Interval endpoints suffice: pairwise distances are piecewise linear with
    slopes +-1 along each interval, so the maximum sits at endpoints."""
    pts = ant.sample_points()
    if not pts:
        return 0.0
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = g.angle_distance(pts[i], pts[j])
            if d > best:
                best = d
    return best


# ----------------------------------------------------------------------
# suspension recognition


@dataclass
class SuspensionDescription:
    poles: tuple[GraphPoint, GraphPoint]
    arcs: list[list[str]]          # edge ids along each arc
    arc_count: int
    all_points_are_poles: bool     # true exactly for a circle of length 2*pi

    def to_data(self) -> dict:
        return {"poles": [p.brief() for p in self.poles],
                "arcs": self.arcs, "arc_count": self.arc_count,
                "all_points_are_poles": self.all_points_are_poles}


def _components(g: MetricGraph, sub: Subgraph, removed: set[str]):
    """Connected components of sub minus a set of removed vertices."""
    verts = [v for v in sub.vertices if v not in removed]
    seen = set()
    comps = []
    for start in verts:
        if start in seen:
            continue
        comp_v, comp_e = {start}, set()
        stack = [start]
        seen.add(start)
        while stack:
            v = stack.pop()
            for eid, w, _ in g.adj[v]:
                if eid not in sub.edges or w in removed:
                    continue
                comp_e.add(eid)
                if w not in seen:
                    seen.add(w)
                    comp_v.add(w)
                    stack.append(w)
        comps.append((comp_v, comp_e))
    return comps


def _is_connected(g: MetricGraph, sub: Subgraph) -> bool:
    if not sub.vertices:
        return False
    return len(_components(g, sub, set())) == 1


def _circle_point_at(g: MetricGraph, sub: Subgraph, start: GraphPoint,
                     distance: float) -> GraphPoint:
    """Walk a cycle (every vertex degree 2) a given arc length from start."""
    if start.kind != "v":
        raise CatflatError("circle walk must start at a vertex")
    v = start.id
    prev_edge = None
    remaining = distance
    while True:
        options = [(eid, w, L) for eid, w, L in g.adj[v]
                   if eid in sub.edges and eid != prev_edge]
        if not options:
            raise CatflatError("walk fell off the cycle")
        eid, w, L = options[0]
        if remaining <= L + 1e-12:
            e = g.edges[eid]
            s = remaining if e.ends[0] == v else L - remaining
            if remaining < TOL_GEOM:
                return GraphPoint("v", v)
            if remaining > L - TOL_GEOM:
                return GraphPoint("v", w)
            return GraphPoint("e", eid, s)
        remaining -= L
        prev_edge = eid
        v = w


def suspension_structure(g: MetricGraph, sub: Subgraph | None = None,
                         tol: float = TOL_GEOM) -> SuspensionDescription | None:
    """Recognize Y as a metric suspension: two poles joined by i >= 2
    internally disjoint arcs of length pi each.  Returns None otherwise.

    A plain circle of length 2*pi is the i = 2 case; there every point is a
    pole of some decomposition and the lexicographically least valid pair is
    reported.
    """
    if sub is None:
        sub = Subgraph.whole(g)
    if not sub.edges:
        return None
    degs = {v: 0 for v in sub.vertices}
    for eid in sub.edges:
        a, b = g.edges[eid].ends
        if a == b:
            degs[a] += 2
        else:
            degs[a] += 1
            degs[b] += 1
    if any(d < 2 for d in degs.values()):
        return None
    if not _is_connected(g, sub):
        return None
    branch = sorted(v for v, d in degs.items() if d >= 3)
    if len(branch) == 0:
        total = sum(g.edges[eid].length for eid in sub.edges)
        if abs(total - 2.0 * PI) > tol:
            return None
        p1 = GraphPoint("v", min(sub.vertices))
        p2 = _circle_point_at(g, sub, p1, PI)
        return SuspensionDescription((p1, p2), [sorted(sub.edges)], 2, True)
    if len(branch) != 2:
        return None
    u, w = branch
    arcs: list[list[str]] = []
    used = set()
    for eid in sorted(sub.edges):
        a, b = g.edges[eid].ends
        if a == b:
            return None                      # self-loop cannot be a pole arc
        if {a, b} == {u, w}:
            if abs(g.edges[eid].length - PI) > tol:
                return None
            arcs.append([eid])
            used.add(eid)
    for comp_v, comp_e in _components(g, sub, {u, w}):
        # component must be a simple path whose free ends attach to u and w
        attach = []
        length = 0.0
        for eid in comp_e:
            length += g.edges[eid].length
        boundary_edges = []
        for eid in sub.edges - comp_e:
            a, b = g.edges[eid].ends
            if a in comp_v or b in comp_v:
                boundary_edges.append(eid)
        for eid in boundary_edges:
            a, b = g.edges[eid].ends
            pole = a if a in (u, w) else b
            inner = b if pole == a else a
            if pole not in (u, w) or inner not in comp_v:
                return None
            attach.append(pole)
            length += g.edges[eid].length
            used.add(eid)
        if sorted(attach) != [u, w]:
            return None
        if any(degs[v] != 2 for v in comp_v):
            return None
        if abs(length - PI) > tol:
            return None
        arc = sorted(comp_e | set(boundary_edges))
        arcs.append(arc)
        used.update(comp_e)
    if used != set(sub.edges):
        return None
    if len(arcs) < 2:
        return None
    if degs[u] != len(arcs) or degs[w] != len(arcs):
        return None
    return SuspensionDescription((GraphPoint("v", u), GraphPoint("v", w)),
                                 sorted(arcs), len(arcs), False)


# ----------------------------------------------------------------------
# isolated-suspension modulus


def _cycle_supports(g: MetricGraph) -> list[Subgraph]:
    """All nonempty edge subsets that are unions of simple cycles: minimum
    degree 2 and bridgeless within the subset."""
    eids = sorted(g.edges)
    if len(eids) > 20:
        raise CatflatError(f"support enumeration over {len(eids)} edges is too large")
    out = []
    for r in range(1, len(eids) + 1):
        for combo in itertools.combinations(eids, r):
            sub = Subgraph.from_edges(g, combo)
            degs = {v: 0 for v in sub.vertices}
            for eid in combo:
                a, b = g.edges[eid].ends
                if a == b:
                    degs[a] += 2
                else:
                    degs[a] += 1
                    degs[b] += 1
            if any(d < 2 for d in degs.values()):
                continue
            if not _bridgeless(g, sub):
                continue
            out.append(sub)
    return out


def _bridgeless(g: MetricGraph, sub: Subgraph) -> bool:
    for eid in sub.edges:
        a, b = g.edges[eid].ends
        if a == b:
            continue
        # connectivity of a and b within sub - eid
        seen = {a}
        stack = [a]
        ok = False
        while stack and not ok:
            v = stack.pop()
            for eid2, w, _ in g.adj[v]:
                if eid2 == eid or eid2 not in sub.edges:
                    continue
                if w == b:
                    ok = True
                    break
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if not ok:
            return False
    return True


@dataclass
class ModulusWitness:
    graph_index: int
    support: list[str]
    point: GraphPoint
    diameter: float
    bad_reason: str
    antipodes: list[str]

    def to_data(self) -> dict:
        return {"graph_index": self.graph_index, "support": self.support,
                "point": self.point.brief(), "diameter": self.diameter,
                "bad_reason": self.bad_reason, "antipodes": self.antipodes}


@dataclass
class SuspensionModulus:
    alpha: float
    beta: float
    witness: ModulusWitness | None
    supports_checked: int

    def to_data(self) -> dict:
        return {"alpha": self.alpha,
                "beta": self.beta if math.isfinite(self.beta) else "inf",
                "witness": self.witness.to_data() if self.witness else None,
                "supports_checked": self.supports_checked}


def _support_score(g, sub, susp, alpha, v: GraphPoint):
    """Diameter of Ant(v, Y) if v is bad for this support, else None."""
    if susp is not None:
        if susp.all_points_are_poles:
            return None
        dp = min(g.point_distance(v, p) for p in susp.poles)
        if dp < alpha:
            return None
        reason = "far_from_poles"
    else:
        reason = "support_not_suspension"
    ant = antipodal_set(g, v, sub)
    return antipodal_diameter(g, ant), reason, ant


def _edge_critical_params(g, sub, susp, alpha, eid) -> list[float]:
    e = g.edges[eid]
    a, b = e.ends
    L = e.length
    D = g.all_pairs()
    cuts = {0.0, L, 0.5 * L}
    consts = {PI, alpha}
    for fid in sub.edges:
        consts.add(PI - g.edges[fid].length)
    for x in sub.vertices:
        da, db = D[a].get(x, math.inf), D[b].get(x, math.inf)
        if math.isfinite(da) and math.isfinite(db):
            t = 0.5 * (L + db - da)
            if 0.0 < t < L:
                cuts.add(t)
        for k in consts:
            if math.isfinite(da):
                t = k - da
                if 0.0 < t < L:
                    cuts.add(t)
            if math.isfinite(db):
                t = db + L - k
                if 0.0 < t < L:
                    cuts.add(t)
    # interval birth/death: d(v,p) + d(v,q) = 2*pi - len(f) for support edges f
    for fid in sub.edges:
        f = g.edges[fid]
        p, q = f.ends
        target = 2.0 * PI - f.length
        for cp, sp in ((D[a].get(p, math.inf), 1.0), (D[b].get(p, math.inf) + L, -1.0)):
            for cq, sq in ((D[a].get(q, math.inf), 1.0), (D[b].get(q, math.inf) + L, -1.0)):
                if not (math.isfinite(cp) and math.isfinite(cq)):
                    continue
                slope = sp + sq
                if abs(slope) > 1e-15:
                    t = (target - cp - cq) / slope
                    if 0.0 < t < L:
                        cuts.add(t)
    return sorted(cuts)


def isolated_suspension_modulus(family: list[MetricGraph], alpha: float,
                                refine_tol: float = 1e-9) -> SuspensionModulus:
    """beta(alpha) = inf over graphs in the family, cycle supports Y, and bad
    points v of the diameter of Ant(v, Y) in the angle metric.

    A point is bad for Y when Y is not a metric suspension, or when it lies
    at distance >= alpha from the pole pair.  For a support that is a circle
    of length exactly 2*pi every point serves as a pole, so no point is bad.
    The infimum over edge interiors is located from structured critical
    parameters (watersheds, pi- and alpha-level crossings, antipode birth
    events); between them the score is piecewise linear, and adaptive
    midpoint refinement chases any residual route-switch kinks.
    """
    if not (0.0 < alpha <= 0.5 * PI + TOL_GEOM):
        raise CatflatError(f"alpha {alpha} outside (0, pi/2]")
    best = math.inf
    witness = None
    checked = 0
    for gi, g in enumerate(family):
        if girth(g) < 2.0 * PI - 1e-9:
            raise CatflatError(f"family graph {gi}: girth below 2*pi")
        for sub in _cycle_supports(g):
            checked += 1
            susp = suspension_structure(g, sub)
            if susp is not None and susp.all_points_are_poles:
                continue

            def score(v: GraphPoint):
                return _support_score(g, sub, susp, alpha, v)

            def consider(v: GraphPoint):
                nonlocal best, witness
                res = score(v)
                if res is None:
                    return math.inf
                d, reason, ant = res
                if d < best - 1e-12:
                    best = d
                    witness = ModulusWitness(
                        gi, sorted(sub.edges), v, d, reason,
                        [p.brief() for p in ant.sample_points()])
                return d

            for vx in g.vertices:
                consider(GraphPoint("v", vx))
            for eid in sorted(g.edges):
                L = g.edges[eid].length
                cuts = _edge_critical_params(g, sub, susp, alpha, eid)
                vals = [consider(GraphPoint("e", eid, t)) for t in cuts]
                for (a0, fa), (b0, fb) in zip(zip(cuts, vals),
                                              zip(cuts[1:], vals[1:])):
                    if b0 - a0 < 1e-12:
                        continue
                    if score(GraphPoint("e", eid, 0.5 * (a0 + b0))) is None:
                        continue                    # cell entirely good
                    _refine_cell(consider, eid, a0, b0, fa, fb, 48)
    return SuspensionModulus(alpha, best, witness, checked)


def _refine_cell(consider, eid, a, b, fa, fb, depth):
    """Chase interior minima of the diameter score inside one cell between
    critical parameters.  The score is piecewise linear there except for
    route-switch kinks; a midpoint that breaks linearity or dips below the
    endpoint values flags such a kink, and only then do we subdivide."""
    if depth <= 0 or b - a < 1e-12:
        return
    m = 0.5 * (a + b)
    fm = consider(GraphPoint("e", eid, m))
    if not math.isfinite(fm):
        return
    linear = abs(fa + fb - 2.0 * fm) <= 1e-10
    if linear and fm >= min(fa, fb) - 1e-12:
        return
    _refine_cell(consider, eid, a, m, fa, fm, depth - 1)
    _refine_cell(consider, eid, m, b, fm, fb, depth - 1)


# ----------------------------------------------------------------------
# links of points in a PE complex


@dataclass
class _CornerArc:
    fid: str
    ci: int
    angle: float
    base: tuple        # chart position of the corner
    u_out: tuple       # unit chart direction along loop edge ci
    u_in: tuple        # unit chart direction along loop edge ci-1 (reversed)
    rot: float         # +1 if interior rotation from u_out to u_in is CCW


@dataclass
class _SideArc:
    fid: str
    pos: int
    base: tuple        # chart position of the edge point
    w0: tuple          # unit chart direction toward the edge's first endpoint
    n: tuple           # unit inward normal


class Link:
    """The space of directions at a point, as a metric graph of total angle,
    together with the decoding between graph points and chart directions.

    Node and edge ids follow fixed conventions:
      vertex link: nodes "d:EID:END" (edge directions), arcs "c:FID:CI"
                   of length equal to the corner angle;
      edge link:   poles "p:0"/"p:1" (along the edge toward that endpoint),
                   arcs "a:FID:POS" of length pi, parametrized from "p:0";
      face link:   circle of length 2*pi, nodes "q:0"/"q:1", halves
                   "h:0" (chart angles [0,pi]) and "h:1" ([pi,2pi]).
    """

    def __init__(self, x: PEComplex, loc: PointLocation, kind: str,
                 graph: MetricGraph, partial: bool):
        self.x = x
        self.loc = loc
        self.kind = kind
        self.graph = graph
        self.partial = partial
        self._corners: dict[str, _CornerArc] = {}
        self._sides: dict[str, _SideArc] = {}

    # -- decoding: graph point -> motion ------------------------------

    def point_direction(self, pt: GraphPoint) -> dict:
        """What moving off the base point in this link direction means:
        either along an edge of the complex or into a face chart."""
        if self.kind == "vertex":
            if pt.kind == "v":
                _, eid, end = pt.id.split(":")
                return {"kind": "edge", "edge": eid, "from_end": int(end)}
            arc = self._corners[pt.id]
            s = min(max(pt.s, 0.0), arc.angle)
            return {"kind": "face", "face": arc.fid,
                    "base": arc.base,
                    "dir": geom.rotate(arc.u_out, arc.rot * s)}
        if self.kind == "edge":
            if pt.kind == "v":
                return {"kind": "edge", "edge": self.loc.id,
                        "toward_end": int(pt.id.split(":")[1])}
            arc = self._sides[pt.id]
            s = min(max(pt.s, 0.0), PI)
            c, sn = math.cos(s), math.sin(s)
            d = (c * arc.w0[0] + sn * arc.n[0], c * arc.w0[1] + sn * arc.n[1])
            return {"kind": "face", "face": arc.fid, "pos": arc.pos,
                    "base": arc.base, "dir": d}
        # face link
        if pt.kind == "v":
            phi = 0.0 if pt.id == "q:0" else PI
        else:
            phi = pt.s + (0.0 if pt.id == "h:0" else PI)
        return {"kind": "face", "face": self.loc.id,
                "base": self.loc.coords,
                "dir": (math.cos(phi), math.sin(phi))}

    # -- encoding: chart direction -> graph point ---------------------

    def direction_point(self, fid: str, vec, tol: float = 1e-7) -> GraphPoint:
        """Graph point for a unit chart direction out of the base point into
        face fid.  For edge links with a doubly adjacent face, the first
        occurrence whose wedge contains the direction wins."""
        v = geom.unit(vec)
        if self.kind == "vertex":
            for aid, arc in self._corners.items():
                if arc.fid != fid:
                    continue
                a1 = geom.angle_between(arc.u_out, v)
                a2 = geom.angle_between(v, arc.u_in)
                if abs(a1 + a2 - arc.angle) < tol:
                    if a1 < tol:
                        return self._corner_end(arc, 0)
                    if a1 > arc.angle - tol:
                        return self._corner_end(arc, 1)
                    return GraphPoint("e", aid, a1)
            raise CatflatError(f"direction not inside any corner of {fid} "
                               f"at {self.loc.brief()}")
        if self.kind == "edge":
            for aid, arc in self._sides.items():
                if arc.fid != fid:
                    continue
                cs = geom.dot(v, arc.w0)
                sn = geom.dot(v, arc.n)
                if sn < -tol:
                    continue
                s = math.atan2(max(sn, 0.0), cs)
                if s < tol:
                    return GraphPoint("v", "p:0")
                if s > PI - tol:
                    return GraphPoint("v", "p:1")
                return GraphPoint("e", aid, s)
            raise CatflatError(f"direction leaves face {fid} "
                               f"at {self.loc.brief()}")
        if fid != self.loc.id:
            raise CatflatError("face link decodes only its own face")
        phi = math.atan2(v[1], v[0]) % (2.0 * PI)
        if phi < tol or phi > 2.0 * PI - tol:
            return GraphPoint("v", "q:0")
        if abs(phi - PI) < tol:
            return GraphPoint("v", "q:1")
        if phi < PI:
            return GraphPoint("e", "h:0", phi)
        return GraphPoint("e", "h:1", phi - PI)

    def _corner_end(self, arc: _CornerArc, which: int) -> GraphPoint:
        e = self.graph.edges[f"c:{arc.fid}:{arc.ci}"]
        return GraphPoint("v", e.ends[which])

    # -- restriction to a subcomplex ----------------------------------

    def subgraph_for(self, face_ids, edge_ids) -> Subgraph:
        """Directions pointing into a closed subcomplex (given by its face
        and edge id sets)."""
        face_ids, edge_ids = set(face_ids), set(edge_ids)
        if self.kind == "vertex":
            keep_e = [eid for eid in self.graph.edges
                      if eid.split(":")[1] in face_ids]
            keep_v = [vid for vid in self.graph.vertices
                      if vid.split(":")[1] in edge_ids]
            return Subgraph.from_edges(self.graph, keep_e, keep_v)
        if self.kind == "edge":
            keep_e = [eid for eid in self.graph.edges
                      if eid.split(":")[1] in face_ids]
            return Subgraph.from_edges(self.graph, keep_e,
                                       self.graph.vertices)
        if self.loc.id in face_ids:
            return Subgraph.whole(self.graph)
        return Subgraph(frozenset(), frozenset())


def link_at(x: PEComplex, loc: PointLocation, allow_partial: bool = False) -> Link:
    """Build the link of a point with its direction decoding tables.

    Frontier points have truncated stars and therefore partial links; they
    are refused unless allow_partial is set, and the returned link is then
    marked partial.
    """
    loc = x.locate(loc)
    if loc.kind == "vertex":
        return _vertex_link(x, loc, allow_partial)
    if loc.kind == "edge":
        return _edge_link(x, loc, allow_partial)
    return _face_link(x, loc)


def _vertex_link(x: PEComplex, loc: PointLocation, allow_partial: bool) -> Link:
    v = loc.id
    partial = v in x.frontier_vertices
    if partial and not allow_partial:
        raise FrontierLink(f"vertex {v} lies on the frontier; its link is partial")
    nodes = [f"d:{eid}:{end}" for eid, end in x.vertex_edge_ends[v]]
    edges = []
    corners: dict[str, _CornerArc] = {}
    for fid, ci in x.vertex_corners[v]:
        f = x.faces[fid]
        n = f.nsides
        e_out = f.loop[ci]
        e_in = f.loop[(ci - 1) % n]
        end_out = 0 if f.dirs[ci] == 1 else 1
        end_in = 1 if f.dirs[(ci - 1) % n] == 1 else 0
        aid = f"c:{fid}:{ci}"
        edges.append(GEdge(aid, (f"d:{e_out}:{end_out}", f"d:{e_in}:{end_in}"),
                           f.angles[ci]))
        base = f.chart[ci]
        u_out = geom.unit(geom.sub(f.chart[(ci + 1) % n], base))
        u_in = geom.unit(geom.sub(f.chart[(ci - 1) % n], base))
        rot = 1.0 if geom.cross(u_out, u_in) > 0 else -1.0
        corners[aid] = _CornerArc(fid, ci, f.angles[ci], base, u_out, u_in, rot)
    graph = MetricGraph(nodes, edges)
    link = Link(x, loc, "vertex", graph, partial)
    link._corners = corners
    return link


def _edge_link(x: PEComplex, loc: PointLocation, allow_partial: bool) -> Link:
    eid = loc.id
    partial = eid in x.frontier_edges
    if partial and not allow_partial:
        raise FrontierLink(f"edge {eid} lies on the frontier; its link is partial")
    nodes = ["p:0", "p:1"]
    edges = []
    sides: dict[str, _SideArc] = {}
    for fid, pos in x.edge_faces[eid]:
        f = x.faces[fid]
        aid = f"a:{fid}:{pos}"
        edges.append(GEdge(aid, ("p:0", "p:1"), PI))
        A = f.chart[pos]
        B = f.chart[(pos + 1) % f.nsides]
        w0 = geom.unit(geom.sub(A, B)) if f.dirs[pos] == 1 else geom.unit(geom.sub(B, A))
        t = loc.param if f.dirs[pos] == 1 else 1.0 - loc.param
        base = geom.add(A, geom.scale(geom.sub(B, A), t))
        centroid = (sum(p[0] for p in f.chart) / f.nsides,
                    sum(p[1] for p in f.chart) / f.nsides)
        n = geom.perp(w0)
        if geom.dot(n, geom.sub(centroid, base)) < 0:
            n = geom.scale(n, -1.0)
        sides[aid] = _SideArc(fid, pos, base, w0, n)
    graph = MetricGraph(nodes, edges)
    link = Link(x, loc, "edge", graph, partial)
    link._sides = sides
    return link


def _face_link(x: PEComplex, loc: PointLocation) -> Link:
    graph = MetricGraph(["q:0", "q:1"],
                        [GEdge("h:0", ("q:0", "q:1"), PI),
                         GEdge("h:1", ("q:1", "q:0"), PI)])
    return Link(x, loc, "face", graph, False)
