"""Exact geodesics in a truncated nonpositively curved complex.

Point-to-point distances are computed in two stages.  A refined adjacency
graph (vertices, edge subdivision samples, in-face chords) proposes a
corridor: the sequence of faces, crossed edges and pinned vertices the path
runs through.  The corridor is then unfolded isometrically into the plane
and the shortest admissible polyline through its portals is found with a
funnel sweep, so the refinement step size affects which corridor is found
but never the accuracy of the answer.  Every result is certified by link
distances at each crossing; local geodesics are global here, so the
certificate also proves minimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sparse_dijkstra

from . import geom
from .complex_core import PEComplex, PointLocation, cat0_verdict
from .errors import (CatflatError, GeodesicExitsTruncation, InvalidLocation,
                     NoAntipode, NotVerifiedCat0)
from .link_graphs import GraphPoint, Subgraph, antipodal_set, link_at

PI = math.pi
TOL = geom.TOL_GEOM
EPS_REFINE = 0.05
_VARIANT_CAP = 40


# ---------------------------------------------------------------------------
# path data


@dataclass
class PathSegment:
    """One straight piece of a path.

    kind "face": a, b are chart coordinates in face `id`.
    kind "edge": a, b are edge parameters in [0,1]; the piece runs along
    the edge itself.
    """

    kind: str
    id: str
    a: object
    b: object
    length: float

    def to_data(self) -> dict:
        return {"kind": self.kind, "id": self.id, "a": self.a, "b": self.b,
                "length": self.length}


@dataclass
class GeodesicPath:
    endpoints: tuple
    segments: list
    corridor: list
    length: float
    crossings: list
    partial: bool = False

    def point_at(self, x: PEComplex, s: float) -> PointLocation:
        """Point at arclength s from the first endpoint."""
        s = min(max(s, 0.0), self.length)
        if not self.segments:
            return self.endpoints[0]
        acc = 0.0
        for seg in self.segments:
            if s <= acc + seg.length + 1e-12:
                u = 0.0 if seg.length <= 1e-12 else (s - acc) / seg.length
                u = min(max(u, 0.0), 1.0)
                if seg.kind == "face":
                    c = geom.add(seg.a, geom.scale(geom.sub(seg.b, seg.a), u))
                    return x.locate(PointLocation("face", seg.id, coords=c))
                t = seg.a + u * (seg.b - seg.a)
                return x.locate(PointLocation("edge", seg.id, param=t))
            acc += seg.length
        return self.endpoints[1]

    def to_data(self) -> dict:
        return {
            "endpoints": [self.endpoints[0].brief(), self.endpoints[1].brief()],
            "length": self.length,
            "corridor": list(self.corridor),
            "segments": [s.to_data() for s in self.segments],
            "crossings": [dict(c) for c in self.crossings],
            "partial": self.partial,
        }


@dataclass
class LocalGeodesicCertificate:
    verdict: bool
    margin: float               # worst signed link margin (d_link - pi)
    crossings: list

    def to_data(self) -> dict:
        return {"verdict": self.verdict, "margin": self.margin,
                "crossings": [dict(c) for c in self.crossings]}


# ---------------------------------------------------------------------------
# refined adjacency graph


class _EpsGraph:
    """Candidate/upper-bound graph: complex vertices, edge samples at
    spacing <= eps, consecutive along-edge arcs and all in-face chords."""

    def __init__(self, x: PEComplex, eps: float):
        self.x = x
        self.eps = eps
        refs: list = []
        index: dict = {}

        def add(ref):
            i = index.get(ref)
            if i is None:
                i = len(refs)
                refs.append(ref)
                index[ref] = i
            return i

        for vid in x.vertices:
            add(("v", vid))
        rows: list = []
        cols: list = []
        wts: list = []
        chain: dict = {}
        for eid in sorted(x.edges):
            e = x.edges[eid]
            m = max(1, math.ceil(e.length / eps))
            idxs = [index[("v", e.ends[0])]]
            for k in range(1, m):
                idxs.append(add(("e", eid, k / m)))
            idxs.append(index[("v", e.ends[1])])
            chain[eid] = idxs
            step = e.length / m
            for a, b in zip(idxs, idxs[1:]):
                rows.append(a)
                cols.append(b)
                wts.append(step)
        r_parts = [np.asarray(rows, dtype=np.int64)]
        c_parts = [np.asarray(cols, dtype=np.int64)]
        w_parts = [np.asarray(wts, dtype=np.float64)]
        face_entries: dict = {}
        for fid in sorted(x.faces):
            f = x.faces[fid]
            ids: list = []
            pos: list = []
            for ci in range(f.nsides):
                ids.append(index[("v", f.corners[ci])])
                pos.append(f.chart[ci])
                a, b = f.chart[ci], f.chart[(ci + 1) % f.nsides]
                eid = f.loop[ci]
                m = len(chain[eid]) - 1
                for k in range(1, m):
                    s = k / m if f.dirs[ci] == 1 else 1.0 - k / m
                    ids.append(chain[eid][k])
                    pos.append((a[0] + s * (b[0] - a[0]),
                                a[1] + s * (b[1] - a[1])))
            ids_a = np.asarray(ids, dtype=np.int64)
            pos_a = np.asarray(pos, dtype=np.float64)
            face_entries[fid] = (ids_a, pos_a)
            ii, jj = np.triu_indices(len(ids), k=1)
            keep = ids_a[ii] != ids_a[jj]
            ii, jj = ii[keep], jj[keep]
            d = np.hypot(pos_a[ii, 0] - pos_a[jj, 0],
                         pos_a[ii, 1] - pos_a[jj, 1])
            r_parts.append(ids_a[ii])
            c_parts.append(ids_a[jj])
            w_parts.append(d)
        r = np.concatenate(r_parts)
        c = np.concatenate(c_parts)
        w = np.concatenate(w_parts)
        # duplicate pairs would be summed by the sparse constructor; keep the
        # minimum weight per unordered pair instead
        n = len(refs)
        lo = np.minimum(r, c)
        hi = np.maximum(r, c)
        key = lo * np.int64(n) + hi
        order = np.lexsort((w, key))
        key, lo, hi, w = key[order], lo[order], hi[order], w[order]
        first = np.ones(len(key), dtype=bool)
        if len(key):
            first[1:] = key[1:] != key[:-1]
        self._rows = lo[first]
        self._cols = hi[first]
        self._wts = w[first]
        self.n = n
        self.refs = refs
        self.index = index
        self.chain = chain
        self.face_entries = face_entries
        self._solves: dict = {}

    # -- seeding -------------------------------------------------------

    def _side_point(self, fid: str, ci: int, t_edge: float):
        f = self.x.faces[fid]
        a, b = self.x.side_endpoints(fid, ci)
        s = t_edge if f.dirs[ci] == 1 else 1.0 - t_edge
        return (a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]))

    def _attach(self, loc: PointLocation) -> dict:
        """Seed nodes for a point: {node index: leg length}."""
        x = self.x
        seeds: dict = {}

        def offer(i, leg):
            if leg < seeds.get(i, math.inf):
                seeds[i] = leg

        if loc.kind == "vertex":
            offer(self.index[("v", loc.id)], 0.0)
            return seeds
        if loc.kind == "edge":
            e = x.edges[loc.id]
            idxs = self.chain[loc.id]
            m = len(idxs) - 1
            k0 = min(int(loc.param * m), m - 1)
            for k in (k0, k0 + 1):
                offer(idxs[k], abs(loc.param - k / m) * e.length)
            p0 = None
            for fid, ci in x.edge_faces[loc.id]:
                p0 = self._side_point(fid, ci, loc.param)
                ids_a, pos_a = self.face_entries[fid]
                d = np.hypot(pos_a[:, 0] - p0[0], pos_a[:, 1] - p0[1])
                for i, leg in zip(ids_a.tolist(), d.tolist()):
                    offer(i, leg)
            return seeds
        ids_a, pos_a = self.face_entries[loc.id]
        d = np.hypot(pos_a[:, 0] - loc.coords[0], pos_a[:, 1] - loc.coords[1])
        for i, leg in zip(ids_a.tolist(), d.tolist()):
            offer(i, leg)
        return seeds

    def solve(self, loc: PointLocation):
        """Dijkstra from a point (distances and predecessors over all
        nodes; the synthetic source has index n)."""
        key = loc.brief()
        got = self._solves.get(key)
        if got is not None:
            return got
        seeds = self._attach(loc)
        si = np.fromiter(seeds.keys(), dtype=np.int64)
        sw = np.fromiter(seeds.values(), dtype=np.float64)
        n = self.n
        r = np.concatenate([self._rows, np.full(len(si), n, dtype=np.int64)])
        c = np.concatenate([self._cols, si])
        w = np.concatenate([self._wts, sw])
        g = csr_matrix((w, (r, c)), shape=(n + 1, n + 1))
        dist, pred = _sparse_dijkstra(g, directed=False, indices=n,
                                      return_predecessors=True)
        self._solves[key] = (dist, pred)
        return dist, pred

    def route(self, q: PointLocation, dist, pred):
        """Upper bound to q and the node reference path from the solved
        source (source and q excluded)."""
        seeds = self._attach(q)
        best = None
        for i, leg in sorted(seeds.items()):
            v = dist[i] + leg
            if best is None or v < best[0] - 1e-15:
                best = (v, i)
        if best is None or not math.isfinite(best[0]):
            return math.inf, None
        ub, b = best
        idxs = []
        i = b
        while i != self.n:
            idxs.append(i)
            i = int(pred[i])
            if i < 0:
                raise CatflatError("predecessor chain broken")
        idxs.reverse()
        return float(ub), [self.refs[i] for i in idxs]


def _eps_graph(x: PEComplex, eps: float) -> _EpsGraph:
    key = ("epsgraph", eps)
    g = x._cache.get(key)
    if g is None:
        g = _EpsGraph(x, eps)
        x._cache[key] = g
    return g


# ---------------------------------------------------------------------------
# corridor extraction


def _as_elem(loc: PointLocation):
    if loc.kind == "vertex":
        return ("v", loc.id)
    if loc.kind == "edge":
        return ("e", loc.id, loc.param)
    return ("f", loc.id, loc.coords)


def _elem_faces(x: PEComplex, el) -> set:
    if el[0] == "v":
        return {fid for fid, _ in x.vertex_corners[el[1]]}
    if el[0] == "e":
        return {fid for fid, _ in x.edge_faces[el[1]]}
    return {el[1]}


def _move(x: PEComplex, a, b):
    ea = a[1] if a[0] == "e" else None
    eb = b[1] if b[0] == "e" else None
    if ea is not None and ea == eb:
        return ("edge", ea)
    if ea is not None and b[0] == "v" and b[1] in x.edges[ea].ends:
        return ("edge", ea)
    if eb is not None and a[0] == "v" and a[1] in x.edges[eb].ends:
        return ("edge", eb)
    if a[0] == "v" and b[0] == "v":
        direct = [(x.edges[eid].length, eid)
                  for eid, _ in x.vertex_edge_ends[a[1]]
                  if b[1] in x.edges[eid].ends]
        if direct:
            return ("edge", min(direct)[1])
    common = _elem_faces(x, a) & _elem_faces(x, b)
    if not common:
        raise CatflatError(f"no carrier joins {a} and {b}")
    return ("face", min(common))


def _corridor(x: PEComplex, p: PointLocation, q: PointLocation, refs):
    """Carrier sequence and crossing elements from a node reference path."""
    elems = [_as_elem(p)] + list(refs) + [_as_elem(q)]
    moves = [_move(x, elems[i], elems[i + 1]) for i in range(len(elems) - 1)]
    carriers = [moves[0]]
    crossings = []
    for i in range(1, len(moves)):
        if moves[i] == carriers[-1]:
            continue
        crossings.append(elems[i])
        carriers.append(moves[i])
    return {"carriers": carriers, "crossings": crossings}


# ---------------------------------------------------------------------------
# unfolding and the funnel sweep


def _inv_apply(iso: geom.Isometry, p):
    y0, y1 = p[0] - iso.tx, p[1] - iso.ty
    return (iso.m00 * y0 + iso.m10 * y1, iso.m01 * y0 + iso.m11 * y1)


def _inv_vec(iso: geom.Isometry, v):
    return (iso.m00 * v[0] + iso.m10 * v[1], iso.m01 * v[0] + iso.m11 * v[1])


def _det(iso: geom.Isometry) -> float:
    return iso.m00 * iso.m11 - iso.m01 * iso.m10


def _centroid(f) -> tuple:
    cx = sum(p[0] for p in f.chart) / f.nsides
    cy = sum(p[1] for p in f.chart) / f.nsides
    return (cx, cy)


def _pick_side(x: PEComplex, fid: str, eid: str, iso, anchor, avoid=None):
    """Occurrence of eid among the sides of fid, nearest to the working
    anchor when the edge bounds the face more than once."""
    occs = [ci for ci in x.edge_occurrences(fid, eid) if ci != avoid]
    if not occs:
        occs = x.edge_occurrences(fid, eid)
    if len(occs) == 1 or iso is None or anchor is None:
        return occs[0]
    best = None
    for ci in occs:
        a, b = x.side_endpoints(fid, ci)
        mid = iso.apply(((a[0] + b[0]) / 2, (a[1] + b[1]) / 2))
        d = geom.dist(mid, anchor)
        if best is None or d < best[0]:
            best = (d, ci)
    return best[1]


def _pick_corner(x: PEComplex, fid: str, vid: str, iso, anchor):
    occs = [ci for f2, ci in x.vertex_corners[vid] if f2 == fid]
    if not occs:
        raise CatflatError(f"vertex {vid} is not a corner of {fid}")
    if len(occs) == 1 or iso is None or anchor is None:
        return occs[0]
    best = None
    for ci in occs:
        d = geom.dist(iso.apply(x.faces[fid].chart[ci]), anchor)
        if best is None or d < best[0]:
            best = (d, ci)
    return best[1]


def _translation(src, dst) -> geom.Isometry:
    return geom.Isometry(1.0, 0.0, 0.0, 1.0, dst[0] - src[0], dst[1] - src[1])


def _unfold(x: PEComplex, p: PointLocation, q: PointLocation, corridor):
    """Unfold the corridor into the plane.

    Returns (phat, portals, qhat, placements) where each portal is a dict
    with plane endpoints "a"/"b" ("a" == "b" for pinned crossings) and the
    bookkeeping needed afterwards: the crossing element, the flanking
    carrier indices, side/corner occurrences, and for slideable portals the
    funnel orientation (left endpoint first).
    """
    carriers = corridor["carriers"]
    crossings = corridor["crossings"]
    placements: list = [None] * len(carriers)

    def face_iso(k, iso):
        placements[k] = ("face", carriers[k][1], iso)

    def edge_place(k, t0, origin, ptv):
        placements[k] = ("edge", carriers[k][1], t0, origin, ptv)

    def place_point(k, el):
        kind = placements[k][0]
        if kind == "face":
            _, fid, iso = placements[k]
            if el[0] == "v":
                ci = _pick_corner(x, fid, el[1], iso, anchor)
                return iso.apply(x.faces[fid].chart[ci])
            ci = _pick_side(x, fid, el[1], iso, anchor)
            f = x.faces[fid]
            a, b = x.side_endpoints(fid, ci)
            s = el[2] if f.dirs[ci] == 1 else 1.0 - el[2]
            return iso.apply((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])))
        _, eid, t0, origin, ptv = placements[k]
        t = el[2] if el[0] == "e" else float(x.edges[eid].ends.index(el[1]))
        return (origin[0] + (t - t0) * ptv[0], origin[1] + (t - t0) * ptv[1])

    # first carrier
    k0, c0 = 0, carriers[0]
    pe = _as_elem(p)
    if c0[0] == "face":
        face_iso(0, geom.Isometry.identity())
        phat = x.embed(p, c0[1])
    else:
        e = x.edges[c0[1]]
        t0 = pe[2] if pe[0] == "e" else float(e.ends.index(pe[1]))
        edge_place(0, t0, (0.0, 0.0), (e.length, 0.0))
        phat = (0.0, 0.0)
    anchor = phat
    portals: list = []
    for k, el in enumerate(crossings):
        prev, nxt = placements[k], None
        pc, nc = carriers[k], carriers[k + 1]
        slide = pc[0] == "face" and nc[0] == "face" and el[0] == "e"
        rec = {"elem": el, "prev": k, "next": k + 1}
        if slide:
            fid, iso = pc[1], prev[2]
            ci = _pick_side(x, fid, el[1], iso, anchor)
            f = x.faces[fid]
            a, b = x.side_endpoints(fid, ci)
            A, B = iso.apply(a), iso.apply(b)
            end_at_a = x.edges[el[1]].ends[0 if f.dirs[ci] == 1 else 1]
            # convex faces keep their interior to the left when the chart is
            # traversed forward; a reflected unfolding swaps that
            if _det(iso) > 0:
                left, right = B, A
                rec["left_corner"] = f.corners[(ci + 1) % f.nsides]
                rec["right_corner"] = f.corners[ci]
            else:
                left, right = A, B
                rec["left_corner"] = f.corners[ci]
                rec["right_corner"] = f.corners[(ci + 1) % f.nsides]
            rec.update(kind="slide", a=A, b=B, left=left, right=right,
                       prev_side=(fid, ci))
            s = el[2] if f.dirs[ci] == 1 else 1.0 - el[2]
            pos = (A[0] + s * (B[0] - A[0]), A[1] + s * (B[1] - A[1]))
            # glue the next face across the edge
            fid2 = nc[1]
            ci2 = _pick_side(x, fid2, el[1], None, None,
                             avoid=ci if fid2 == fid else None)
            f2 = x.faces[fid2]
            a2, b2 = x.side_endpoints(fid2, ci2)
            end_at_a2 = x.edges[el[1]].ends[0 if f2.dirs[ci2] == 1 else 1]
            ta, tb = (A, B) if end_at_a2 == end_at_a else (B, A)
            iso2 = geom.Isometry.from_segment_map(a2, b2, ta, tb, flip=False)
            side_prev = geom.cross(geom.sub(B, A),
                                   geom.sub(iso.apply(_centroid(f)), A))
            if geom.cross(geom.sub(B, A),
                          geom.sub(iso2.apply(_centroid(f2)), A)) * side_prev > 0:
                iso2 = geom.Isometry.from_segment_map(a2, b2, ta, tb, flip=True)
            rec["next_side"] = (fid2, ci2)
            face_iso(k + 1, iso2)
        else:
            pos = place_point(k, el)
            rec.update(kind="pin", a=pos, b=pos)
            if nc[0] == "face":
                fid2 = nc[1]
                f2 = x.faces[fid2]
                if el[0] == "v":
                    ci2 = _pick_corner(x, fid2, el[1], None, None)
                    src = f2.chart[ci2]
                else:
                    ci2 = _pick_side(x, fid2, el[1], None, None)
                    a2, b2 = x.side_endpoints(fid2, ci2)
                    s2 = el[2] if f2.dirs[ci2] == 1 else 1.0 - el[2]
                    src = (a2[0] + s2 * (b2[0] - a2[0]),
                           a2[1] + s2 * (b2[1] - a2[1]))
                face_iso(k + 1, _translation(src, pos))
            else:
                e2 = x.edges[nc[1]]
                t0 = el[2] if el[0] == "e" else float(e2.ends.index(el[1]))
                onward = crossings[k + 1] if k + 1 < len(crossings) else _as_elem(q)
                t1 = onward[2] if onward[0] == "e" and onward[1] == nc[1] \
                    else float(e2.ends.index(onward[1]))
                w = geom.sub(pos, anchor)
                w = (1.0, 0.0) if geom.norm(w) < 1e-12 else geom.unit(w)
                sgn = 1.0 if t1 >= t0 else -1.0
                edge_place(k + 1, t0, pos,
                           (sgn * e2.length * w[0], sgn * e2.length * w[1]))
        portals.append(rec)
        anchor = pos
    qhat = None
    last = placements[-1]
    if last[0] == "face":
        qhat = last[2].apply(x.embed(q, carriers[-1][1]))
    else:
        qe = _as_elem(q)
        _, eid, t0, origin, ptv = last
        t = qe[2] if qe[0] == "e" else float(x.edges[eid].ends.index(qe[1]))
        qhat = (origin[0] + (t - t0) * ptv[0], origin[1] + (t - t0) * ptv[1])
    return phat, portals, qhat, placements


def _tri(a, b, c) -> float:
    return geom.cross(geom.sub(b, a), geom.sub(c, a))


def _string_pull(phat, portals, qhat):
    """Funnel sweep: shortest polyline from phat to qhat crossing the
    portals in order.  Returns [(point, portal index)] apexes, with the
    endpoints at synthetic indices -1 and len(portals)."""
    ls = [phat] + [p["left"] if p["kind"] == "slide" else p["a"] for p in portals] + [qhat]
    rs = [phat] + [p["right"] if p["kind"] == "slide" else p["a"] for p in portals] + [qhat]
    n = len(ls)
    eps = 1e-12
    out = [(phat, -1)]
    apex, ai = ls[0], 0
    left, li = ls[0], 0
    right, ri = rs[0], 0
    i = 1
    while i < n:
        l, r = ls[i], rs[i]
        if _tri(apex, right, r) >= -eps:
            if (right == apex) or _tri(apex, left, r) <= eps:
                right, ri = r, i
            else:
                out.append((left, li - 1))
                apex, ai = left, li
                left, li = apex, ai
                right, ri = apex, ai
                i = ai + 1
                continue
        if _tri(apex, left, l) <= eps:
            if (left == apex) or _tri(apex, right, l) >= -eps:
                left, li = l, i
            else:
                out.append((right, ri - 1))
                apex, ai = right, ri
                left, li = apex, ai
                right, ri = apex, ai
                i = ai + 1
                continue
        i += 1
    out.append((qhat, len(ls) - 2))
    return out


def _portal_points(phat, portals, qhat):
    """Crossing point on every portal along the pulled string."""
    apexes = _string_pull(phat, portals, qhat)
    pts: list = [None] * len(portals)
    for (P0, i0), (P1, i1) in zip(apexes, apexes[1:]):
        for j in range(i0 + 1, i1):
            rec = portals[j]
            if rec["kind"] == "pin":
                pts[j] = rec["a"]
                continue
            A, B = rec["a"], rec["b"]
            d = geom.sub(P1, P0)
            e = geom.sub(B, A)
            den = geom.cross(e, d)
            if abs(den) < 1e-13:
                u = max(0.0, min(1.0, geom.seg_param_at(A, B, P0)))
            else:
                u = geom.cross(d, geom.sub(A, P0)) / den
                u = max(0.0, min(1.0, u))
            pts[j] = geom.add(A, geom.scale(e, u))
        if 0 <= i1 < len(portals):
            pts[i1] = P1
    for j, rec in enumerate(portals):
        if pts[j] is None:                      # apex sat exactly on it
            pts[j] = rec["a"]
    return pts


# ---------------------------------------------------------------------------
# assembling a path from corridor + crossing points


def _crossing_loc(x: PEComplex, rec, pt, placements) -> PointLocation:
    el = rec["elem"]
    if rec["kind"] == "pin":
        if el[0] == "v":
            return PointLocation("vertex", el[1])
        return x.locate(PointLocation("edge", el[1], param=el[2]))
    fid, ci = rec["prev_side"]
    f = x.faces[fid]
    A, B = rec["a"], rec["b"]
    u = geom.seg_param_at(A, B, pt)
    if geom.dist(pt, A) < 1e-9:
        return PointLocation("vertex", f.corners[ci])
    if geom.dist(pt, B) < 1e-9:
        return PointLocation("vertex", f.corners[(ci + 1) % f.nsides])
    t = u if f.dirs[ci] == 1 else 1.0 - u
    return PointLocation("edge", el[1], param=min(max(t, 0.0), 1.0))


def _assemble(x: PEComplex, p, q, corridor, phat, portals, qhat, placements):
    pts = _portal_points(phat, portals, qhat)
    stops = [(phat, None, x.locate(p))]
    for rec, pt in zip(portals, pts):
        stops.append((pt, rec, _crossing_loc(x, rec, pt, placements)))
    stops.append((qhat, None, x.locate(q)))
    # a crossing point can coincide with a neighbour (corner pinning, or an
    # endpoint sitting on the first portal); fuse such stops
    fused = [stops[0]]
    for pt, rec, loc in stops[1:]:
        ppt, prec, ploc = fused[-1]
        if geom.dist(pt, ppt) < 1e-9:
            if prec is None or rec is None:
                fused[-1] = (ppt, None, ploc if prec is None else loc)
            else:
                merged = dict(prec)
                merged["next"] = rec["next"]
                if loc.kind != "vertex" and ploc.kind != "vertex":
                    raise CatflatError("coincident crossings off any vertex")
                mloc = ploc if ploc.kind == "vertex" else loc
                fused[-1] = (ppt, merged, mloc)
        else:
            fused.append((pt, rec, loc))
    segments: list = []
    corridor_briefs: list = []
    carriers = corridor["carriers"]
    length = 0.0
    for i in range(len(fused) - 1):
        pt0, rec0, loc0 = fused[i]
        pt1, rec1, loc1 = fused[i + 1]
        k = rec1["prev"] if rec1 is not None else (
            rec0["next"] if rec0 is not None else 0)
        ck = carriers[k]
        seg_len = geom.dist(pt0, pt1)
        length += seg_len
        corridor_briefs.append(("f:" if ck[0] == "face" else "e:") + ck[1])
        if ck[0] == "face":
            iso = placements[k][2]
            segments.append(PathSegment("face", ck[1], _inv_apply(iso, pt0),
                                        _inv_apply(iso, pt1), seg_len))
        else:
            _, eid, t0, origin, ptv = placements[k]
            L = x.edges[eid].length
            ta = t0 + geom.dot(geom.sub(pt0, origin), ptv) / (L * L)
            tb = t0 + geom.dot(geom.sub(pt1, origin), ptv) / (L * L)
            segments.append(PathSegment("edge", eid, ta, tb, seg_len))
        if rec1 is not None:
            corridor_briefs.append(loc1.brief().rsplit(":", 1)[0]
                                   if loc1.kind == "edge" else loc1.brief())
    return GeodesicPath((x.locate(p), x.locate(q)), segments,
                        corridor_briefs, length, [])


# ---------------------------------------------------------------------------
# certification


def _seg_link_point(x: PEComplex, link, seg: PathSegment, which: str) -> GraphPoint:
    """Link direction at a crossing for the adjacent path segment, pointing
    away from the crossing into the segment."""
    if seg.kind == "face":
        vec = geom.sub(seg.a, seg.b) if which == "in" else geom.sub(seg.b, seg.a)
        return link.direction_point(seg.id, vec)
    t_far = seg.a if which == "in" else seg.b
    t_here = seg.b if which == "in" else seg.a
    if link.kind == "edge":
        return GraphPoint("v", "p:0" if t_far < t_here else "p:1")
    end = 0 if t_here < 0.5 else 1
    return GraphPoint("v", f"d:{seg.id}:{end}")


def _junctions(x: PEComplex, segments):
    """Per-crossing link data for consecutive path segments: location,
    the two link direction points, their link distance and the signed
    margin d - pi.  A junction whose segments do not meet gets margin
    -inf and no direction points."""
    out: list = []
    for i in range(len(segments) - 1):
        sa, sb = segments[i], segments[i + 1]
        if sa.kind == "face":
            loc = x.locate(PointLocation("face", sa.id, coords=sa.b))
        else:
            loc = x.locate(PointLocation("edge", sa.id, param=sa.b))
        if sb.kind == "face":
            loc2 = x.locate(PointLocation("face", sb.id, coords=sb.a))
        else:
            loc2 = x.locate(PointLocation("edge", sb.id, param=sb.a))
        if not x.same_point(loc, loc2, tol=1e-7):
            out.append({"loc": loc, "in_pt": None, "out_pt": None,
                        "d": math.nan, "margin": -math.inf, "partial": False,
                        "note": f"segments {i} and {i + 1} do not meet"})
            continue
        try:
            link = link_at(x, loc, allow_partial=True)
            in_pt = _seg_link_point(x, link, sa, "in")
            out_pt = _seg_link_point(x, link, sb, "out")
            d = link.graph.point_distance(in_pt, out_pt)
        except CatflatError as exc:
            out.append({"loc": loc, "in_pt": None, "out_pt": None,
                        "d": math.nan, "margin": -math.inf, "partial": False,
                        "note": str(exc)})
            continue
        out.append({"loc": loc, "in_pt": in_pt, "out_pt": out_pt, "d": d,
                    "margin": d - PI, "partial": link.partial})
    return out


def _records_of(junctions) -> list:
    recs = []
    for j in junctions:
        r = {"at": j["loc"].brief(), "link_distance": j["d"],
             "margin": j["margin"], "partial_link": j["partial"]}
        if j["in_pt"] is not None:
            r["incoming"] = j["in_pt"].brief()
            r["outgoing"] = j["out_pt"].brief()
        if "note" in j:
            r["note"] = j["note"]
        recs.append(r)
    return recs


def is_local_geodesic(x: PEComplex, path: GeodesicPath,
                      tol: float = TOL) -> LocalGeodesicCertificate:
    """Check the local geodesic condition at every interior crossing of the
    path: the incoming and outgoing directions must be at link distance at
    least pi (within tol).  Straight interior pieces need no check; the
    verdict of a crossing-free path is vacuously true."""
    segs = [s for s in path.segments if s.length > 1e-12]
    junctions = _junctions(x, segs)
    worst = math.inf
    ok = True
    for j in junctions:
        worst = min(worst, j["margin"])
        if j["margin"] < -tol:
            ok = False
    return LocalGeodesicCertificate(ok, worst, _records_of(junctions))


# ---------------------------------------------------------------------------
# corridor repair around failed pins


def _graph_route(g, a_pt: GraphPoint, b_pt: GraphPoint):
    """Alternating node/arc id sequence of a shortest route between two
    graph points, or None if disconnected."""
    def ends_of(pt):
        if pt.kind == "v":
            return [(pt.id, 0.0, None)]
        e = g.edges[pt.id]
        return [(e.ends[0], pt.s, pt.id), (e.ends[1], e.length - pt.s, pt.id)]

    best = None
    for va, sa, aa in ends_of(a_pt):
        if va not in g.adj:
            continue
        dist, prev = g.dijkstra(va)
        for vb, sb, ab in ends_of(b_pt):
            d = dist.get(vb)
            if d is None:
                continue
            tot = sa + d + sb
            if best is None or tot < best[0] - 1e-15:
                chain = [vb]
                arcs = []
                v = vb
                while v != va:
                    v, eid = prev[v]
                    arcs.append(eid)
                    chain.append(v)
                chain.reverse()
                arcs.reverse()
                best = (tot, va, aa, ab, chain, arcs)
    if best is None:
        # both points may sit on one arc with no usable endpoints
        if a_pt.kind == "e" and b_pt.kind == "e" and a_pt.id == b_pt.id:
            return [a_pt.id]
        return None
    _, va, aa, ab, chain, arcs = best
    seq: list = []
    if aa is not None:
        seq.append(aa)
    for v, arc in zip(chain, arcs + [None]):
        seq.append(v)
        if arc is not None:
            seq.append(arc)
    if ab is not None:
        seq.append(ab)
    return seq


def _splice_for_pin(x: PEComplex, link, in_pt, out_pt, vid, banned=None):
    """Replacement crossing/carrier run that walks around a vertex instead
    of through it, following a shortest link route between the two
    directions.  Returns (crossings, carriers) or None."""
    g = link.graph
    if banned:
        keep = [v for v in g.vertices if v not in banned]
        keepset = set(keep)
        sub = Subgraph.from_edges(
            g, [eid for eid, e in g.edges.items()
                if e.ends[0] in keepset and e.ends[1] in keepset], keep)
        if not sub.edges:
            return None
        g = g.restrict(sub)
        for pt in (in_pt, out_pt):
            if pt.kind == "e" and pt.id not in g.edges:
                return None
            if pt.kind == "v" and pt.id not in g.adj:
                return None
    seq = _graph_route(g, in_pt, out_pt)
    if seq is None:
        return None
    crossings: list = []
    carriers: list = []
    pending = None
    for s in seq:
        if s.startswith("d:"):
            eid = s.split(":")[1]
            if crossings:
                if pending is None:
                    return None
                carriers.append(("face", pending))
            end = x.edges[eid].ends.index(vid) if vid in x.edges[eid].ends else 0
            crossings.append(("e", eid, float(end)))
            pending = None
        elif s.startswith("c:"):
            pending = s.split(":")[1]
    if not crossings:
        return None
    skip = {pt.id for pt in (in_pt, out_pt) if pt.kind == "v"}
    interior = [s for s in seq if s.startswith("d:") and s not in skip]
    return crossings, carriers, interior


def _path_corridor(segments, junctions):
    """Clean corridor implied by an assembled path (tangential touches
    merged, corner pins reclassified as vertex crossings)."""
    carriers = [("face", s.id) if s.kind == "face" else ("edge", s.id)
                for s in segments]
    crossings = []
    for j in junctions:
        loc = j["loc"]
        crossings.append(("v", loc.id) if loc.kind == "vertex"
                         else ("e", loc.id, loc.param))
    return {"carriers": carriers, "crossings": crossings}


def _pin_variants(x: PEComplex, corridor, junctions):
    """Corridor surgeries around crossings that failed certification:
    a vertex pin is replaced by a walk around the vertex following a
    shortest link route, and an along-edge run by a plain edge crossing
    or a detour through an adjacent face."""
    out = []
    carriers = corridor["carriers"]
    crossings = corridor["crossings"]
    runs_done = set()
    for idx, j in enumerate(junctions):
        if j["margin"] >= -1e-9:
            continue
        el = crossings[idx]
        pc, nc = carriers[idx], carriers[idx + 1]
        if el[0] == "v" and pc[0] == "face" and nc[0] == "face" \
                and j["in_pt"] is not None:
            try:
                link = link_at(x, j["loc"], allow_partial=True)
            except CatflatError:
                continue
            first = _splice_for_pin(x, link, j["in_pt"], j["out_pt"], el[1])
            variants = [first]
            if first is not None:
                variants.append(_splice_for_pin(x, link, j["in_pt"],
                                                j["out_pt"], el[1],
                                                banned=set(first[2])))
            for var in variants:
                if var is None:
                    continue
                new_cross, new_car, _ = var
                out.append({"carriers": carriers[:idx + 1] + new_car
                            + carriers[idx + 1:],
                            "crossings": crossings[:idx] + new_cross
                            + crossings[idx + 1:]})
        # a failed bend flanking an along-edge run: rework the run
        for k in (idx, idx + 1):
            if carriers[k][0] != "edge" or k in runs_done:
                continue
            runs_done.add(k)
            out.extend(_run_variants(x, carriers, crossings, k))
    return out


def _run_variants(x: PEComplex, carriers, crossings, k):
    """Replacements for the along-edge run at carrier index k."""
    out = []
    eid = carriers[k][1]
    adj = sorted({fid for fid, _ in x.edge_faces[eid]})
    if 0 < k < len(carriers) - 1:
        pc, nc = carriers[k - 1], carriers[k + 1]
        if pc[0] != "face" or nc[0] != "face":
            return out
        if pc[1] == nc[1]:
            out.append({"carriers": carriers[:k - 1] + carriers[k + 1:],
                        "crossings": crossings[:k - 1] + crossings[k + 1:]})
        elif pc[1] in adj and nc[1] in adj:
            ta = crossings[k - 1][2] if crossings[k - 1][0] == "e" else 0.5
            tb = crossings[k][2] if crossings[k][0] == "e" else 0.5
            out.append({"carriers": carriers[:k] + carriers[k + 1:],
                        "crossings": crossings[:k - 1]
                        + [("e", eid, 0.5 * (ta + tb))] + crossings[k + 1:]})
    elif k == 0 and len(carriers) > 1:
        nc = carriers[1]
        for fid in adj:
            if nc == ("face", fid):
                out.append({"carriers": carriers[1:], "crossings": crossings[1:]})
            elif nc[0] == "face":
                out.append({"carriers": [("face", fid)] + carriers[1:],
                            "crossings": [crossings[0]] + crossings[1:]})
    elif k == len(carriers) - 1 and len(carriers) > 1:
        pc = carriers[-2]
        for fid in adj:
            if pc == ("face", fid):
                out.append({"carriers": carriers[:-1],
                            "crossings": crossings[:-1]})
            elif pc[0] == "face":
                out.append({"carriers": carriers[:-1] + [("face", fid)],
                            "crossings": crossings[:-1] + [crossings[-1]]})
    return out


# ---------------------------------------------------------------------------
# the geodesic operation


def _direct_path(x: PEComplex, p: PointLocation, q: PointLocation):
    """Straight segment when p and q share a carrier, else None."""
    if x.same_point(p, q):
        return GeodesicPath((p, q), [], [], 0.0, [])
    # along one edge
    def edge_params(loc):
        if loc.kind == "edge":
            return {loc.id: loc.param}
        if loc.kind == "vertex":
            out = {}
            for eid, end in x.vertex_edge_ends[loc.id]:
                e = x.edges[eid]
                if e.ends[0] != e.ends[1]:
                    out[eid] = float(end)
            return out
        return {}
    ep, eq = edge_params(p), edge_params(q)
    cands = []
    for eid in sorted(set(ep) & set(eq)):
        ta, tb = ep[eid], eq[eid]
        L = abs(tb - ta) * x.edges[eid].length
        cands.append((L, PathSegment("edge", eid, ta, tb, L), f"e:{eid}"))
    for fid in sorted(set(x.faces_at(p)) & set(x.faces_at(q))):
        a, b = x.embed(p, fid), x.embed(q, fid)
        L = geom.dist(a, b)
        cands.append((L, PathSegment("face", fid, a, b, L), f"f:{fid}"))
    if not cands:
        return None
    L, seg, brief = min(cands, key=lambda c: (c[0], c[2]))
    return GeodesicPath((p, q), [seg], [brief], L, [])


def _check_frontier(x: PEComplex, path: GeodesicPath):
    for rec in path.crossings:
        at = rec.get("at", "")
        if at.startswith("v:") and at[2:] in x.frontier_vertices:
            raise GeodesicExitsTruncation(
                f"geodesic bends at frontier vertex {at[2:]}; "
                "the answer depends on the truncated part")
        if at.startswith("e:"):
            eid = at.split(":")[1]
            if eid in x.frontier_edges:
                raise GeodesicExitsTruncation(
                    f"geodesic crosses frontier edge {eid}; "
                    "the answer depends on the truncated part")


def _evaluate(x, p, q, corridor):
    phat, portals, qhat, placements = _unfold(x, p, q, corridor)
    path = _assemble(x, p, q, corridor, phat, portals, qhat, placements)
    segs = [s for s in path.segments if s.length > 1e-12]
    path.segments = segs
    junctions = _junctions(x, segs)
    worst = min((j["margin"] for j in junctions), default=math.inf)
    ok = worst >= -TOL
    path.crossings = _records_of(junctions)
    return path, ok, worst, junctions


def _corridor_key(c):
    return (tuple(c["carriers"]), tuple(c["crossings"]))


def geodesic(x: PEComplex, p: PointLocation, q: PointLocation,
             allow_unverified: bool = False,
             eps: float = EPS_REFINE) -> GeodesicPath:
    """The geodesic from p to q inside the truncation.

    Requires a cat0 validation verdict; a complex whose simple connectivity
    could not be established is accepted only with allow_unverified=True
    (the result is then a certified local geodesic, globally shortest only
    if the complex really is simply connected).  Raises
    GeodesicExitsTruncation when the path bends on the frontier, where the
    missing part of the complex could provide a shortcut.
    """
    verdict = cat0_verdict(x)
    if verdict == "not_locally_cat0":
        raise NotVerifiedCat0("complex fails the link condition; "
                              "geodesics are not well defined")
    if verdict != "cat0" and not allow_unverified:
        raise NotVerifiedCat0(
            f"validation verdict is {verdict}; pass allow_unverified=True "
            "to accept a certified local geodesic anyway")
    p, q = x.locate(p), x.locate(q)
    direct = _direct_path(x, p, q)
    if direct is not None:
        return direct
    eg = _eps_graph(x, eps)
    dist, pred = eg.solve(p)
    ub, refs = eg.route(q, dist, pred)
    if refs is None:
        raise CatflatError("no path between the points inside the truncation")
    first = _corridor(x, p, q, refs)
    queue = [first]
    seen = {_corridor_key(first)}
    best = None
    best_fail = None
    evaluated = 0
    while queue and evaluated < _VARIANT_CAP:
        corridor = queue.pop(0)
        evaluated += 1
        try:
            path, ok, worst, junctions = _evaluate(x, p, q, corridor)
        except CatflatError:
            continue
        if ok:
            if best is None or path.length < best.length - 1e-12:
                best = path
            continue
        if best_fail is None or worst > best_fail[0]:
            best_fail = (worst, path)
        clean = _path_corridor(path.segments, junctions)
        for var in _pin_variants(x, clean, junctions):
            key = _corridor_key(var)
            if key not in seen:
                seen.add(key)
                queue.append(var)
    if best is None:
        detail = f" (best failed margin {best_fail[0]:.3g})" if best_fail else ""
        raise CatflatError("could not certify a geodesic between "
                           f"{p.brief()} and {q.brief()}{detail}")
    _check_frontier(x, best)
    return best


def distance(x: PEComplex, p: PointLocation, q: PointLocation, **kw) -> float:
    return geodesic(x, p, q, **kw).length


def refined_upper_bound(x: PEComplex, p: PointLocation, q: PointLocation,
                        eps: float = EPS_REFINE) -> float:
    """Shortest-path length in the refined adjacency graph with p and q
    inserted: an upper bound for the exact geodesic, independent of the
    unfolding machinery."""
    p, q = x.locate(p), x.locate(q)
    if x.same_point(p, q):
        return 0.0
    best = math.inf
    direct = _direct_path(x, p, q)
    if direct is not None:
        best = direct.length
    eg = _eps_graph(x, eps)
    dist, pred = eg.solve(p)
    ub, _refs = eg.route(q, dist, pred)
    return min(best, ub)


# ---------------------------------------------------------------------------
# extension inside a subcomplex, and the contraction map


def _sub_ids(x: PEComplex, S):
    faces = getattr(S, "faces", None)
    edges = getattr(S, "edges", None)
    if faces is None and isinstance(S, dict):
        faces = S.get("faces", ())
        edges = S.get("edges", ())
    faces = set(faces or ())
    edges = set(edges or ())
    for fid in faces:
        edges.update(x.faces[fid].loop)
    return faces, edges


def _face_exit(x: PEComplex, fid: str, base, d):
    """First boundary hit of the ray base + s*d inside face fid."""
    best = None
    f = x.faces[fid]
    for i in range(f.nsides):
        a, b = x.side_endpoints(fid, i)
        hit = geom.ray_segment_hit(base, d, a, b)
        if hit is not None and (best is None or hit[0] < best[0] - 1e-12):
            best = (hit[0], i, hit[1])
    if best is None:
        raise CatflatError(f"ray does not leave face {fid}")
    s, i, t = best
    pt = geom.add(base, geom.scale(d, s))
    return s, pt


def extend_in_subcomplex(x: PEComplex, S, seg: GeodesicPath,
                         R: float) -> GeodesicPath:
    """Prolong a geodesic inside the closed subcomplex S until the total
    length from its first endpoint reaches R, or the frontier is hit
    (partial result, flagged).  At every carrier boundary the continuation
    is the lexicographically least antipode of the incoming direction in
    the link of the subcomplex; an empty antipode set raises NoAntipode."""
    faces, edges = _sub_ids(x, S)
    if not seg.segments:
        raise InvalidLocation("cannot extend a degenerate segment")
    p = seg.endpoints[0]
    loc = x.locate(seg.endpoints[1])
    last = seg.segments[-1]
    if last.kind == "face":
        arrival = ("face", last.id, geom.unit(geom.sub(last.b, last.a)))
    else:
        arrival = ("edge", last.id, 1 if last.b > last.a else 0)
    segments = list(seg.segments)
    crossings = list(seg.crossings)
    corridor = list(seg.corridor)
    total = seg.length
    partial = False
    while total < R - 1e-12:
        if x.is_frontier(loc) or (loc.kind == "vertex"
                                  and loc.id in x.frontier_vertices):
            partial = True
            break
        link = link_at(x, loc, allow_partial=True)
        if link.partial:
            partial = True
            break
        if arrival[0] == "face":
            in_pt = link.direction_point(arrival[1], geom.scale(arrival[2], -1.0))
        elif link.kind == "edge":
            in_pt = GraphPoint("v", "p:0" if arrival[2] == 1 else "p:1")
        else:
            eid, end = arrival[1], arrival[2]
            in_pt = GraphPoint("v", f"d:{eid}:{end}")
        sub = link.subgraph_for(faces, edges)
        if not sub.edges and not sub.vertices:
            raise NoAntipode("the subcomplex has no directions at "
                             + loc.brief(), location=loc,
                             direction=in_pt.brief())
        g_s = link.graph.restrict(sub)
        if (in_pt.kind == "e" and in_pt.id not in g_s.edges) or \
                (in_pt.kind == "v" and in_pt.id not in g_s.adj):
            raise CatflatError("incoming direction leaves the subcomplex "
                               f"at {loc.brief()}")
        ant = antipodal_set(g_s, in_pt)
        if ant.is_empty():
            raise NoAntipode(f"no antipodal direction at {loc.brief()}",
                             location=loc, direction=in_pt.brief())
        cont = ant.least_point()
        d_link = g_s.point_distance(in_pt, cont)
        if loc.kind != "face":
            crossings.append({"at": loc.brief(), "link_distance": d_link,
                              "margin": d_link - PI, "partial_link": False})
            corridor.append(loc.brief() if loc.kind == "vertex"
                            else f"e:{loc.id}")
        motion = link.point_direction(cont)
        rem = R - total
        if motion["kind"] == "face":
            fid = motion["face"]
            base, dvec = motion["base"], geom.unit(motion["dir"])
            s_exit, pt = _face_exit(x, fid, base, dvec)
            corridor.append(f"f:{fid}")
            if s_exit >= rem - 1e-12:
                end_pt = geom.add(base, geom.scale(dvec, rem))
                segments.append(PathSegment("face", fid, base, end_pt, rem))
                total = R
                loc = x.locate(PointLocation("face", fid, coords=end_pt))
                break
            segments.append(PathSegment("face", fid, base, pt, s_exit))
            total += s_exit
            loc = x.locate(PointLocation("face", fid, coords=pt))
            arrival = ("face", fid, dvec)
        else:
            eid = motion["edge"]
            e = x.edges[eid]
            if "toward_end" in motion:
                end = motion["toward_end"]
                t0 = loc.param
            else:
                end = 1 - motion["from_end"]
                t0 = float(motion["from_end"])
            t1 = float(end)
            run = abs(t1 - t0) * e.length
            corridor.append(f"e:{eid}")
            if run >= rem - 1e-12:
                t_stop = t0 + math.copysign(rem / e.length, t1 - t0)
                segments.append(PathSegment("edge", eid, t0, t_stop, rem))
                total = R
                loc = x.locate(PointLocation("edge", eid, param=t_stop))
                break
            segments.append(PathSegment("edge", eid, t0, t1, run))
            total += run
            loc = PointLocation("vertex", e.ends[end])
            arrival = ("edge", eid, end)
    return GeodesicPath((p, loc), segments, corridor, total, crossings,
                        partial=partial)


def contract_toward(x: PEComplex, p: PointLocation, ratio: float,
                    target: PointLocation, **kw) -> PointLocation:
    """The point at parameter ratio * d(p, target) along the geodesic from
    p to target: the contraction of target toward the basepoint."""
    if not 0.0 < ratio <= 1.0 + TOL:
        raise CatflatError(f"ratio {ratio} outside (0, 1]")
    g = geodesic(x, p, target, **kw)
    if ratio >= 1.0 - TOL / max(g.length, 1.0):
        return g.endpoints[1]
    return g.point_at(x, ratio * g.length)
