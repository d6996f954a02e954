"""Relative 2-cycles mod frontier, their supports, and induced link cycles.

A locally finite 2-cycle of an infinite complex appears on a truncated
host as an integer face chain whose boundary is carried entirely by the
frontier.  This module holds those chains, the closed subcomplexes they
span, the 1-cycle a chain induces in the link of a point of its support,
a deterministic family of named fixtures, and the sampling harness for
the geodesic extension property on a support set.
"""

from __future__ import annotations

import itertools
import math
import operator
import random
from dataclasses import dataclass

from . import geom
from .complex_core import SQUARE, Edge, Face, PEComplex, PointLocation
from .errors import InvalidChain, InvalidComplex, NoAntipode
from .geodesics import extend_in_subcomplex, geodesic
from .link_graphs import Link, Subgraph, link_at

TWO_PI = 2.0 * math.pi

FIXTURES = ("plane", "tripod_times_r", "glasses", "two_planes_glued",
            "bent_flat", "cone_points")

_GLASSES_RADIUS = 10.0
_BRIDGE_LENGTH = 1.0          # Tits length of the arc joining the two circles
_CONE_GRID = 20               # ambient grid for the cone-point fixture


class Chain2:
    """Integer 2-chain on the faces of a host complex.

    coefficients maps face ids to nonzero integers; zero entries are
    dropped on construction, so the mapping always equals the chain's
    top-dimensional support.  The chain is a relative cycle mod frontier
    exactly when boundary() is carried by frontier edges alone, which is
    what support() checks before trusting it.
    """

    __slots__ = ("host", "coefficients")

    def __init__(self, host: PEComplex, coefficients):
        clean: dict[str, int] = {}
        for fid in sorted(coefficients):
            if fid not in host.faces:
                raise InvalidChain(f"chain names unknown face {fid!r}")
            try:
                k = operator.index(coefficients[fid])
            except TypeError as exc:
                raise InvalidChain(
                    f"coefficient of {fid} must be an integer") from exc
            if k != 0:
                clean[fid] = k
        self.host = host
        self.coefficients = clean

    def __neg__(self) -> "Chain2":
        return Chain2(self.host, {f: -k for f, k in self.coefficients.items()})

    def __add__(self, other: "Chain2") -> "Chain2":
        if other.host is not self.host:
            raise InvalidChain("cannot add chains over different hosts")
        out = dict(self.coefficients)
        for f, k in other.coefficients.items():
            out[f] = out.get(f, 0) + k
        return Chain2(self.host, out)

    def __rmul__(self, k) -> "Chain2":
        k = operator.index(k)
        return Chain2(self.host, {f: k * v for f, v in self.coefficients.items()})

    def __eq__(self, other) -> bool:
        return (isinstance(other, Chain2) and other.host is self.host
                and other.coefficients == self.coefficients)

    def to_data(self) -> dict:
        return {"chain": dict(sorted(self.coefficients.items()))}

    @staticmethod
    def from_data(host: PEComplex, data: dict) -> "Chain2":
        if not isinstance(data, dict) or "chain" not in data:
            raise InvalidChain('chain JSON must be {"chain": {face: int, ...}}')
        return Chain2(host, data["chain"])


def boundary(x: PEComplex, c: Chain2) -> dict:
    """Edge-indexed boundary of c, with orientations induced by the face
    loops.  Zero entries are dropped; a valid relative cycle therefore
    returns a mapping whose keys are all frontier edges."""
    acc: dict[str, int] = {}
    for fid, k in c.coefficients.items():
        f = x.faces[fid]
        for eid, d in zip(f.loop, f.dirs):
            acc[eid] = acc.get(eid, 0) + k * d
    return {eid: acc[eid] for eid in sorted(acc) if acc[eid] != 0}


@dataclass(frozen=True)
class SupportSet:
    """Closure of the faces with nonzero coefficient: a closed subcomplex
    given by its face, edge and vertex id sets."""

    faces: frozenset
    edges: frozenset
    vertices: frozenset

    @property
    def closure(self) -> dict:
        return {"faces": sorted(self.faces), "edges": sorted(self.edges),
                "vertices": sorted(self.vertices)}

    def contains(self, loc: PointLocation) -> bool:
        pool = {"vertex": self.vertices, "edge": self.edges,
                "face": self.faces}[loc.kind]
        return loc.id in pool

    def to_data(self) -> dict:
        return self.closure


def support(x: PEComplex, c: Chain2) -> SupportSet:
    """Support of the class represented by c; in top dimension the chain
    is the unique cycle in its class, so this is just the closure of its
    nonzero faces.  Refuses chains that are not relative cycles."""
    off = {eid: v for eid, v in boundary(x, c).items()
           if eid not in x.frontier_edges}
    if off:
        shown = ", ".join(f"{eid}:{v:+d}"
                          for eid, v in itertools.islice(off.items(), 4))
        raise InvalidChain(
            f"not a relative cycle: boundary hits interior edges ({shown}"
            + (", ..." if len(off) > 4 else "") + ")")
    faces = frozenset(c.coefficients)
    edges = frozenset(eid for fid in faces for eid in x.faces[fid].loop)
    vertices = frozenset(v for eid in edges for v in x.edges[eid].ends)
    return SupportSet(faces, edges, vertices)


@dataclass
class LinkCycle:
    """1-cycle induced in the link of a point by a 2-chain through it."""

    link: Link
    coefficients: dict
    report: dict

    def to_data(self) -> dict:
        return {"at": self.link.loc.brief(),
                "coefficients": dict(sorted(self.coefficients.items())),
                "report": dict(self.report)}


def link_cycle(x: PEComplex, c: Chain2, p: PointLocation) -> LinkCycle:
    """The 1-cycle the chain induces in the link at p.

    Face corners at p enter with the chain coefficients (for edge-interior
    points multiplied by the traversal direction, so the two pole degrees
    cancel).  The report carries the length of the shortest cycle inside
    the support of the induced chain; at an interior support point of a
    CAT(0) host that length is at least 2 pi.  A point outside the support
    gets the zero cycle, flagged rather than raised.
    """
    p = x.locate(p)
    supp = support(x, c)
    inside = supp.contains(p)
    link = link_at(x, p, allow_partial=True)
    coeffs: dict[str, int] = {}
    if inside:
        if p.kind == "face":
            k = c.coefficients[p.id]
            coeffs = {"h:0": k, "h:1": k}
        elif p.kind == "edge":
            for fid, pos in x.edge_faces[p.id]:
                k = c.coefficients.get(fid, 0)
                if k:
                    coeffs[f"a:{fid}:{pos}"] = k * x.faces[fid].dirs[pos]
        else:
            # corner arcs run against the loop (out-side to in-side), which
            # is the same circular direction for all corners of a cancelling
            # pair, so the raw coefficients already close up.
            for fid, ci in x.vertex_corners[p.id]:
                k = c.coefficients.get(fid, 0)
                if k:
                    coeffs[f"c:{fid}:{ci}"] = k
        if not link.partial:
            _require_cycle(link.graph, coeffs)
    girth = _support_girth(link.graph, coeffs) if coeffs else None
    report = {
        "in_support": inside,
        "partial_link": link.partial,
        "shortest_support_cycle": girth,
        "meets_two_pi": None if girth is None else bool(girth >= TWO_PI - 1e-9),
    }
    return LinkCycle(link, coeffs, report)


def _require_cycle(g, coeffs: dict) -> None:
    deg: dict[str, int] = {}
    for eid, k in coeffs.items():
        u, w = g.edges[eid].ends
        deg[u] = deg.get(u, 0) - k
        deg[w] = deg.get(w, 0) + k
    bad = sorted(v for v, d in deg.items() if d != 0)
    if bad:
        raise InvalidChain(f"induced link chain fails to close at {bad}")


def _support_girth(g, coeffs: dict):
    """Shortest cycle of the subgraph spanned by the nonzero arcs, or None
    when that subgraph is a forest."""
    h = g.restrict(Subgraph.from_edges(g, coeffs))
    best = math.inf
    for eid in sorted(h.edges):
        e = h.edges[eid]
        u, w = e.ends
        dist, _ = h.dijkstra(u, banned_edge=eid)
        through = dist.get(w)
        if through is not None and through + e.length < best:
            best = through + e.length
    return best if math.isfinite(best) else None


# ----------------------------------------------------------------------
# fixtures


def fixture_cycles(name: str, size):
    """Deterministic named complex together with a relative 2-cycle on it.

    plane(n): n x n square grid, fundamental chain.
    tripod_times_r(n): three n x n half-plane sheets glued along a line;
        the per-sheet coefficients solve the integer kernel of the
        boundary map on the line, so all three sheets carry the class.
    glasses(k): two flat k-gon cone disks of total angle 2 pi sharing
        their apex, joined through a third wedge face that the chain
        omits; the support is the (non-convex) union of the two disks.
    two_planes_glued(n): four half-plane sheets on a common line; the
        chain spans sheets 0 and 1, one full flat plane.
    bent_flat(n): same host as tripod_times_r(n); the chain spans two of
        the three sheets, an isometric plane crossing the singular line.
    cone_points(thetas): 20 x 20 grid with one extra-angle wedge of theta
        slit in per angle; size may be a single angle or a sequence.
    """
    if name == "plane":
        n = _int_size(size, 2)
        verts, edges, faces, frontier = _grid_parts(n)
        x = PEComplex(verts, edges, faces, frontier)
        coeff = _oriented_coefficients(x, x.faces)
    elif name == "tripod_times_r":
        n = _int_size(size, 2)
        x = _sheeted_line_complex(n, 3)
        coeff = _sheet_coefficients(x, n, (0, 1, 2))
    elif name == "two_planes_glued":
        n = _int_size(size, 2)
        x = _sheeted_line_complex(n, 4)
        coeff = _sheet_coefficients(x, n, (0, 1))
    elif name == "bent_flat":
        n = _int_size(size, 2)
        x = _sheeted_line_complex(n, 3)
        coeff = _sheet_coefficients(x, n, (0, 1))
    elif name == "glasses":
        x, coeff = _glasses_fixture(_int_size(size, 3))
    elif name == "cone_points":
        x, coeff = _cone_points_fixture(_cone_angles(size))
    else:
        raise ValueError(f"unknown fixture {name!r}; names: {', '.join(FIXTURES)}")
    c = Chain2(x, coeff)
    support(x, c)   # generator self-check: boundary must sit on the frontier
    return x, c


def _int_size(size, least: int) -> int:
    try:
        n = operator.index(size)
    except TypeError as exc:
        raise ValueError(f"size must be an integer, got {size!r}") from exc
    if n < least:
        raise ValueError(f"size {n} too small; need at least {least}")
    return n


def _cone_angles(size) -> list:
    if isinstance(size, (int, float)):
        angles = [float(size)]
    else:
        try:
            angles = [float(v) for v in size]
        except TypeError as exc:
            raise ValueError(f"cone_points size must be an angle or a "
                             f"sequence of angles, got {size!r}") from exc
    if not angles:
        raise ValueError("cone_points needs at least one angle")
    for th in angles:
        if not 0.0 < th <= 2.0:
            raise ValueError(f"cone angle {th} out of range (0, 2]")
    return angles


def _grid_parts(n: int):
    """Vertices/edges/faces/frontier of an n x n unit-square grid."""
    verts = [f"v{i}_{j}" for j in range(n + 1) for i in range(n + 1)]
    edges, faces, frontier = [], [], []
    for j in range(n + 1):
        for i in range(n):
            edges.append(Edge(f"h{i}_{j}", (f"v{i}_{j}", f"v{i+1}_{j}"), 1.0))
            if j in (0, n):
                frontier.append(f"h{i}_{j}")
    for j in range(n):
        for i in range(n + 1):
            edges.append(Edge(f"u{i}_{j}", (f"v{i}_{j}", f"v{i}_{j+1}"), 1.0))
            if i in (0, n):
                frontier.append(f"u{i}_{j}")
    for j in range(n):
        for i in range(n):
            faces.append(Face(f"f{i}_{j}",
                              [f"h{i}_{j}", f"u{i+1}_{j}", f"h{i}_{j+1}", f"u{i}_{j}"],
                              SQUARE))
    return verts, edges, faces, frontier


def _oriented_coefficients(x: PEComplex, face_ids) -> dict:
    """Propagate signs +-1 across shared edges so interior boundary
    contributions cancel.  Works whenever every edge has at most two
    owners inside the face set (surface-like pieces); gluing lines with
    three or more sheets need the kernel solver instead."""
    face_ids = set(face_ids)
    owners: dict[str, list] = {}
    for fid in face_ids:
        for i, eid in enumerate(x.faces[fid].loop):
            owners.setdefault(eid, []).append((fid, i))
    coeff: dict[str, int] = {}
    for start in sorted(face_ids):
        if start in coeff:
            continue
        coeff[start] = 1
        stack = [start]
        while stack:
            fid = stack.pop()
            for i, eid in enumerate(x.faces[fid].loop):
                pair = owners[eid]
                if len(pair) != 2 or pair[0][0] == pair[1][0]:
                    continue
                (f1, i1), (f2, i2) = pair
                other, oi = ((f2, i2) if f1 == fid else (f1, i1))
                want = -coeff[fid] * x.faces[fid].dirs[i] * x.faces[other].dirs[oi]
                if other in coeff:
                    if coeff[other] != want:
                        raise InvalidComplex(
                            f"face set not consistently orientable across {eid}")
                else:
                    coeff[other] = want
                    stack.append(other)
    return coeff


def _sheeted_line_complex(n: int, nsheets: int) -> PEComplex:
    """nsheets half-plane grids of size n x n glued along a common
    vertical line of n unit edges; only the line is shared."""
    verts = [f"L{j}" for j in range(n + 1)]
    edges = [Edge(f"ell{j}", (f"L{j}", f"L{j+1}"), 1.0) for j in range(n)]
    faces, frontier = [], []
    for s in range(nsheets):
        t = f"s{s}"

        def vid(i, j):
            return f"L{j}" if i == 0 else f"{t}v{i}_{j}"

        def uid(i, j):
            return f"ell{j}" if i == 0 else f"{t}u{i}_{j}"

        for i in range(1, n + 1):
            for j in range(n + 1):
                verts.append(f"{t}v{i}_{j}")
        for j in range(n + 1):
            for i in range(n):
                edges.append(Edge(f"{t}h{i}_{j}", (vid(i, j), vid(i + 1, j)), 1.0))
                if j in (0, n):
                    frontier.append(f"{t}h{i}_{j}")
        for j in range(n):
            for i in range(1, n + 1):
                edges.append(Edge(f"{t}u{i}_{j}", (vid(i, j), vid(i, j + 1)), 1.0))
                if i == n:
                    frontier.append(f"{t}u{i}_{j}")
        for j in range(n):
            for i in range(n):
                faces.append(Face(f"{t}f{i}_{j}",
                                  [f"{t}h{i}_{j}", uid(i + 1, j),
                                   f"{t}h{i}_{j+1}", uid(i, j)],
                                  SQUARE))
    return PEComplex(verts, edges, faces, frontier)


def _sheet_coefficients(x: PEComplex, n: int, sheets) -> dict:
    """Uniform per-sheet coefficients solving the boundary kernel on the
    shared line (the classic orientation-bookkeeping trap, so it is
    solved, not hand-coded)."""
    sheet_faces = [[f"s{s}f{i}_{j}" for j in range(n) for i in range(n)]
                   for s in sheets]
    line = [f"ell{j}" for j in range(n)]
    vec = _line_kernel(x, sheet_faces, line)
    return {fid: vec[si] for si, fs in enumerate(sheet_faces) for fid in fs}


def _line_kernel(x: PEComplex, sheet_faces, line_edges) -> list:
    """Smallest all-nonzero integer vector killing the boundary on every
    line edge, preferring few negative entries, then lexicographically
    largest (so three equal sheets give (1, 1, -2))."""
    k = len(sheet_faces)
    members = [set(fs) for fs in sheet_faces]
    rows = []
    for eid in sorted(line_edges):
        row = []
        for fs in members:
            tot = 0
            for fid, i in x.edge_faces[eid]:
                if fid in fs:
                    tot += x.faces[fid].dirs[i]
            row.append(tot)
        rows.append(row)
    best = None
    for cand in itertools.product(range(-k, k + 1), repeat=k):
        if 0 in cand:
            continue
        if any(sum(a * b for a, b in zip(row, cand)) != 0 for row in rows):
            continue
        key = (max(abs(v) for v in cand), sum(v < 0 for v in cand),
               tuple(-v for v in cand))
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise InvalidComplex("no full-support kernel vector for the sheets")
    return list(best[1])


def _glasses_fixture(k: int):
    """Two flat cone disks of total angle 2 pi (k triangles of apex angle
    2 pi / k each) sharing the apex, plus one wedge face joining a spoke
    of each disk; the chain covers the disks and omits the wedge."""
    radius = _GLASSES_RADIUS
    chord = 2.0 * radius * math.sin(math.pi / k)
    bridge = 2.0 * radius * math.sin(_BRIDGE_LENGTH / 2.0)
    verts = ["o"]
    edges, faces, frontier = [], [], []
    for c in (1, 2):
        for i in range(k):
            verts.append(f"g{c}r{i}")
            edges.append(Edge(f"g{c}s{i}", ("o", f"g{c}r{i}"), radius))
        for i in range(k):
            nxt = (i + 1) % k
            edges.append(Edge(f"g{c}c{i}", (f"g{c}r{i}", f"g{c}r{nxt}"), chord))
            frontier.append(f"g{c}c{i}")
            faces.append(Face(f"g{c}t{i}",
                              [f"g{c}s{i}", f"g{c}c{i}", f"g{c}s{nxt}"],
                              ("tri", (radius, chord, radius))))
    edges.append(Edge("gbc", ("g1r0", "g2r0"), bridge))
    frontier.append("gbc")
    faces.append(Face("gbw", ["g1s0", "gbc", "g2s0"],
                      ("tri", (radius, bridge, radius))))
    x = PEComplex(verts, edges, faces, frontier)
    coeff = _oriented_coefficients(x, (fid for fid in x.faces if fid != "gbw"))
    return x, coeff


def _cone_points_fixture(thetas):
    """Flat grid with one cone point of angle 2 pi + theta per entry:
    each slits the grid from an interior vertex to the rim and fills the
    gap with a theta-wedge subdivided at integer radii."""
    n = _CONE_GRID
    m = len(thetas)
    a = n // 2
    rows = [n // 2 - (m - 1) + 2 * t for t in range(m)]
    if rows[0] < 2 or rows[-1] > n - 2:
        raise ValueError(f"too many cone points ({m}) for a {n} x {n} grid")
    verts, edges, faces, frontier = _grid_parts(n)
    vset = set(verts)
    edict = {e.id: e for e in edges}
    fdict = {f.id: f for f in faces}
    span = n - a
    for t, (theta, b) in enumerate(zip(thetas, rows)):
        half = 2.0 * math.sin(theta / 2.0)     # chord per unit radius
        top = {i: f"w{t}v{i}" for i in range(a + 1, n + 1)}
        vset.update(top.values())
        for i in range(a + 1, n + 1):
            e = edict[f"u{i}_{b}"]
            edict[e.id] = Edge(e.id, (top[i], e.ends[1]), 1.0)
        for i in range(a, n):
            del edict[f"h{i}_{b}"]
            lo = (f"v{i}_{b}", f"v{i+1}_{b}")
            hi = (f"v{a}_{b}" if i == a else top[i], top[i + 1])
            edict[f"w{t}b{i}"] = Edge(f"w{t}b{i}", lo, 1.0)
            edict[f"w{t}t{i}"] = Edge(f"w{t}t{i}", hi, 1.0)
            fdict[f"f{i}_{b-1}"].loop[2] = f"w{t}b{i}"
            fdict[f"f{i}_{b}"].loop[0] = f"w{t}t{i}"
        for j in range(1, span + 1):
            edict[f"w{t}q{j}"] = Edge(f"w{t}q{j}",
                                      (f"v{a+j}_{b}", top[a + j]), j * half)
        for j in range(1, span):
            dlen = math.sqrt(j * j + (j + 1) ** 2
                             - 2.0 * j * (j + 1) * math.cos(theta))
            edict[f"w{t}d{j}"] = Edge(f"w{t}d{j}",
                                      (f"v{a+j}_{b}", top[a + j + 1]), dlen)
        fdict[f"w{t}a"] = Face(f"w{t}a", [f"w{t}b{a}", f"w{t}q1", f"w{t}t{a}"],
                               ("tri", (1.0, half, 1.0)))
        for j in range(1, span):
            dlen = edict[f"w{t}d{j}"].length
            fdict[f"w{t}x{j}"] = Face(f"w{t}x{j}",
                                      [f"w{t}b{a+j}", f"w{t}q{j+1}", f"w{t}d{j}"],
                                      ("tri", (1.0, (j + 1) * half, dlen)))
            fdict[f"w{t}y{j}"] = Face(f"w{t}y{j}",
                                      [f"w{t}d{j}", f"w{t}t{a+j}", f"w{t}q{j}"],
                                      ("tri", (dlen, 1.0, j * half)))
        frontier.append(f"w{t}q{span}")
    x = PEComplex(sorted(vset), list(edict.values()), list(fdict.values()),
                  frontier)
    coeff = _oriented_coefficients(x, x.faces)
    return x, coeff


def half_plane_subcomplex(n: int = 10):
    """Plane grid host plus its right half as a closed subcomplex.

    The half-plane is deliberately NOT the support of any relative cycle:
    its left boundary column is interior to the host, so links along that
    line are half-circles of length pi and generic incoming directions
    have no antipode there.  Negative control for the extension property.
    """
    n = _int_size(size=n, least=2)
    verts, edges, faces, frontier = _grid_parts(n)
    x = PEComplex(verts, edges, faces, frontier)
    a = n // 2
    fids = frozenset(f"f{i}_{j}" for i in range(a, n) for j in range(n))
    eids = frozenset(eid for fid in fids for eid in x.faces[fid].loop)
    vids = frozenset(v for eid in eids for v in x.edges[eid].ends)
    return x, SupportSet(fids, eids, vids)


# ----------------------------------------------------------------------
# extension property


def verify_extension_property(x: PEComplex, s, samples, r) -> dict:
    """Sample geodesic seeds inside s and prolong each to radius r.

    samples may be an int (count, seed 0), a mapping with "count"/"seed",
    or an explicit list of (p, q) location pairs.  Generated seeds are
    chords of a single face of s, so they lie in s no matter how
    non-convex it is.  Frontier stops count as successes (the truncation
    censors them); NoAntipode failures become report entries, and the
    success rate over a genuine support set must be 1.0.
    """
    pairs = _sample_pairs(x, s, samples)
    failures = []
    successes = truncated = 0
    for idx, (p, q) in enumerate(pairs):
        seg = geodesic(x, p, q)
        try:
            ext = extend_in_subcomplex(x, s, seg, r)
        except NoAntipode as err:
            at = err.location.brief() if err.location is not None else None
            failures.append({"sample": idx, "from": p.brief(),
                             "through": q.brief(), "at": at,
                             "direction": err.direction,
                             "message": str(err)})
        else:
            successes += 1
            if ext.partial:
                truncated += 1
    total = len(pairs)
    return {
        "samples": total,
        "radius": float(r),
        "successes": successes,
        "truncated": truncated,
        "failures": failures,
        "success_rate": successes / total if total else 1.0,
    }


def _sample_pairs(x: PEComplex, s, samples):
    if isinstance(samples, dict):
        count = int(samples.get("count", 100))
        seed = int(samples.get("seed", 0))
    elif isinstance(samples, int):
        count, seed = samples, 0
    else:
        return [(x.locate(p), x.locate(q)) for p, q in samples]
    faces = sorted(getattr(s, "faces"))
    if not faces:
        raise InvalidComplex("subcomplex has no faces to sample")
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        fid = faces[rng.randrange(len(faces))]
        p = _face_point(x, fid, rng)
        q = p
        for _ in range(32):
            q = _face_point(x, fid, rng)
            if math.dist(p.coords, q.coords) >= 0.2:
                break
        out.append((x.locate(p), x.locate(q)))
    return out


def _face_point(x: PEComplex, fid: str, rng) -> PointLocation:
    f = x.faces[fid]
    if f.shape == SQUARE:
        return PointLocation("face", fid,
                             coords=(rng.uniform(0.15, 0.85),
                                     rng.uniform(0.15, 0.85)))
    a, b, c = f.chart
    u, v = rng.random(), rng.random()
    if u + v > 1.0:
        u, v = 1.0 - u, 1.0 - v
    pt = geom.add(a, geom.add(geom.scale(geom.sub(b, a), u),
                              geom.scale(geom.sub(c, a), v)))
    ctr = ((a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0)
    pt = geom.add(ctr, geom.scale(geom.sub(pt, ctr), 0.7))
    return PointLocation("face", fid, coords=pt)
