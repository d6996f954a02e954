"""Piecewise-Euclidean 2-complexes built from triangles and unit squares.

A complex is described combinatorially (vertices, edges with lengths, faces
with boundary loops) together with a frontier subcomplex marking where the
truncation ends.  Each face carries a planar chart; all metric questions
reduce to these charts plus the gluing combinatorics.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import geom
from .errors import InvalidComplex, InvalidLocation
from .geom import TOL_GEOM, Vec

SQUARE = "square"


@dataclass
class Edge:
    id: str
    ends: tuple[str, str]
    length: float


@dataclass
class Face:
    id: str
    loop: list[str]
    shape: Any                    # SQUARE or ("tri", (l0, l1, l2))
    dirs: list[int] = field(default_factory=list)
    corners: list[str] = field(default_factory=list)
    chart: list[Vec] = field(default_factory=list)
    angles: list[float] = field(default_factory=list)

    @property
    def nsides(self) -> int:
        return len(self.loop)


@dataclass(frozen=True)
class PointLocation:
    """Canonical point of a complex.

    kind "vertex": id names a vertex.
    kind "edge":   id names an edge, param in [0,1] measured from ends[0].
    kind "face":   id names a face, coords are chart coordinates.
    """

    kind: str
    id: str
    param: float = 0.0
    coords: tuple[float, float] = (0.0, 0.0)

    def sort_key(self):
        if self.kind == "vertex":
            return (0, self.id, 0.0, 0.0)
        if self.kind == "edge":
            return (1, self.id, self.param, 0.0)
        return (2, self.id, self.coords[0], self.coords[1])

    def brief(self) -> str:
        if self.kind == "vertex":
            return f"v:{self.id}"
        if self.kind == "edge":
            return f"e:{self.id}:{self.param:.9g}"
        return f"f:{self.id}:{self.coords[0]:.9g},{self.coords[1]:.9g}"


@dataclass
class Cat0Report:
    verdict: str                  # cat0 | not_locally_cat0 | locally_cat0_sc_unknown
    witness: dict | None
    sc_evidence: dict

    def to_data(self) -> dict:
        return {"verdict": self.verdict, "witness": self.witness,
                "sc_evidence": self.sc_evidence}


def _infer_loop_dirs(face_id: str, loop: list[str], edges: dict[str, Edge]) -> list[int]:
    """Choose traversal directions so consecutive loop edges chain head to tail."""
    m = len(loop)

    def ends_for(i: int, d: int) -> tuple[str, str]:
        a, b = edges[loop[i]].ends
        return (a, b) if d == 1 else (b, a)

    def backtrack(i: int, dirs: list[int]) -> list[int] | None:
        if i == m:
            return dirs if ends_for(m - 1, dirs[-1])[1] == ends_for(0, dirs[0])[0] else None
        for d in (1, -1):
            if i > 0 and ends_for(i - 1, dirs[-1])[1] != ends_for(i, d)[0]:
                continue
            out = backtrack(i + 1, dirs + [d])
            if out is not None:
                return out
        return None

    dirs = backtrack(0, [])
    if dirs is None:
        raise InvalidComplex(f"face {face_id}: boundary loop {loop} does not close up")
    return dirs


class PEComplex:
    """A finite piecewise-Euclidean 2-complex with a marked frontier."""

    def __init__(self, vertices: Iterable[str], edges: list[Edge], faces: list[Face],
                 frontier_edges: Iterable[str] = (), frontier_vertices: Iterable[str] = ()):
        self.vertices: list[str] = sorted(set(vertices))
        vset = set(self.vertices)
        # ids are embedded into link node names with ":" separators
        for name in itertools.chain(self.vertices, (e.id for e in edges),
                                    (f.id for f in faces)):
            if ":" in name:
                raise InvalidComplex(f"id {name!r} must not contain ':'")
        self.edges: dict[str, Edge] = {}
        for e in edges:
            if e.id in self.edges:
                raise InvalidComplex(f"duplicate edge id {e.id}")
            if e.length <= 0:
                raise InvalidComplex(f"edge {e.id}: length must be positive")
            for v in e.ends:
                if v not in vset:
                    raise InvalidComplex(f"edge {e.id}: unknown vertex {v}")
            self.edges[e.id] = e
        self.faces: dict[str, Face] = {}
        for f in faces:
            if f.id in self.faces:
                raise InvalidComplex(f"duplicate face id {f.id}")
            self._prepare_face(f)
            self.faces[f.id] = f
        self.frontier_edges: set[str] = set(frontier_edges)
        for eid in self.frontier_edges:
            if eid not in self.edges:
                raise InvalidComplex(f"frontier edge {eid} does not exist")
        self.frontier_vertices: set[str] = set(frontier_vertices)
        for eid in self.frontier_edges:
            self.frontier_vertices.update(self.edges[eid].ends)
        for v in self.frontier_vertices:
            if v not in vset:
                raise InvalidComplex(f"frontier vertex {v} does not exist")
        self._build_incidence()
        self._cache: dict = {}

    # ------------------------------------------------------------------
    # construction helpers

    def _prepare_face(self, f: Face) -> None:
        for eid in f.loop:
            if eid not in self.edges:
                raise InvalidComplex(f"face {f.id}: unknown edge {eid}")
        if f.shape == SQUARE:
            if len(f.loop) != 4:
                raise InvalidComplex(f"face {f.id}: square needs a 4-edge loop")
            side_lengths = [1.0] * 4
            chart = list(geom.SQUARE_CHART)
        else:
            kind, lengths = f.shape
            if kind != "tri" or len(lengths) != 3:
                raise InvalidComplex(f"face {f.id}: unknown shape {f.shape!r}")
            if len(f.loop) != 3:
                raise InvalidComplex(f"face {f.id}: triangle needs a 3-edge loop")
            side_lengths = [float(x) for x in lengths]
            try:
                chart = geom.triangle_chart(*side_lengths)
            except ValueError as exc:
                raise InvalidComplex(f"face {f.id}: {exc}") from exc
        for i, eid in enumerate(f.loop):
            if abs(self.edges[eid].length - side_lengths[i]) > 1e-7:
                raise InvalidComplex(
                    f"face {f.id}: side {i} has length {side_lengths[i]} but edge "
                    f"{eid} has length {self.edges[eid].length}")
        f.dirs = _infer_loop_dirs(f.id, f.loop, self.edges)
        f.corners = []
        for i, eid in enumerate(f.loop):
            a, b = self.edges[eid].ends
            f.corners.append(a if f.dirs[i] == 1 else b)
        f.chart = chart
        m = len(chart)
        f.angles = []
        for i in range(m):
            u = geom.sub(chart[(i - 1) % m], chart[i])
            w = geom.sub(chart[(i + 1) % m], chart[i])
            f.angles.append(geom.angle_between(u, w))

    def _build_incidence(self) -> None:
        self.vertex_edge_ends: dict[str, list[tuple[str, int]]] = {v: [] for v in self.vertices}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            self.vertex_edge_ends[e.ends[0]].append((eid, 0))
            self.vertex_edge_ends[e.ends[1]].append((eid, 1))
        self.vertex_corners: dict[str, list[tuple[str, int]]] = {v: [] for v in self.vertices}
        self.edge_faces: dict[str, list[tuple[str, int]]] = {eid: [] for eid in self.edges}
        for fid in sorted(self.faces):
            f = self.faces[fid]
            for i, eid in enumerate(f.loop):
                self.edge_faces[eid].append((fid, i))
            for i, v in enumerate(f.corners):
                self.vertex_corners[v].append((fid, i))

    # ------------------------------------------------------------------
    # serialization

    @staticmethod
    def from_data(data: dict) -> "PEComplex":
        try:
            vertices = [str(v["id"]) for v in data["vertices"]]
            edges = [Edge(str(e["id"]), (str(e["ends"][0]), str(e["ends"][1])),
                          float(e["len"])) for e in data["edges"]]
            faces = []
            for fd in data["faces"]:
                shape = fd["shape"]
                if shape == SQUARE:
                    parsed = SQUARE
                elif isinstance(shape, dict) and "tri" in shape:
                    parsed = ("tri", tuple(float(x) for x in shape["tri"]))
                else:
                    raise InvalidComplex(f"face {fd.get('id')}: unknown shape {shape!r}")
                faces.append(Face(str(fd["id"]), [str(x) for x in fd["loop"]], parsed))
            frontier = data.get("frontier", {})
        except (KeyError, TypeError, IndexError) as exc:
            raise InvalidComplex(f"malformed complex data: {exc}") from exc
        return PEComplex(vertices, edges, faces,
                         frontier.get("edges", ()), frontier.get("vertices", ()))

    def to_data(self) -> dict:
        faces = []
        for fid in sorted(self.faces):
            f = self.faces[fid]
            shape = SQUARE if f.shape == SQUARE else {"tri": list(f.shape[1])}
            faces.append({"id": fid, "loop": list(f.loop), "shape": shape})
        return {
            "vertices": [{"id": v} for v in self.vertices],
            "edges": [{"id": eid, "ends": list(self.edges[eid].ends),
                       "len": self.edges[eid].length} for eid in sorted(self.edges)],
            "faces": faces,
            "frontier": {"edges": sorted(self.frontier_edges),
                         "vertices": sorted(self.frontier_vertices)},
        }

    # ------------------------------------------------------------------
    # frontier and incidence queries

    def is_frontier(self, loc: PointLocation) -> bool:
        if loc.kind == "vertex":
            return loc.id in self.frontier_vertices
        if loc.kind == "edge":
            if loc.id in self.frontier_edges:
                return True
            # an edge endpoint may sit on the frontier while the interior does not
            return False
        return False

    def faces_at(self, loc: PointLocation) -> list[str]:
        if loc.kind == "face":
            return [loc.id]
        if loc.kind == "edge":
            return sorted({fid for fid, _ in self.edge_faces[loc.id]})
        return sorted({fid for fid, _ in self.vertex_corners[loc.id]})

    def edge_occurrences(self, fid: str, eid: str) -> list[int]:
        return [i for i, x in enumerate(self.faces[fid].loop) if x == eid]

    # ------------------------------------------------------------------
    # charts

    def side_endpoints(self, fid: str, i: int) -> tuple[Vec, Vec]:
        f = self.faces[fid]
        return f.chart[i], f.chart[(i + 1) % f.nsides]

    def embed(self, loc: PointLocation, fid: str) -> Vec:
        """Chart coordinates of loc inside face fid (loc must lie on its closure)."""
        f = self.faces[fid]
        if loc.kind == "face":
            if loc.id != fid:
                raise InvalidLocation(f"{loc} is not on face {fid}")
            return loc.coords
        if loc.kind == "edge":
            occ = self.edge_occurrences(fid, loc.id)
            if not occ:
                raise InvalidLocation(f"edge {loc.id} is not a side of face {fid}")
            i = occ[0]
            a, b = self.side_endpoints(fid, i)
            t = loc.param if f.dirs[i] == 1 else 1.0 - loc.param
            return geom.add(a, geom.scale(geom.sub(b, a), t))
        for i, v in enumerate(f.corners):
            if v == loc.id:
                return f.chart[i]
        raise InvalidLocation(f"vertex {loc.id} is not a corner of face {fid}")

    def locate(self, loc: PointLocation) -> PointLocation:
        """Canonical form: face points on a side become edge points, edge points at
        an endpoint become vertices.  Raises InvalidLocation for out-of-range data."""
        if loc.kind == "vertex":
            if loc.id not in set(self.vertices):
                raise InvalidLocation(f"unknown vertex {loc.id}")
            return PointLocation("vertex", loc.id)
        if loc.kind == "edge":
            e = self.edges.get(loc.id)
            if e is None:
                raise InvalidLocation(f"unknown edge {loc.id}")
            t = loc.param
            if t < -TOL_GEOM or t > 1.0 + TOL_GEOM:
                raise InvalidLocation(f"edge parameter {t} outside [0,1]")
            if t * e.length < TOL_GEOM:
                return PointLocation("vertex", e.ends[0])
            if (1.0 - t) * e.length < TOL_GEOM:
                return PointLocation("vertex", e.ends[1])
            return PointLocation("edge", loc.id, param=t)
        f = self.faces.get(loc.id)
        if f is None:
            raise InvalidLocation(f"unknown face {loc.id}")
        p = loc.coords
        if not geom.point_in_convex(p, f.chart, tol=1e-7):
            raise InvalidLocation(f"coords {p} outside face {loc.id}")
        m = f.nsides
        for i in range(m):
            if geom.dist(p, f.chart[i]) < TOL_GEOM:
                return PointLocation("vertex", f.corners[i])
        for i in range(m):
            a, b = self.side_endpoints(fid=loc.id, i=i)
            if geom.point_segment_dist(p, a, b) < TOL_GEOM:
                s = geom.seg_param_at(a, b, p)
                t = s if f.dirs[i] == 1 else 1.0 - s
                return self.locate(PointLocation("edge", f.loop[i], param=t))
        return PointLocation("face", loc.id, coords=(p[0], p[1]))

    def same_point(self, a: PointLocation, b: PointLocation, tol: float = TOL_GEOM) -> bool:
        ca, cb = self.locate(a), self.locate(b)
        if ca.kind != cb.kind or ca.id != cb.id:
            return False
        if ca.kind == "edge":
            return abs(ca.param - cb.param) * self.edges[ca.id].length <= tol
        if ca.kind == "face":
            return geom.dist(ca.coords, cb.coords) <= tol
        return True

    # ------------------------------------------------------------------

    def total_edge_length(self) -> float:
        return sum(e.length for e in self.edges.values())


def parse_location(s: str) -> PointLocation:
    """Inverse of PointLocation.brief: "v:ID", "e:ID:T", or "f:ID:X,Y"."""
    parts = s.split(":")
    try:
        if parts[0] == "v" and len(parts) == 2:
            return PointLocation("vertex", parts[1])
        if parts[0] == "e" and len(parts) == 3:
            return PointLocation("edge", parts[1], param=float(parts[2]))
        if parts[0] == "f" and len(parts) == 3:
            xs, ys = parts[2].split(",")
            return PointLocation("face", parts[1], coords=(float(xs), float(ys)))
    except (ValueError, IndexError):
        pass
    raise InvalidLocation(f"cannot parse location string {s!r}")


def build_complex(data: dict) -> PEComplex:
    """Build and validate a complex from its dict description."""
    return PEComplex.from_data(data)


def load_complex(path: str) -> PEComplex:
    with open(path, "r", encoding="utf-8") as fh:
        return build_complex(json.load(fh))


def save_complex(x: PEComplex, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(x.to_data(), fh, indent=1, sort_keys=False)
        fh.write("\n")


# ----------------------------------------------------------------------
# CAT(0) validation


def _collapse_evidence(x: PEComplex) -> dict:
    """Greedy free-face collapse.  Full collapse to a point certifies simple
    connectivity; anything else is honestly inconclusive."""
    faces_left = set(x.faces)
    edges_left = set(x.edges)
    verts_left = set(x.vertices)
    edge_faces = {eid: {fid for fid, _ in x.edge_faces[eid]} for eid in x.edges}
    vert_edges = {v: {eid for eid, _ in x.vertex_edge_ends[v]} for v in x.vertices}
    steps = 0
    progress = True
    while progress:
        progress = False
        for eid in sorted(edges_left):
            owners = edge_faces[eid] & faces_left
            if len(owners) == 1:
                fid = owners.pop()
                faces_left.discard(fid)
                edges_left.discard(eid)
                steps += 1
                progress = True
        for v in sorted(verts_left):
            inc = vert_edges[v] & edges_left
            if len(inc) == 1 and not any(
                    fid in faces_left for fid, _ in x.vertex_corners[v]):
                eid = inc.pop()
                edges_left.discard(eid)
                verts_left.discard(v)
                steps += 1
                progress = True
    collapsed = not faces_left and not edges_left and len(verts_left) == 1
    return {"method": "free_face_collapse", "collapsed": collapsed, "steps": steps,
            "remaining": {"vertices": len(verts_left), "edges": len(edges_left),
                          "faces": len(faces_left)}}


def validate_cat0(x: PEComplex) -> Cat0Report:
    """Gromov link condition at every interior vertex plus a simple-connectivity
    check by collapsibility.  Frontier vertices have partial links and are skipped."""
    from .link_graphs import link_at, girth

    worst = None
    for v in x.vertices:
        if v in x.frontier_vertices:
            continue
        if not x.vertex_corners[v] and not x.vertex_edge_ends[v]:
            continue
        link = link_at(x, PointLocation("vertex", v), allow_partial=True)
        g, cyc = girth(link.graph, with_cycle=True)
        if g < 2.0 * math.pi - TOL_GEOM:
            witness = {"vertex": v, "cycle_length": g,
                       "cycle": [str(n) for n in cyc]}
            if worst is None or g < worst["cycle_length"]:
                worst = witness
    if worst is not None:
        x._cache["cat0_verdict"] = "not_locally_cat0"
        return Cat0Report("not_locally_cat0", worst,
                          {"method": "free_face_collapse", "collapsed": None,
                           "note": "skipped, local condition already fails"})
    sc = _collapse_evidence(x)
    verdict = "cat0" if sc["collapsed"] else "locally_cat0_sc_unknown"
    report = Cat0Report(verdict, None, sc)
    x._cache["cat0_verdict"] = verdict
    return report


def cat0_verdict(x: PEComplex) -> str:
    if "cat0_verdict" not in x._cache:
        validate_cat0(x)
    return x._cache["cat0_verdict"]
