"""Brute-force oracles for metric-graph quantities.

Everything here works on a plain edge-list description and dense sampling,
deliberately avoiding the library's envelope and critical-point machinery so
the two routes stay independent.
"""

import math
from collections import defaultdict

import numpy as np

PI = math.pi


class MeshGraph:
    """Dense discretization of a metric multigraph at mesh h."""

    def __init__(self, vertices, edges, h):
        self.vertices = list(vertices)
        self.edges = list(edges)          # (eid, (a, b), length)
        self.h = h
        self.vi = {v: k for k, v in enumerate(self.vertices)}
        n = len(self.vertices)
        D = np.full((n, n), np.inf)
        np.fill_diagonal(D, 0.0)
        for _, (a, b), L in self.edges:
            ia, ib = self.vi[a], self.vi[b]
            if L < D[ia, ib]:
                D[ia, ib] = D[ib, ia] = L
        for k in range(n):
            D = np.minimum(D, D[:, [k]] + D[[k], :])
        self.D = D
        self.samples = {eid: np.linspace(0.0, L, int(np.ceil(L / h)) + 1)
                        for eid, _, L in self.edges}
        self.lengths = {eid: L for eid, _, L in self.edges}
        self.ends = {eid: ab for eid, ab, _ in self.edges}

    def point_to_vertex(self, eid, t, v):
        a, b = self.ends[eid]
        return min(t + self.D[self.vi[a], self.vi[v]],
                   self.lengths[eid] - t + self.D[self.vi[b], self.vi[v]])

    def point_to_samples(self, eid, t, fid):
        """Distances from (eid, t) to every sample of edge fid (array)."""
        a, b = self.ends[eid]
        fa, fb = self.ends[fid]
        s = self.samples[fid]
        Lf = self.lengths[fid]
        Le = self.lengths[eid]
        da = self.D[self.vi[a]]
        db = self.D[self.vi[b]]
        d = np.minimum.reduce([
            t + da[self.vi[fa]] + s,
            t + da[self.vi[fb]] + (Lf - s),
            (Le - t) + db[self.vi[fa]] + s,
            (Le - t) + db[self.vi[fb]] + (Lf - s),
        ])
        if fid == eid:
            d = np.minimum(d, np.abs(s - t))
        return d

    def point_to_point(self, eid, t, fid, s):
        a, b = self.ends[eid]
        fa, fb = self.ends[fid]
        Lf, Le = self.lengths[fid], self.lengths[eid]
        d = min(t + self.D[self.vi[a], self.vi[fa]] + s,
                t + self.D[self.vi[a], self.vi[fb]] + (Lf - s),
                (Le - t) + self.D[self.vi[b], self.vi[fa]] + s,
                (Le - t) + self.D[self.vi[b], self.vi[fb]] + (Lf - s))
        if fid == eid:
            d = min(d, abs(s - t))
        return d

    def antipode_points(self, eid, t, support_edges):
        """Points of the support at distance exactly pi from (eid, t), found
        as near-pi sample clusters refined by ternary search (the distance
        profile is a concave tent around each antipode)."""
        out = []
        for fid in support_edges:
            d = self.point_to_samples(eid, t, fid)
            near = np.nonzero(d >= PI - 0.51 * self.h)[0]
            if near.size == 0:
                continue
            # split into clusters of consecutive sample indices
            splits = np.nonzero(np.diff(near) > 1)[0]
            for cluster in np.split(near, splits + 1):
                s = self.samples[fid]
                lo = max(0.0, s[cluster[0]] - self.h)
                hi = min(self.lengths[fid], s[cluster[-1]] + self.h)
                for _ in range(80):
                    m1 = lo + (hi - lo) / 3.0
                    m2 = hi - (hi - lo) / 3.0
                    if self.point_to_point(eid, t, fid, m1) < \
                       self.point_to_point(eid, t, fid, m2):
                        lo = m1
                    else:
                        hi = m2
                peak = 0.5 * (lo + hi)
                if abs(self.point_to_point(eid, t, fid, peak) - PI) < 1e-7:
                    out.append((fid, peak))
        return out

    def antipode_diameter(self, eid, t, support_edges):
        pts = self.antipode_points(eid, t, support_edges)
        best = 0.0
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = self.point_to_point(*pts[i], *pts[j])
                best = max(best, min(d, PI))
        return best, pts


def mesh_modulus(graphs, alpha, h):
    """Brute-force modulus over a family.

    graphs: list of (vertices, edges, supports) where supports is the
    hand-derived list of (support_edge_ids, poles) pairs; poles is a vertex
    pair for suspension supports, None for non-suspension supports, and
    circle-of-length-2*pi supports are omitted entirely since every point
    of such a support is a pole of some antipodal decomposition.
    """
    best = math.inf
    for vertices, edges, supports in graphs:
        mg = MeshGraph(vertices, edges, h)
        for eid, _, L in edges:
            base = mg.samples[eid]
            for support_edges, poles in supports:
                ts = list(base)
                if poles is not None:
                    # refine the bad-set boundary d(v, poles) = alpha
                    dpol = np.minimum(*[np.array([mg.point_to_vertex(eid, t, p)
                                                  for t in base]) for p in poles])
                    for k in range(len(base) - 1):
                        if (dpol[k] - alpha) * (dpol[k + 1] - alpha) < 0:
                            lo, hi = base[k], base[k + 1]
                            for _ in range(60):
                                mid = 0.5 * (lo + hi)
                                dm = min(mg.point_to_vertex(eid, mid, p)
                                         for p in poles)
                                if (dm - alpha) * (dpol[k] - alpha) > 0:
                                    lo = mid
                                else:
                                    hi = mid
                            ts.append(0.5 * (lo + hi))
                for t in ts:
                    if poles is not None:
                        if min(mg.point_to_vertex(eid, t, p) for p in poles) \
                           < alpha - 1e-12:
                            continue
                    diam, _ = mg.antipode_diameter(eid, t, support_edges)
                    best = min(best, diam)
    return best


def brute_girth(vertices, edges):
    """Shortest cycle by exhaustive DFS over simple cycles."""
    best = math.inf
    adj = defaultdict(list)
    for eid, (a, b), L in edges:
        if a == b:
            best = min(best, L)
        else:
            adj[a].append((eid, b, L))
            adj[b].append((eid, a, L))

    def dfs(start, v, used, visited, acc):
        nonlocal best
        if acc >= best:
            return
        for eid, w, L in adj[v]:
            if eid in used:
                continue
            if w == start and used:
                best = min(best, acc + L)
            elif w not in visited:
                dfs(start, w, used | {eid}, visited | {w}, acc + L)

    for s in vertices:
        dfs(s, s, frozenset(), frozenset([s]), 0.0)
    return best
