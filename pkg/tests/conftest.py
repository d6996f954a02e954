"""Shared builders for small test complexes."""

import math

from catflat.complex_core import SQUARE, Edge, Face, PEComplex


def square_grid(n: int) -> PEComplex:
    """n x n board of unit squares; the outer rim is frontier."""
    vertices = [f"v{i}_{j}" for i in range(n + 1) for j in range(n + 1)]
    edges = []
    for i in range(n):
        for j in range(n + 1):
            edges.append(Edge(f"h{i}_{j}", (f"v{i}_{j}", f"v{i+1}_{j}"), 1.0))
    for i in range(n + 1):
        for j in range(n):
            edges.append(Edge(f"u{i}_{j}", (f"v{i}_{j}", f"v{i}_{j+1}"), 1.0))
    faces = [Face(f"f{i}_{j}",
                  [f"h{i}_{j}", f"u{i+1}_{j}", f"h{i}_{j+1}", f"u{i}_{j}"],
                  SQUARE)
             for i in range(n) for j in range(n)]
    frontier = ([f"h{i}_{j}" for i in range(n) for j in (0, n)]
                + [f"u{i}_{j}" for i in (0, n) for j in range(n)])
    return PEComplex(vertices, edges, faces, frontier_edges=frontier)


def triangle_cone(k: int, apex_each: float, radius: float = 1.0) -> PEComplex:
    """k isoceles triangles of apex angle apex_each glued around one vertex;
    the rim is frontier, so the apex is the only interior vertex."""
    chord = 2.0 * radius * math.sin(0.5 * apex_each)
    vertices = ["o"] + [f"r{i}" for i in range(k)]
    edges = [Edge(f"s{i}", ("o", f"r{i}"), radius) for i in range(k)]
    edges += [Edge(f"c{i}", (f"r{i}", f"r{(i+1) % k}"), chord) for i in range(k)]
    faces = [Face(f"t{i}", [f"s{i}", f"c{i}", f"s{(i+1) % k}"],
                  ("tri", (radius, chord, radius)))
             for i in range(k)]
    return PEComplex(vertices, edges, faces,
                     frontier_edges=[f"c{i}" for i in range(k)])


def three_square_fan() -> PEComplex:
    """Three unit squares glued pairwise along spokes out of one vertex.
    The central vertex link is a cycle of three right angles, so the total
    angle there is 3*pi/2 and the link condition fails."""
    vertices = ["v"] + [f"a{i}" for i in range(3)] + [f"m{i}" for i in range(3)]
    edges = [Edge(f"sp{i}", ("v", f"a{i}"), 1.0) for i in range(3)]
    for i in range(3):
        edges.append(Edge(f"p{i}", (f"a{i}", f"m{i}"), 1.0))
        edges.append(Edge(f"q{i}", (f"m{i}", f"a{(i+1) % 3}"), 1.0))
    faces = [Face(f"sq{i}", [f"sp{i}", f"p{i}", f"q{i}", f"sp{(i+1) % 3}"], SQUARE)
             for i in range(3)]
    frontier = [f"p{i}" for i in range(3)] + [f"q{i}" for i in range(3)]
    return PEComplex(vertices, edges, faces, frontier_edges=frontier)
