"""Shared builders for the tests: small graphs, random blobs and random trees."""

import random
from itertools import product

from treesplit.chains import Plan
from treesplit.errors import BadInput
from treesplit.oracle import matrix_tree_count
from treesplit.planar import PlanarGraph, PlanarRegion, build_grid_region
from treesplit.regiontree import WeightedTree


def figure1_graph():
    """Nested faces: outer square, quadrilateral on a cut vertex, triangle on another.

    Depths: outer 0, the ring between square and quad 1, the quad 2, the
    triangle inside the quad 3.
    """
    pts = [
        (0, 0), (6, 0), (6, 6), (0, 6),  # A B C D
        (5, 1), (5.5, 5.5), (1, 5),  # E G H
        (4, 3), (3, 4),  # I J
    ]
    A, B, C, D, E, G, H, I, J = range(9)
    edges = [
        (A, B), (B, C), (C, D), (D, A),
        (A, E), (E, G), (G, H), (H, A),
        (G, I), (I, J), (J, G),
    ]
    return PlanarGraph(pts, edges)


def random_blob(rng: random.Random, size, spread=6):
    """Random 4-connected cell set grown from the origin (holes allowed)."""
    cells = {(0, 0)}
    frontier = [(0, 0)]
    while len(cells) < size:
        x, y = rng.choice(frontier)
        dx, dy = rng.choice([(1, 0), (-1, 0), (0, 1), (0, -1)])
        c = (x + dx, y + dy)
        if abs(c[0]) > spread or abs(c[1]) > spread:
            continue
        if c not in cells:
            cells.add(c)
            frontier.append(c)
    return cells


def random_sc_region(rng: random.Random, size, spread=6, tries=200):
    for _ in range(tries):
        cells = random_blob(rng, size, spread)
        r = build_grid_region(cells)
        if r.simply_connected:
            return r
    raise RuntimeError("no simply connected blob found")


def random_weighted_tree(rng: random.Random, n, max_w=3):
    weight = {v: rng.randint(1, max_w) for v in range(n)}
    edges = {}
    for v in range(1, n):
        edges[v - 1] = (rng.randrange(v), v)
    return WeightedTree(weight, edges)


def nx_graph(region):
    import networkx as nx

    g = nx.MultiGraph()
    g.add_nodes_from(range(region.n))
    g.add_edges_from(region.edges)
    return g


def all_two_plans(g: PlanarRegion):
    """Every connected, exactly balanced 2-plan of ``g`` keyed label-free, with its tree product."""
    out = {}
    for bits in product((1, 2), repeat=g.n - 1):
        assign = (1,) + bits
        try:
            p = Plan(g, assign, 2)
        except BadInput:
            continue
        w = 1
        for d in (1, 2):
            vs = p.members[d]
            w *= matrix_tree_count(PlanarRegion.induced(g, vs))
        out[p.key()] = w
    return out
