"""Lattices, grid regions, duals and wired duals.

Conventions for Z^2: a primal vertex is an integer point ``(x, y)``; a face
(dual vertex) is the unit square with lower-left corner ``(x, y)``.  The same
square ids are used for faces inside a region and for the lattice squares
outside it, so the wired dual needs no special external ids.  Directions are
indexed counter-clockwise: 0=E, 1=N, 2=W, 3=S.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field

from .errors import BadInput, DisconnectedInput, NotSimplyConnected, NotSpanningTree

DX = (1, 0, -1, 0)
DY = (0, 1, 0, -1)

OUTER = "outer"


@dataclass(frozen=True)
class LatticeParams:
    """Regularity constants of a grid-like lattice.

    ``b`` bounds primal and dual degrees, ``rho`` is the directional-exit
    probability, ``R`` the density radius, ``C`` the density constant and
    ``L`` the escape-time constant.
    """

    b: float
    rho: float
    R: float
    C: float
    L: float

    def __post_init__(self):
        for name in ("b", "rho", "R", "C", "L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"lattice parameter {name} must be positive")
        if self.rho > 1:
            raise ValueError("rho must be at most 1")


# rho = 1/8 follows from the eight-arc symmetry argument for Z^2; C = 5 covers
# the radius-1 ball (5 lattice points).  R and L are heuristic defaults.
Z2_PARAMS = LatticeParams(b=4, rho=1 / 8, R=1.0, C=5.0, L=2.0)


class Lattice(ABC):
    """Infinite plane lattice with its dual embedding."""

    params: LatticeParams
    name: str

    @abstractmethod
    def vertex_point(self, v) -> tuple[float, float]: ...

    @abstractmethod
    def face_point(self, f) -> tuple[float, float]: ...

    @abstractmethod
    def neighbors(self, v) -> list: ...

    @abstractmethod
    def face_neighbors(self, f) -> list:
        """Dual neighbours of ``f`` as ``(face, primal_edge)`` pairs."""

    @abstractmethod
    def face_edges(self, f) -> list:
        """Primal edges bounding ``f`` in cyclic order."""

    @abstractmethod
    def edge_faces(self, edge) -> tuple:
        """The two faces separated by a primal edge."""


def z2_edge(u, v):
    return (u, v) if u <= v else (v, u)


class Z2Lattice(Lattice):
    name = "Z2"

    def __init__(self, params: LatticeParams = Z2_PARAMS):
        self.params = params

    def vertex_point(self, v):
        return (float(v[0]), float(v[1]))

    def face_point(self, f):
        return (f[0] + 0.5, f[1] + 0.5)

    def neighbors(self, v):
        x, y = v
        return [(x + DX[d], y + DY[d]) for d in range(4)]

    def face_edges(self, f):
        x, y = f
        # counter-clockwise starting with the bottom side
        return [
            ((x, y), (x + 1, y)),
            ((x + 1, y), (x + 1, y + 1)),
            ((x, y + 1), (x + 1, y + 1)),
            ((x, y), (x, y + 1)),
        ]

    def edge_faces(self, edge):
        (x0, y0), (x1, y1) = z2_edge(*edge)
        if y0 == y1:
            return ((x0, y0 - 1), (x0, y0))
        return ((x0 - 1, y0), (x0, y0))

    def face_neighbors(self, f):
        x, y = f
        out = []
        for d in range(4):
            out.append(((x + DX[d], y + DY[d]), square_side(x, y, d)))
        return out


Z2 = Z2Lattice()


def square_side(x, y, d):
    """Primal edge crossed when leaving square (x, y) in direction d."""
    if d == 0:
        return ((x + 1, y), (x + 1, y + 1))
    if d == 1:
        return ((x, y + 1), (x + 1, y + 1))
    if d == 2:
        return ((x, y), (x, y + 1))
    return ((x, y), (x + 1, y))


# ---------------------------------------------------------------------------
# generic embedded plane graphs (used for face depths and small examples)


class PlanarGraph:
    """A connected straight-line plane graph given by points and edges.

    Multi-edges are not supported; the rotation system is read off the
    coordinates.
    """

    def __init__(self, points, edges):
        self.points = [tuple(map(float, p)) for p in points]
        self.edges = [tuple(e) for e in edges]
        n = len(self.points)
        inc = [[] for _ in range(n)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            inc[v].append(i)
        self.rotation = []
        for v in range(n):
            px, py = self.points[v]

            def angle(e, v=v, px=px, py=py):
                w = self.other(e, v)
                qx, qy = self.points[w]
                return math.atan2(qy - py, qx - px)

            self.rotation.append(sorted(inc[v], key=angle))
        self._faces = None

    def other(self, e, v):
        a, b = self.edges[e]
        return b if a == v else a

    def _trace(self):
        # darts (edge, tail); next dart keeps the face on the left
        face_of = {}
        faces = []
        for e, (a, b) in enumerate(self.edges):
            for tail in (a, b):
                if (e, tail) in face_of:
                    continue
                fid = len(faces)
                darts = []
                cur = (e, tail)
                while cur not in face_of:
                    face_of[cur] = fid
                    darts.append(cur)
                    ce, ct = cur
                    head = self.other(ce, ct)
                    rot = self.rotation[head]
                    k = rot.index(ce)
                    ne = rot[(k - 1) % len(rot)]
                    cur = (ne, head)
                faces.append(darts)
        self._faces = faces
        self._face_of = face_of

    @property
    def faces(self):
        if self._faces is None:
            self._trace()
        return self._faces

    def face_area(self, fid):
        s = 0.0
        for e, tail in self.faces[fid]:
            x0, y0 = self.points[tail]
            x1, y1 = self.points[self.other(e, tail)]
            s += x0 * y1 - x1 * y0
        return s / 2

    @property
    def outer_face(self):
        return min(range(len(self.faces)), key=lambda f: (self.face_area(f), f))

    def dual_edges(self):
        """List of ``(face_left_of_tail_dart, face_other, edge)`` per edge."""
        self.faces
        out = []
        for e, (a, b) in enumerate(self.edges):
            out.append((self._face_of[(e, a)], self._face_of[(e, b)], e))
        return out

    def dual_adjacency(self):
        adj = {f: [] for f in range(len(self.faces))}
        for f, g, e in self.dual_edges():
            adj[f].append((g, e))
            adj[g].append((f, e))
        return adj

    def face_depths(self):
        adj = self.dual_adjacency()
        outer = self.outer_face
        depth = {f: (0 if f == outer else 1) for f in adj}
        for g in adj:
            if g == outer:
                continue
            seen = {outer, g}
            dq = deque([outer])
            while dq:
                f = dq.popleft()
                for h, _ in adj[f]:
                    if h not in seen:
                        seen.add(h)
                        dq.append(h)
            for f in adj:
                if f not in seen:
                    depth[f] += 1
        return depth


# ---------------------------------------------------------------------------
# grid regions


class PlanarRegion:
    """Finite connected induced subgraph of Z^2 with vertex weights.

    Vertex ids follow the sorted order of the cells; edge ids follow the
    sorted order of ``(u, v)`` pairs.  ``rot_e``/``rot_n`` hold, per vertex,
    the incident edge and neighbour in direction E, N, W, S (``-1`` if absent).
    """

    def __init__(self, cells, weights=None, lattice: Lattice = Z2):
        cells = sorted({(int(x), int(y)) for x, y in cells})
        if not cells:
            raise BadInput("region needs at least one cell")
        self.lattice = lattice
        self.cells = tuple(cells)
        self.index = {c: i for i, c in enumerate(cells)}
        n = len(cells)
        if weights is None:
            self.weights = (1,) * n
        else:
            ws = []
            for c in cells:
                w = weights.get(c, 1)
                if int(w) != w or w <= 0:
                    raise BadInput(f"weight of {c} must be a positive integer")
                ws.append(int(w))
            self.weights = tuple(ws)
        self.total_weight = sum(self.weights)

        # cells are sorted, so emitting the up-neighbour before the right one keeps edges sorted
        index = self.index
        edges = []
        rot_e = [-1] * (4 * n)
        rot_n = [-1] * (4 * n)
        for i, (x, y) in enumerate(cells):
            j = index.get((x, y + 1))
            if j is not None:
                k = len(edges)
                edges.append((i, j))
                rot_e[4 * i + 1] = k
                rot_n[4 * i + 1] = j
                rot_e[4 * j + 3] = k
                rot_n[4 * j + 3] = i
            j = index.get((x + 1, y))
            if j is not None:
                k = len(edges)
                edges.append((i, j))
                rot_e[4 * i] = k
                rot_n[4 * i] = j
                rot_e[4 * j + 2] = k
                rot_n[4 * j + 2] = i
        self.edges = tuple(edges)
        self._edge_index = None
        self.rot_e = rot_e
        self.rot_n = rot_n

        self._check_connected()
        self.faces = frozenset(
            cells[v] for v in range(n)
            if rot_n[4 * v] >= 0 and rot_n[4 * v + 1] >= 0 and rot_n[4 * rot_n[4 * v] + 1] >= 0
        )
        xs = [c[0] for c in cells]
        ys = [c[1] for c in cells]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))
        self._cache = {}

    @classmethod
    def induced(cls, parent: "PlanarRegion", verts) -> "PlanarRegion":
        """Sub-region on parent vertex ids ``verts`` (sorted, known to be connected).

        Local vertex ``i`` is ``verts[i]``; weights carry over.
        """
        self = object.__new__(cls)
        n = len(verts)
        pc = parent.cells
        cells = tuple(pc[v] for v in verts)
        self.lattice = parent.lattice
        self.cells = cells
        self.index = dict(zip(cells, range(n)))
        pw = parent.weights
        self.weights = tuple(pw[v] for v in verts)
        self.total_weight = sum(self.weights)
        local = dict(zip(verts, range(n)))
        prn = parent.rot_n
        edges = []
        rot_e = [-1] * (4 * n)
        rot_n = [-1] * (4 * n)
        for i, v in enumerate(verts):
            for d in (1, 0):  # same emission order as the constructor
                j = local.get(prn[4 * v + d])
                if j is not None:
                    k = len(edges)
                    edges.append((i, j))
                    rot_e[4 * i + d] = k
                    rot_n[4 * i + d] = j
                    rot_e[4 * j + d + 2] = k
                    rot_n[4 * j + d + 2] = i
        self.edges = tuple(edges)
        self._edge_index = None
        self.rot_e = rot_e
        self.rot_n = rot_n
        self.faces = frozenset(
            cells[v] for v in range(n)
            if rot_n[4 * v] >= 0 and rot_n[4 * v + 1] >= 0 and rot_n[4 * rot_n[4 * v] + 1] >= 0
        )
        xs = [c[0] for c in cells]
        ys = [c[1] for c in cells]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))
        self._cache = {}
        return self

    # -- basic queries
    @property
    def n(self):
        return len(self.cells)

    @property
    def m(self):
        return len(self.edges)

    def vertex(self, cell):
        return self.index[tuple(cell)]

    @property
    def edge_index(self):
        if self._edge_index is None:
            self._edge_index = {e: k for k, e in enumerate(self.edges)}
        return self._edge_index

    def edge_between(self, a, b):
        return self.edge_index[(a, b) if a < b else (b, a)]

    def neighbors(self, v):
        return [w for w in self.rot_n[4 * v: 4 * v + 4] if w >= 0]

    def adjacency(self):
        """``{v: [(w, edge), ...]}`` for generic graph routines."""
        adj = {v: [] for v in range(self.n)}
        for k, (a, b) in enumerate(self.edges):
            adj[a].append((b, k))
            adj[b].append((a, k))
        return adj

    def edge_faces(self, k):
        a, b = self.edges[k]
        (x0, y0), (_, y1) = self.cells[a], self.cells[b]
        if y0 == y1:
            return ((x0, y0 - 1), (x0, y0))
        return ((x0 - 1, y0), (x0, y0))

    def _check_connected(self):
        seen = bytearray(self.n)
        seen[0] = 1
        stack = [0]
        count = 1
        while stack:
            v = stack.pop()
            for w in self.rot_n[4 * v: 4 * v + 4]:
                if w >= 0 and not seen[w]:
                    seen[w] = 1
                    count += 1
                    stack.append(w)
        if count != self.n:
            raise DisconnectedInput(f"region has {self.n} cells but only {count} are connected")

    @property
    def simply_connected(self):
        val = self._cache.get("sc")
        if val is None:
            val = euler_holes(set(self.cells)) == 0  # cells are connected here
            self._cache["sc"] = val
        return val

    def outer_boundary(self):
        """External squares met while walking the outer face, in cyclic order."""
        if self.m == 0:
            return []
        v0 = min(range(self.n), key=lambda v: (self.cells[v][0], self.cells[v][1]))
        rot_e = self.rot_e
        rot_n = self.rot_n

        def scan(v, d_in):
            for k in (1, 2, 3, 4):
                d = (d_in - k) % 4
                if rot_e[4 * v + d] >= 0:
                    return d
            raise AssertionError("isolated vertex")

        start = (v0, scan(v0, 3))
        out = []
        state = start
        while True:
            v, d = state
            x, y = self.cells[v]
            # square on the left of the dart leaving (x, y) in direction d
            sq = ((x, y), (x - 1, y), (x - 1, y - 1), (x, y - 1))[d]
            if not out or out[-1] != sq:
                out.append(sq)
            w = rot_n[4 * v + d]
            state = (w, scan(w, (d + 2) % 4))
            if state == start:
                break
        if len(out) > 1 and out[0] == out[-1]:
            out.pop()
        return out

    def planar_graph(self):
        return PlanarGraph(self.cells, self.edges)

    def to_json(self):
        return {
            "lattice": self.lattice.name,
            "cells": [list(c) for c in self.cells],
            "weights": {f"{x},{y}": w for (x, y), w in zip(self.cells, self.weights) if w != 1},
        }

    def __repr__(self):
        return f"PlanarRegion(n={self.n}, m={self.m}, faces={len(self.faces)}, weight={self.total_weight})"


def build_grid_region(cells, weights=None) -> PlanarRegion:
    """Induced subgraph of Z^2 on ``cells`` (unit weights when omitted)."""
    if weights is not None:
        weights = {tuple(k): v for k, v in weights.items()}
    return PlanarRegion(cells, weights)


def grid_cells(width, height, x0=0, y0=0):
    return [(x0 + i, y0 + j) for i in range(width) for j in range(height)]


def grid_region(width, height, weights=None) -> PlanarRegion:
    return build_grid_region(grid_cells(width, height), weights)


# ---------------------------------------------------------------------------
# duals


@dataclass
class WiredDual:
    internal: frozenset
    external: frozenset
    edges: dict = field(default_factory=dict)  # primal edge id -> (face, face)

    def is_external(self, f):
        return f in self.external

    def degree(self, f):
        return sum((a == f) + (b == f) for a, b in self.edges.values())


def wired_dual(region: PlanarRegion, lattice: Lattice | None = None) -> WiredDual:
    lattice = lattice or region.lattice
    edges = {}
    touched = set()
    for k, (a, b) in enumerate(region.edges):
        f, g = lattice.edge_faces((region.cells[a], region.cells[b]))
        edges[k] = (f, g)
        touched.add(f)
        touched.add(g)
    internal = frozenset(region.faces)
    return WiredDual(internal=internal, external=frozenset(touched - internal), edges=edges)


def face_depths(region) -> dict:
    """Depth of every face: outer face 0, others count enclosing faces.

    Works for :class:`PlanarRegion` (unit squares keyed by lower-left corner,
    the outer face by ``OUTER``, holes by ``("hole", cell)``) and for
    :class:`PlanarGraph` (keyed by face index).
    """
    if isinstance(region, PlanarGraph):
        return region.face_depths()
    if region.m == 0:
        return {OUTER: 0}
    g = region.planar_graph()
    depths = g.face_depths()
    outer = g.outer_face
    out = {}
    for fid, darts in enumerate(g.faces):
        if fid == outer:
            out[OUTER] = depths[fid]
            continue
        verts = [g.edges[e][0] if g.edges[e][0] == tail else tail for e, tail in darts]
        cells = sorted(region.cells[v] for v in verts)
        if len(darts) == 4:
            out[cells[0]] = depths[fid]
        else:
            out[("hole", cells[0])] = depths[fid]
    return out


def is_simply_connected(vertex_set, lattice: Lattice = Z2) -> bool:
    """True iff every absent lattice point is 8-connected to the outside of the bbox.

    For a 4-connected cell set this is the same as every bounded face of the
    induced graph being a unit square.
    """
    cells = {tuple(c) for c in vertex_set}
    if not cells:
        return True
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    x0, x1, y0, y1 = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1
    start = (x0, y0)
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                q = (x + dx, y + dy)
                if x0 <= q[0] <= x1 and y0 <= q[1] <= y1 and q not in cells and q not in seen:
                    seen.add(q)
                    stack.append(q)
    return len(seen) + len(cells) == (x1 - x0 + 1) * (y1 - y0 + 1)


def euler_holes(vertex_set) -> int:
    """Hole count of a 4-connected cell set from V - E + F = 1 - holes.

    The complex has the cells as vertices, lattice-adjacent pairs as edges
    and fully present unit squares as faces.
    """
    cells = vertex_set if isinstance(vertex_set, (set, frozenset)) else {tuple(c) for c in vertex_set}
    E = F = 0
    for (x, y) in cells:
        r = (x + 1, y) in cells
        u = (x, y + 1) in cells
        E += r + u
        if r and u and (x + 1, y + 1) in cells:
            F += 1
    return 1 - (len(cells) - E + F)


def dual_tree_to_primal_tree(region: PlanarRegion, dual_tree) -> set:
    """Primal spanning tree whose complement is the given dual edge set.

    Dual edges are identified by the id of the primal edge they cross.
    """
    dual_tree = set(dual_tree)
    bad = [e for e in dual_tree if not 0 <= e < region.m]
    if bad:
        raise NotSpanningTree(f"unknown dual edges {bad}")
    tree = set(range(region.m)) - dual_tree
    if len(tree) != region.n - 1:
        raise NotSpanningTree(f"{len(tree)} primal edges left, need {region.n - 1}")
    parent = list(range(region.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in tree:
        a, b = region.edges[k]
        ra, rb = find(a), find(b)
        if ra == rb:
            raise NotSpanningTree("complement contains a cycle")
        parent[ra] = rb
    return tree


# ---------------------------------------------------------------------------
# JSON region format


def parse_cell_key(key):
    x, y = key.split(",")
    return (int(x), int(y))


def load_region(data, require_simply_connected=True) -> PlanarRegion:
    """Build a region from the JSON mapping ``{"lattice", "cells", "weights"}``."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise BadInput(f"region is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise BadInput("region JSON must be an object")
    if data.get("lattice", "Z2") != "Z2":
        raise BadInput(f"unsupported lattice {data.get('lattice')!r}")
    try:
        cells = [tuple(int(t) for t in c) for c in data["cells"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise BadInput(f"bad cells list: {exc}") from exc
    try:
        weights = {parse_cell_key(k): int(v) for k, v in (data.get("weights") or {}).items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise BadInput(f"bad weights map: {exc}") from exc
    if any(v < 1 for v in weights.values()):
        raise BadInput("weights must be positive integers")
    unknown = set(weights) - set(cells)
    if unknown:
        raise BadInput(f"weights given for cells outside the region: {sorted(unknown)[:5]}")
    region = build_grid_region(cells, weights)
    if require_simply_connected and not region.simply_connected:
        raise NotSimplyConnected("region has a hole")
    return region


def load_region_file(path, require_simply_connected=True) -> PlanarRegion:
    with open(path) as fh:
        return load_region(fh.read(), require_simply_connected)
