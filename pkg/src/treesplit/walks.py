"""Loop-erased random walks, Wilson's algorithm and the staged dual walk.

Two layers live here.  The generic functions (:func:`loop_erased_walk`,
:func:`wilson_ust`) work on any adjacency mapping and are used for small
graphs and as independent references.  :class:`DualForest` is the grid engine:
it runs walks on the wired dual of a :class:`PlanarRegion` with squares stored
in a padded index array, and on the infinite lattice dual by coordinate
arithmetic for the free-walk phase of a stage.
"""

from __future__ import annotations

import json
from collections import deque

from .errors import NoTargetReachable
from .planar import PlanarRegion
from .rng import WalkRng


# ---------------------------------------------------------------------------
# generic walks


def loop_erased_walk(neighbors, start, is_target, rng: WalkRng, depth=None, return_trajectory=False, check=True):
    """Loop-erased random walk from ``start`` until ``is_target`` holds.

    ``neighbors(v)`` returns the neighbour list of ``v`` (repeat a neighbour for
    parallel edges).  With a ``depth`` map the walk never steps to a deeper
    vertex and stops on reaching a shallower one.
    """
    if depth is not None:
        d0 = depth[start]

        def nbrs(v):
            return [w for w in neighbors(v) if depth[w] <= d0]

        def hit(v):
            return is_target(v) or depth[v] < d0
    else:
        nbrs = neighbors
        hit = is_target

    if hit(start):
        return ([start], [start]) if return_trajectory else [start]
    if check:
        seen = {start}
        dq = deque([start])
        found = False
        while dq and not found:
            v = dq.popleft()
            for w in nbrs(v):
                if w in seen:
                    continue
                if hit(w):
                    found = True
                    break
                seen.add(w)
                dq.append(w)
        if not found:
            raise NoTargetReachable(f"no target reachable from {start!r}")

    nxt = {}
    traj = [start]
    u = start
    while not hit(u):
        ns = nbrs(u)
        w = ns[rng.randrange(len(ns))]
        nxt[u] = w
        u = w
        traj.append(u)
    path = [start]
    u = start
    while not hit(u):
        u = nxt[u]
        path.append(u)
    return (path, traj) if return_trajectory else path


def adjacency_from_edges(edges, vertices=None):
    """``{v: [(w, edge_index), ...]}`` from an edge list (parallel edges allowed)."""
    adj = {v: [] for v in (vertices or ())}
    for i, (a, b) in enumerate(edges):
        adj.setdefault(a, []).append((b, i))
        adj.setdefault(b, []).append((a, i))
    return adj


def wilson_ust(adj, root, start_order, rng: WalkRng):
    """Uniform spanning tree by Wilson's algorithm.

    ``adj`` maps a vertex to ``(neighbour, edge_id)`` pairs.  ``start_order`` is
    a sequence of vertices or a callable ``f(in_tree) -> vertex or None``;
    vertices it never names are started in adjacency order afterwards.
    Returns the set of edge ids.
    """
    in_tree = {root}
    tree = set()
    nxt = {}

    def grow(s):
        u = s
        while u not in in_tree:
            nb = adj[u]
            w, e = nb[rng.randrange(len(nb))]
            nxt[u] = (w, e)
            u = w
        u = s
        while u not in in_tree:
            in_tree.add(u)
            w, e = nxt[u]
            tree.add(e)
            u = w

    if callable(start_order):
        while len(in_tree) < len(adj):
            s = start_order(in_tree)
            if s is None:
                break
            if s not in in_tree:
                grow(s)
    else:
        for s in start_order:
            if s not in in_tree:
                grow(s)
    for s in adj:
        if s not in in_tree:
            grow(s)
    return tree


def contracted_dual_adjacency(region: PlanarRegion, outer="outer"):
    """Dual of a grid region with all external squares merged into ``outer``.

    Edge ids are the primal edge ids they cross, so a dual spanning tree maps
    straight back through :func:`dual_tree_to_primal_tree`.
    """
    faces = region.faces
    adj = {outer: []}
    for f in sorted(faces):
        adj[f] = []
    for k in range(region.m):
        f, g = region.edge_faces(k)
        f = f if f in faces else outer
        g = g if g in faces else outer
        adj[f].append((g, k))
        adj[g].append((f, k))
    return adj


# ---------------------------------------------------------------------------
# grid engine


class GridEngine:
    """Static index arrays for walking the wired dual of one region."""

    def __init__(self, region: PlanarRegion):
        xmin, ymin, xmax, ymax = region.bbox
        self.x0 = xmin - 1
        self.y0 = ymin - 1
        W = xmax - xmin + 2
        H = ymax - ymin + 2
        self.W = W
        self.H = H
        nsq = W * H
        self.nsq = nsq
        self.dS = (1, W, -1, -W)
        in_tree0 = bytearray(b"\x01") * nsq
        sq_edge = [-1] * (4 * nsq)
        face_idx = []
        vface = [-1] * region.n
        cells = region.cells
        index = region.index
        rot_e, rot_n = region.rot_e, region.rot_n
        for (x, y) in sorted(region.faces):
            i = (x - self.x0) + W * (y - self.y0)
            in_tree0[i] = 0
            face_idx.append(i)
            a = index[(x, y)]
            b = rot_n[4 * a]
            c = rot_n[4 * a + 1]
            vface[a] = i
            sq_edge[4 * i + 0] = rot_e[4 * b + 1]
            sq_edge[4 * i + 1] = rot_e[4 * c]
            sq_edge[4 * i + 2] = rot_e[4 * a + 1]
            sq_edge[4 * i + 3] = rot_e[4 * a]
        self.in_tree0 = bytes(in_tree0)
        self.sq_edge = sq_edge
        self.face_idx = face_idx
        self.vface = vface
        # edge -> the two squares it separates (as indices)
        ef = []
        x0, y0 = self.x0, self.y0
        for a, b in region.edges:
            x, y = cells[a]
            i = (x - x0) + W * (y - y0)
            # horizontal edge: squares below and above; vertical: left and right
            ef.append((i - W, i) if cells[b][1] == y else (i - 1, i))
        self.edge_squares = ef
        self.cx = W / 2
        self.cy = H / 2
        diam = max(W, H)
        self.radius = 4 * diam + 2
        self.cells = cells

    def square(self, i):
        return (i % self.W + self.x0, i // self.W + self.y0)

    def index(self, sq):
        x, y = sq[0] - self.x0, sq[1] - self.y0
        if 0 <= x < self.W and 0 <= y < self.H:
            return x + self.W * y
        return None


def grid_engine(region: PlanarRegion) -> GridEngine:
    eng = region._cache.get("engine")
    if eng is None:
        eng = GridEngine(region)
        region._cache["engine"] = eng
    return eng


class DualForest:
    """Partial dual tree T* on a grid region (the dual forest state).

    ``in_tree`` flags padded squares; every square that is not an internal
    face starts rooted.  ``alive`` flags primal edges not yet deleted.
    """

    def __init__(self, region: PlanarRegion, trace=None):
        eng = grid_engine(region)
        self.region = region
        self.eng = eng
        self.in_tree = bytearray(eng.in_tree0)
        self.nxt = bytearray(eng.nsq)
        self.alive = bytearray(b"\x01") * region.m
        self.nontree = len(eng.face_idx)
        self.steps = 0
        self.total_steps = 0
        self.stages = 0
        self.aborts = 0
        self.tree_edges = []  # dual edges added, by primal edge id
        self.trace = trace
        self._tstep = 0

    # -- queries
    @property
    def complete(self):
        return self.nontree == 0

    def deleted_edges(self):
        return [k for k, a in enumerate(self.alive) if not a]

    def is_tree_square(self, sq):
        i = self.eng.index(sq)
        return True if i is None else bool(self.in_tree[i])

    def nontree_faces(self):
        it = self.in_tree
        return [i for i in self.eng.face_idx if not it[i]]

    def _log(self, phase, i):
        self.trace.write(json.dumps({"step": self._tstep, "face": list(self.eng.square(i)), "phase": phase}) + "\n")

    # -- walks
    def lerw(self, s, rng: WalkRng):
        """Loop-erased walk from internal non-tree square ``s``; returns (edges, end)."""
        in_tree = self.in_tree
        nxt = self.nxt
        dS = self.eng.dS
        buf, pos = rng.take_dirs()
        nbuf = len(buf)
        u = s
        n = 0
        while not in_tree[u]:
            if pos == nbuf:
                rng.return_dirs(buf, pos)
                buf, pos = rng.take_dirs()
            d = buf[pos]
            pos += 1
            nxt[u] = d
            u += dS[d]
            n += 1
        rng.return_dirs(buf, pos)
        end = u
        sq_edge = self.eng.sq_edge
        alive = self.alive
        edges = []
        u = s
        while not in_tree[u]:
            in_tree[u] = 1
            d = nxt[u]
            k = sq_edge[4 * u + d]
            alive[k] = 0
            edges.append(k)
            u += dS[d]
        self.nontree -= len(edges)
        self.steps += n
        self.total_steps += n
        self.tree_edges.extend(edges)
        if self.trace is not None:
            self._tstep += n
            self._log("lerw", s)
        return edges, end

    def free_walk(self, u, rng: WalkRng, budget=None):
        """Lattice walk from square index/coords until a non-tree internal square.

        ``u`` may be an index or a coordinate pair outside the box.  Returns the
        square index reached, or ``-1`` when the safety radius is exceeded.
        """
        eng = self.eng
        W, H = eng.W, eng.H
        if isinstance(u, tuple):
            x, y = u[0] - eng.x0, u[1] - eng.y0
        else:
            x, y = u % W, u // W
        in_tree = self.in_tree
        cx, cy, R = eng.cx, eng.cy, eng.radius
        buf, pos = rng.take_dirs()
        nbuf = len(buf)
        n = 0
        found = -1
        while True:
            if pos == nbuf:
                rng.return_dirs(buf, pos)
                buf, pos = rng.take_dirs()
            d = buf[pos]
            pos += 1
            n += 1
            if d == 0:
                x += 1
            elif d == 1:
                y += 1
            elif d == 2:
                x -= 1
            else:
                y -= 1
            if 0 <= x < W and 0 <= y < H:
                i = x + W * y
                if not in_tree[i]:
                    found = i
                    break
            elif x - cx > R or cx - x > R or y - cy > R or cy - y > R:
                break
        rng.return_dirs(buf, pos)
        self.steps += n
        self.total_steps += n
        if self.trace is not None:
            self._tstep += n
            self._log("free" if found >= 0 else "abort", found if found >= 0 else 0)
        return found

    def stage(self, s, t, rng: WalkRng, restart=None):
        """One stage of the modified walk: start ``s`` (index or coords), at least ``t`` steps.

        Returns the list of added paths, each a list of primal edge ids.
        ``restart()`` supplies a fresh start after a safety-radius abort.
        """
        self.steps = 0
        self.stages += 1
        paths = []
        if self.nontree == 0:
            return paths
        i = self.eng.index(s) if isinstance(s, tuple) else s
        cur = s if i is None else i
        in_tree = self.in_tree
        while True:
            if isinstance(cur, tuple) or in_tree[cur]:
                nxt = self.free_walk(cur, rng)
                if nxt < 0:
                    self.aborts += 1
                    nxt = restart() if restart is not None else -1
                    if nxt is None or nxt < 0 or in_tree[nxt]:
                        nt = self.nontree_faces()
                        nxt = nt[rng.randrange(len(nt))]
                cur = nxt
            edges, end = self.lerw(cur, rng)
            paths.append(edges)
            if self.steps >= t or self.nontree == 0:
                return paths
            cur = end

    def primal_tree(self):
        """Alive edges; a spanning tree once the dual tree is complete."""
        return [k for k, a in enumerate(self.alive) if a]


def modified_wilson_stage(state: DualForest, s, t, rng: WalkRng, restart=None):
    """Run one stage from face ``s`` (square coords) with minimum ``t`` steps."""
    return state.stage(tuple(s), max(1, int(t)), rng, restart)


def dual_wilson_ust(region: PlanarRegion, rng: WalkRng, trace=None):
    """Baseline: full Wilson's algorithm on the wired dual, starts in index order.

    Returns ``(primal tree edge ids, walk steps)``.
    """
    st = DualForest(region, trace)
    in_tree = st.in_tree
    for i in st.eng.face_idx:
        if not in_tree[i]:
            st.lerw(i, rng)
    return st.primal_tree(), st.total_steps
