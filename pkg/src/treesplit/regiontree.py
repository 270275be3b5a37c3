"""Region trees (bridge-block decompositions) and weighted tree centers."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import CrossRegionPath, NotAnEdgeQCenter
from .planar import PlanarRegion
from .walks import grid_engine


# ---------------------------------------------------------------------------
# weighted trees


class WeightedTree:
    """Vertex-weighted tree: ``weight[node]`` and ``adj[node] = [(nbr, edge_id)]``."""

    __slots__ = ("weight", "adj", "ends")

    def __init__(self, weight=None, edges=None):
        self.weight = dict(weight or {})
        self.adj = {v: [] for v in self.weight}
        self.ends = {}
        for eid, (a, b) in (edges or {}).items():
            self.add_edge(eid, a, b)

    def add_edge(self, eid, a, b):
        self.adj.setdefault(a, []).append((b, eid))
        self.adj.setdefault(b, []).append((a, eid))
        self.ends[eid] = (a, b)

    @classmethod
    def path(cls, weights, first_id=1):
        """Path ``1 - 2 - ... - n``; edge ``i`` joins nodes ``i`` and ``i + 1``."""
        w = {first_id + i: x for i, x in enumerate(weights)}
        e = {first_id + i: (first_id + i, first_id + i + 1) for i in range(len(weights) - 1)}
        return cls(w, e)

    @property
    def total(self):
        return sum(self.weight.values())

    def __len__(self):
        return len(self.weight)

    def rooted(self, root):
        """Parent map, parent edge map, preorder and subtree weights from ``root``."""
        parent = {root: None}
        pedge = {root: None}
        order = [root]
        adj = self.adj
        i = 0
        while i < len(order):
            v = order[i]
            i += 1
            for w, e in adj[v]:
                if w not in parent:
                    parent[w] = v
                    pedge[w] = e
                    order.append(w)
        sub = dict(self.weight)
        for v in reversed(order):
            p = parent[v]
            if p is not None:
                sub[p] += sub[v]
        return parent, pedge, order, sub

    def components_without(self, v):
        """Weights of the components of ``tree - v`` keyed by the edge leaving ``v``."""
        parent, pedge, order, sub = self.rooted(v)
        return {pedge[w]: sub[w] for w in order if parent[w] == v}


@dataclass(frozen=True)
class Center:
    kind: str  # "edge" or "vertex"
    location: object


@dataclass
class QCenterSet:
    q: int
    vertex_centers: list = field(default_factory=list)
    edge_centers: list = field(default_factory=list)


def _as_tree(tree):
    return tree.weighted_tree() if isinstance(tree, RegionTree) else tree


def find_center(tree) -> Center:
    """Edge center with the smallest id if any, else the unique vertex center."""
    tree = _as_tree(tree)
    root = next(iter(tree.weight))
    parent, pedge, order, sub = tree.rooted(root)
    W = sub[root]
    best = None
    for v in order:
        e = pedge[v]
        if e is not None and 2 * sub[v] == W and (best is None or e < best):
            best = e
    if best is not None:
        return Center("edge", best)
    # walk down towards the heavy child until it weighs at most half
    v = root
    while True:
        heavy = None
        for w, e in tree.adj[v]:
            if parent.get(w) == v and 2 * sub[w] > W:
                heavy = w
                break
        if heavy is None:
            return Center("vertex", v)
        v = heavy


def center_split(tree: WeightedTree):
    """:func:`find_center` plus, for a vertex center, the weight beyond each of its edges."""
    root = next(iter(tree.weight))
    parent, pedge, order, sub = tree.rooted(root)
    W = sub[root]
    best = None
    for v in order:
        e = pedge[v]
        if e is not None and 2 * sub[v] == W and (best is None or e < best):
            best = e
    if best is not None:
        return Center("edge", best), None
    v = root
    adj = tree.adj
    while True:
        heavy = None
        for w, e in adj[v]:
            if parent.get(w) == v and 2 * sub[w] > W:
                heavy = w
                break
        if heavy is None:
            break
        v = heavy
    comp = {}
    for w, e in adj[v]:
        comp[e] = sub[w] if parent.get(w) == v else W - sub[v]
    return Center("vertex", v), comp


def enumerate_q_centers(tree, q) -> QCenterSet:
    tree = _as_tree(tree)
    c = find_center(tree)
    root = tree.ends[c.location][0] if c.kind == "edge" else c.location
    parent, pedge, order, sub = tree.rooted(root)
    W = sub[root]
    lim = W + 2 * q  # compare doubled weights
    vcs = []
    ecs = []
    for v in order:
        p = parent[v]
        up = W - sub[v]
        if p is not None and 2 * max(sub[v], up) <= lim:
            ecs.append(pedge[v])
        big = up
        for w, _ in tree.adj[v]:
            if parent.get(w) == v and sub[w] > big:
                big = sub[w]
        if 2 * big <= lim:
            vcs.append(v)
    return QCenterSet(q, sorted(vcs), sorted(ecs))


def brute_force_q_centers(tree, q) -> QCenterSet:
    """Reference: test every vertex and edge directly."""
    tree = _as_tree(tree)
    W = tree.total
    vcs = [v for v in tree.weight if all(2 * x <= W + 2 * q for x in tree.components_without(v).values())]
    ecs = []
    for eid, (a, b) in tree.ends.items():
        side = _side_weight(tree, a, eid)
        if 2 * max(side, W - side) <= W + 2 * q:
            ecs.append(eid)
    return QCenterSet(q, sorted(vcs), sorted(ecs))


def _side_nodes(tree, start, banned_edge):
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w, e in tree.adj[v]:
            if e != banned_edge and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _side_weight(tree, start, banned_edge):
    return sum(tree.weight[v] for v in _side_nodes(tree, start, banned_edge))


def select_vstar(tree, q, edge_center, side):
    """Farthest vertex q-center from ``edge_center`` on the side of endpoint ``side``.

    Returns ``None`` when that side has no vertex q-center.
    """
    tree = _as_tree(tree)
    a, b = tree.ends[edge_center]
    if side not in (a, b):
        raise ValueError(f"{side!r} is not an endpoint of edge {edge_center!r}")
    W = tree.total
    sw = _side_weight(tree, a, edge_center)
    if 2 * max(sw, W - sw) > W + 2 * q:
        raise NotAnEdgeQCenter(f"edge {edge_center!r} is not a {q}-center")
    vcs = set(enumerate_q_centers(tree, q).vertex_centers)
    dist = {side: 0}
    dq = deque([side])
    best = None
    while dq:
        v = dq.popleft()
        if v in vcs and (best is None or (dist[v], -_key(v)) > (dist[best], -_key(best))):
            best = v
        for w, e in tree.adj[v]:
            if e != edge_center and w not in dist:
                dist[w] = dist[v] + 1
                dq.append(w)
    return best


def _key(v):
    return v if isinstance(v, int) else hash(v)


def cyclic_contiguous_split(weights, total) -> bool:
    """Whether a cyclic arc of ``weights`` and its complement both weigh at most ``total/2``."""
    d = len(weights)
    N = sum(weights)
    lo = 2 * N - total  # need 2*S >= lo and 2*S <= total
    if lo <= 0:
        return True  # the empty arc already works
    ext = list(weights) * 2
    j = 0
    s = 0
    for i in range(d):
        if j < i:
            j = i
            s = 0
        while j < i + d and 2 * (s + ext[j]) <= total:
            s += ext[j]
            j += 1
        if 2 * s >= lo:
            return True
        if j > i:
            s -= ext[i]
    return False


def contiguity_precheck(tree, center) -> bool:
    """Necessary condition for a 0-splittable completion around vertex center ``center``."""
    if isinstance(tree, RegionTree):
        comp = tree.neighbor_weights(center)
        order = tree.cyclic_bridges(center)
        weights = [comp[k] for k in order]
        return cyclic_contiguous_split(weights, tree.total_weight)
    comp = tree.components_without(center)
    weights = [comp[e] for _, e in tree.adj[center]]
    return cyclic_contiguous_split(weights, tree.total)


# ---------------------------------------------------------------------------
# region trees over grid regions


class Region:
    __slots__ = ("rid", "members", "weight", "bridges")

    def __init__(self, rid, members, weight, bridges):
        self.rid = rid
        self.members = members
        self.weight = weight
        self.bridges = bridges

    @property
    def atomic(self):
        return len(self.members) == 1

    def __repr__(self):
        return f"Region({self.rid}, n={len(self.members)}, w={self.weight}, bridges={len(self.bridges)})"


class RegionTree:
    """Bridge-block decomposition of the alive primal edges of a grid region.

    ``alive`` is shared with the dual forest that deletes edges.  Doors are
    identified by the primal bridge edge id (dual edges carry primal ids).
    """

    def __init__(self, region: PlanarRegion, alive=None, _init=True):
        self.region = region
        self.alive = alive if alive is not None else bytearray(b"\x01") * region.m
        n = region.n
        self.region_of = [0] * n
        self.regions = {}
        self.is_bridge = bytearray(region.m)
        self.total_weight = region.total_weight
        self.next_rid = 0
        self._disc = [0] * n
        self._low = [0] * n
        self._pedge = [0] * n
        self._pos = [0] * n
        self._clock = 0
        if _init:
            self.regions[0] = Region(0, list(range(n)), region.total_weight, [])
            self.next_rid = 1
            if (alive is None or all(alive)) and region.simply_connected:
                self._split_local(0)
            else:
                self._split(0)

    @classmethod
    def initial(cls, region: PlanarRegion, alive=None) -> "RegionTree":
        """Region tree of the full region, reusing a cached decomposition."""
        snap = region._cache.get("rtree0")
        if snap is None or alive is not None and not all(alive):
            t = cls(region, alive)
            if alive is None or all(alive):
                region._cache["rtree0"] = (
                    list(t.region_of),
                    [(r.rid, list(r.members), r.weight, list(r.bridges)) for r in t.regions.values()],
                    bytes(t.is_bridge),
                    t.next_rid,
                )
            return t
        t = cls(region, alive, _init=False)
        region_of, regs, is_bridge, next_rid = snap
        t.region_of = list(region_of)
        t.regions = {rid: Region(rid, list(m), w, list(b)) for rid, m, w, b in regs}
        t.is_bridge = bytearray(is_bridge)
        t.next_rid = next_rid
        return t

    # -- basic views
    def __len__(self):
        return len(self.regions)

    def other_end(self, k, rid):
        a, b = self.region.edges[k]
        ra = self.region_of[a]
        return self.region_of[b] if ra == rid else ra

    def bridges(self):
        return sorted(k for r in self.regions.values() for k in r.bridges if self.region_of[self.region.edges[k][0]] == r.rid)

    def door(self, k):
        """Dual edge of bridge ``k`` as its pair of squares."""
        return self.region.edge_faces(k)

    def weighted_tree(self, rids=None) -> WeightedTree:
        regs = self.regions
        if rids is None:
            rids = regs
        wt = WeightedTree()
        for rid in rids:
            wt.weight[rid] = regs[rid].weight
            wt.adj[rid] = []
        for rid in rids:
            for k in regs[rid].bridges:
                o = self.other_end(k, rid)
                wt.adj[rid].append((o, k))
                if rid < o:
                    wt.ends[k] = (rid, o)
        return wt

    def neighbor_weights(self, rid):
        """Weight beyond each bridge of ``rid`` (component of ``tree - rid``)."""
        out = {}
        regs = self.regions
        for k in regs[rid].bridges:
            start = self.other_end(k, rid)
            seen = {rid, start}
            stack = [start]
            w = 0
            while stack:
                x = stack.pop()
                w += regs[x].weight
                for kk in regs[x].bridges:
                    y = self.other_end(kk, x)
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            out[k] = w
        return out

    def side_vertices(self, k, endpoint):
        """Primal vertices reachable from ``endpoint`` over alive edges other than ``k``."""
        rg = self.region
        rot_e, rot_n = rg.rot_e, rg.rot_n
        alive = self.alive
        seen = bytearray(rg.n)
        seen[endpoint] = 1
        stack = [endpoint]
        out = [endpoint]
        while stack:
            v = stack.pop()
            for d in range(4):
                e = rot_e[4 * v + d]
                if e >= 0 and e != k and alive[e]:
                    w = rot_n[4 * v + d]
                    if not seen[w]:
                        seen[w] = 1
                        out.append(w)
                        stack.append(w)
        return out

    # -- refinement
    def _split(self, rid):
        """Re-decompose region ``rid``; returns the list of new region ids."""
        rg = self.region
        rot_e, rot_n = rg.rot_e, rg.rot_n
        alive = self.alive
        region_of = self.region_of
        disc = self._disc
        low = self._low
        weights = rg.weights
        old = self.regions.pop(rid)
        members = old.members
        base = self._clock
        clock = base
        comps = []
        new_bridges = []
        vstack = []
        pedge = self._pedge
        pos = self._pos
        for root in members:
            if disc[root] > base:
                continue
            clock += 1
            disc[root] = low[root] = clock
            vstack.append(root)
            pedge[root] = -1
            pos[root] = 0
            path = [root]
            while path:
                v = path[-1]
                b4 = 4 * v
                di = pos[v]
                pe = pedge[v]
                lv = low[v]
                while di < 4:
                    k = rot_e[b4 + di]
                    di += 1
                    if k < 0 or k == pe or not alive[k]:
                        continue
                    w = rot_n[b4 + di - 1]
                    if region_of[w] != rid:
                        continue
                    dw = disc[w]
                    if dw > base:
                        if dw < lv:
                            lv = dw
                    else:
                        pos[v] = di
                        low[v] = lv
                        clock += 1
                        disc[w] = low[w] = clock
                        vstack.append(w)
                        pedge[w] = k
                        pos[w] = 0
                        path.append(w)
                        break
                else:
                    low[v] = lv
                    path.pop()
                    if path:
                        p = path[-1]
                        if lv < low[p]:
                            low[p] = lv
                        if lv > disc[p]:
                            new_bridges.append(pe)
                        else:
                            continue
                    comp = []
                    while True:
                        x = vstack.pop()
                        comp.append(x)
                        if x == v:
                            break
                    comps.append(comp)
        self._clock = clock
        new_ids = []
        for comp in comps:
            nid = self.next_rid
            self.next_rid += 1
            comp.sort()
            w = 0
            for x in comp:
                region_of[x] = nid
                w += weights[x]
            self.regions[nid] = Region(nid, comp, w, [])
            new_ids.append(nid)
        regs = self.regions
        edges = rg.edges
        for k in new_bridges:
            self.is_bridge[k] = 1
            a, b = edges[k]
            regs[region_of[a]].bridges.append(k)
            regs[region_of[b]].bridges.append(k)
        fresh = set(new_ids)
        for k in old.bridges:
            a, b = edges[k]
            ra = region_of[a]
            regs[ra if ra in fresh else region_of[b]].bridges.append(k)
        return new_ids

    def _split_local(self, rid):
        """Initial split of a hole-free region: bridges are the edges with no face on either side."""
        eng = grid_engine(self.region)
        ext = eng.in_tree0
        nb = []
        for k, (f, g) in enumerate(eng.edge_squares):
            if ext[f] and ext[g]:
                self.is_bridge[k] = 1
                nb.append(k)
        return self._flood_split(rid, nb)

    def refine_edges(self, edges):
        """Delete ``edges`` (primal ids) and refine every region they touch.

        Returns ``{old_rid: [new_rids]}``.
        """
        rg_edges = self.region.edges
        region_of = self.region_of
        alive = self.alive
        touched = []
        for k in edges:
            a, b = rg_edges[k]
            ra = region_of[a]
            if ra != region_of[b] or self.is_bridge[k]:
                raise CrossRegionPath(f"edge {k} is not inside a single region")
            alive[k] = 0
            if ra not in touched:
                touched.append(ra)
        return {rid: self._split(rid) for rid in touched}

    def refine_tree_paths(self, edges):
        """:meth:`refine_edges` for edges that extend a dual tree hanging off the outside.

        A region that gains no bridge keeps its id (it maps to ``[rid]``).

        In that setting a surviving edge is a bridge exactly when both of its
        squares are external or already touched by the dual tree, so new
        bridges are found locally and the split is a flood fill.
        """
        rg = self.region
        rg_edges = rg.edges
        region_of = self.region_of
        alive = self.alive
        is_bridge = self.is_bridge
        eng = grid_engine(rg)
        ext = eng.in_tree0
        sq_edge = eng.sq_edge
        esq = eng.edge_squares
        touched = {}
        for k in edges:
            a, b = rg_edges[k]
            ra = region_of[a]
            if ra != region_of[b] or is_bridge[k]:
                raise CrossRegionPath(f"edge {k} is not inside a single region")
            alive[k] = 0
            if ra not in touched:
                touched[ra] = []

        def reached(i):
            if ext[i]:
                return True
            b4 = 4 * i
            return not (alive[sq_edge[b4]] and alive[sq_edge[b4 + 1]] and alive[sq_edge[b4 + 2]] and alive[sq_edge[b4 + 3]])

        for k in edges:
            for s in esq[k]:
                if ext[s]:
                    continue
                for d in range(4):
                    e = sq_edge[4 * s + d]
                    if not alive[e] or is_bridge[e]:
                        continue
                    f, g = esq[e]
                    if reached(g if f == s else f):
                        is_bridge[e] = 1
                        r = region_of[rg_edges[e][0]]
                        touched.setdefault(r, []).append(e)
        return {rid: self._flood_split(rid, nb) for rid, nb in touched.items()}

    def _flood_split(self, rid, new_bridges):
        if not new_bridges:
            return [rid]  # still 2-edge-connected; keep the id
        rg = self.region
        rot_e, rot_n = rg.rot_e, rg.rot_n
        alive = self.alive
        is_bridge = self.is_bridge
        region_of = self.region_of
        weights = rg.weights
        old = self.regions.pop(rid)
        regs = self.regions
        new_ids = []
        for root in old.members:
            if region_of[root] != rid:
                continue
            nid = self.next_rid
            self.next_rid += 1
            region_of[root] = nid
            comp = [root]
            w = 0
            for v in comp:
                w += weights[v]
                for j in range(4 * v, 4 * v + 4):
                    k = rot_e[j]
                    if k >= 0 and alive[k] and not is_bridge[k] and region_of[rot_n[j]] == rid:
                        x = rot_n[j]
                        region_of[x] = nid
                        comp.append(x)
            comp.sort()
            regs[nid] = Region(nid, comp, w, [])
            new_ids.append(nid)
        edges = rg.edges
        for k in new_bridges:
            a, b = edges[k]
            regs[region_of[a]].bridges.append(k)
            regs[region_of[b]].bridges.append(k)
        fresh = set(new_ids)
        for k in old.bridges:
            a, b = edges[k]
            ra = region_of[a]
            regs[ra if ra in fresh else region_of[b]].bridges.append(k)
        return new_ids

    def refine(self, path):
        """Refine by one dual path (primal edge ids); all edges must share a region."""
        path = list(path)
        if not path:
            return {}
        rids = {self.region_of[self.region.edges[k][0]] for k in path}
        rids |= {self.region_of[self.region.edges[k][1]] for k in path}
        if len(rids) != 1:
            raise CrossRegionPath(f"path spans regions {sorted(rids)}")
        return self.refine_edges(path)

    # -- embedding
    def cyclic_bridges(self, rid):
        """Bridges of ``rid`` in the cyclic order met walking around its outer boundary."""
        reg = self.regions[rid]
        if not reg.bridges:
            return []
        rg = self.region
        rot_e, rot_n = rg.rot_e, rg.rot_n
        alive = self.alive
        region_of = self.region_of
        bset = set(reg.bridges)
        cells = rg.cells
        v0 = min(reg.members, key=lambda v: cells[v])

        def scan(v, d_in):
            # clockwise from the incoming direction: first usable edge
            b4 = 4 * v
            for j in (1, 2, 3, 4):
                d = (d_in - j) & 3
                k = rot_e[b4 + d]
                if k >= 0 and alive[k] and (k in bset or region_of[rot_n[b4 + d]] == rid):
                    return d
            raise AssertionError("isolated region vertex")

        v = v0
        d = d0 = scan(v0, 3)
        order = []
        seen = set()
        while True:
            k = rot_e[4 * v + d]
            if k in bset:
                if k not in seen:
                    seen.add(k)
                    order.append(k)
                d = scan(v, d)
            else:
                v = rot_n[4 * v + d]
                d = scan(v, d ^ 2)
            if v == v0 and d == d0:
                break
        return order

    # -- debugging
    def dump(self):
        rg = self.region
        regs = []
        for rid in sorted(self.regions):
            r = self.regions[rid]
            regs.append({
                "id": rid,
                "weight": r.weight,
                "atomic": r.atomic,
                "members": [list(rg.cells[v]) for v in r.members],
            })
        bridges = []
        for k in self.bridges():
            a, b = rg.edges[k]
            bridges.append({
                "edge": k,
                "ends": [list(rg.cells[a]), list(rg.cells[b])],
                "regions": [self.region_of[a], self.region_of[b]],
                "door": [list(f) for f in self.door(k)],
            })
        return {"totalWeight": self.total_weight, "regions": regs, "bridges": bridges}

    def check(self):
        """Assert the structural invariants (used by tests)."""
        regs = self.regions
        assert sum(r.weight for r in regs.values()) == self.total_weight
        nb = len(self.bridges())
        assert nb == len(regs) - 1, "region tree must be a tree"
        wt = self.weighted_tree()
        parent, _, order, _ = wt.rooted(next(iter(regs)))
        assert len(order) == len(regs), "region tree must be connected"
        for r in regs.values():
            for v in r.members:
                assert self.region_of[v] == r.rid
        return True

