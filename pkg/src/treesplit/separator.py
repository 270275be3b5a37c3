"""Start-point policies for the staged dual walk.

A policy answers ``(s, t)``: the face where the next stage starts and the
minimum number of walk steps in that stage.  Any answer keeps the sampler
exact; the policy only changes how fast regions shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import TooSmall
from .planar import Z2_PARAMS, LatticeParams
from .regiontree import RegionTree
from .walks import DualForest, grid_engine


@dataclass
class SeparatorCurve:
    c: list  # squares (lower-left coords) along the curve
    closed: bool  # True for a cycle of internal faces, False for a boundary-to-boundary path
    m: int
    gamma: list  # polyline through the square centres
    gamma_length: float
    v0: tuple
    inside: int  # primal vertices on the two sides of the split edge
    outside: int
    split_edge: int
    crossed: list = field(default_factory=list)  # primal edges crossed by consecutive squares

    @property
    def touches_boundary(self):
        return not self.closed

    @property
    def balance(self):
        return max(self.inside, self.outside) / (self.inside + self.outside)


@dataclass(frozen=True)
class PolicyDirective:
    s: tuple
    t: int
    branch: str = "main"

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")


@dataclass
class PolicyParams:
    mode: str = "calibrated"  # paper | calibrated | random
    epsilon: float = 0.5
    r_min: float = 1.0
    t_mult: float = 8.0
    t_cap: float = 64.0  # t <= t_cap * n
    lattice: LatticeParams = Z2_PARAMS

    def __post_init__(self):
        if self.mode not in ("paper", "calibrated", "random"):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def paper(cls, lattice: LatticeParams = Z2_PARAMS, epsilon=None, t_cap=None):
        eps = 1.0 / (144 * lattice.C * lattice.b) if epsilon is None else epsilon
        return cls(
            mode="paper",
            epsilon=eps,
            r_min=max(100.0, 10 * lattice.R),
            t_mult=1.0,
            t_cap=float("inf") if t_cap is None else t_cap,
            lattice=lattice,
        )

    @classmethod
    def calibrated(cls, t_mult=8.0, t_cap=64.0, epsilon=None, lattice: LatticeParams = Z2_PARAMS):
        return cls(mode="calibrated", epsilon=0.5 if epsilon is None else epsilon, r_min=1.0,
                   t_mult=t_mult, t_cap=t_cap, lattice=lattice)

    @classmethod
    def random(cls):
        return cls(mode="random")


def make_params(name="calibrated", t_mult=None, t_cap=None, epsilon=None) -> PolicyParams:
    if name == "paper":
        return PolicyParams.paper(epsilon=epsilon, t_cap=t_cap)
    if name == "calibrated":
        return PolicyParams.calibrated(
            t_mult=8.0 if t_mult is None else t_mult,
            t_cap=64.0 if t_cap is None else t_cap,
            epsilon=epsilon,
        )
    if name == "random":
        return PolicyParams.random()
    raise ValueError(f"unknown policy {name!r}")


def paper_t(r, gamma_len, m, lattice: LatticeParams) -> float:
    """The verbatim minimum-step formula, evaluated in log space (may be ``inf``)."""
    lt = (
        math.log(4 * lattice.L * lattice.C * r * (gamma_len + r))
        - math.log(0.25 * min(1.0, r / (6 * m)))
        - (100 * gamma_len / r + 301) * math.log(lattice.rho)
    )
    return math.exp(lt) if lt < 700 else math.inf


def calibrated_t(r, gamma_len, t_mult) -> float:
    return t_mult * r * (gamma_len + r)


# ---------------------------------------------------------------------------
# separator


def region_faces(rtree: RegionTree, rid) -> list:
    """Non-tree internal squares (padded indices) of region ``rid``.

    A square is still a face iff its four sides are alive.
    """
    eng = grid_engine(rtree.region)
    vface = eng.vface
    sq_edge = eng.sq_edge
    alive = rtree.alive
    out = []
    for v in rtree.regions[rid].members:
        i = vface[v]
        if i >= 0:
            b = 4 * i
            if alive[sq_edge[b]] and alive[sq_edge[b + 1]] and alive[sq_edge[b + 2]] and alive[sq_edge[b + 3]]:
                out.append(i)
    out.sort()
    return out


def cycle_separator(rtree: RegionTree, rid) -> SeparatorCurve:
    """Deterministic fundamental-cycle separator of region ``rid``.

    The dual of the region is searched breadth-first from its outer face; the
    complementary primal spanning tree is cut at the edge that splits the
    region's vertices most evenly (smallest edge id on ties), and that edge's
    fundamental dual cycle is returned.  A cycle through the outer face comes
    back as a path between two boundary squares of the wired dual.
    """
    rg = rtree.region
    eng = grid_engine(rg)
    faces = region_faces(rtree, rid)
    if not faces:
        raise TooSmall("region has fewer than two faces")
    members = rtree.regions[rid].members
    fset = set(faces)
    dS = eng.dS
    sq_edge = eng.sq_edge
    OUT = -1

    # breadth-first search of the dual from the outer face
    parent = {OUT: None}
    pedge = {OUT: None}
    depth = {OUT: 0}
    order = [OUT]
    outer_adj = []
    for f in faces:
        for d in range(4):
            g = f + dS[d]
            if g not in fset:
                outer_adj.append((f, sq_edge[4 * f + d]))
    dual_tree = set()
    qi = 0
    while qi < len(order):
        u = order[qi]
        qi += 1
        if u == OUT:
            nbrs = outer_adj
        else:
            nbrs = []
            for d in range(4):
                g = u + dS[d]
                nbrs.append((g if g in fset else OUT, sq_edge[4 * u + d]))
        for g, k in nbrs:
            if g not in parent:
                parent[g] = u
                pedge[g] = k
                depth[g] = depth[u] + 1
                order.append(g)
                dual_tree.add(k)

    # complementary primal tree and subtree sizes
    rot_e, rot_n = rg.rot_e, rg.rot_n
    region_of = rtree.region_of
    alive = rtree.alive
    root = members[0]
    tp_parent = {root: -1}
    tp_pedge = {root: -1}
    torder = [root]
    qi = 0
    while qi < len(torder):
        v = torder[qi]
        qi += 1
        for d in range(4):
            k = rot_e[4 * v + d]
            if k < 0 or not alive[k] or k in dual_tree:
                continue
            w = rot_n[4 * v + d]
            if region_of[w] != rid or w in tp_parent:
                continue
            tp_parent[w] = v
            tp_pedge[w] = k
            torder.append(w)
    n = len(members)
    sub = {v: 1 for v in torder}
    for v in reversed(torder):
        p = tp_parent[v]
        if p >= 0:
            sub[p] += sub[v]
    best = None
    for v in torder:
        k = tp_pedge[v]
        if k < 0:
            continue
        key = (max(sub[v], n - sub[v]), k)
        if best is None or key < best[0]:
            best = (key, k, sub[v])
    (_, split_edge, s_in) = best

    # fundamental cycle of the split edge in the dual tree
    fa, fb = eng.edge_squares[split_edge]
    na = fa if fa in fset else OUT
    nb = fb if fb in fset else OUT
    pa, pb = [na], [nb]
    while pa[-1] != pb[-1]:
        if depth[pa[-1]] >= depth[pb[-1]]:
            pa.append(parent[pa[-1]])
        else:
            pb.append(parent[pb[-1]])
    lca = pa[-1]

    def ext_square(path, direct):
        # wired-dual square standing in for the outer face at the end of ``path``
        if len(path) == 1:
            return direct
        top = path[-2]
        k = pedge[top]
        s1, s2 = eng.edge_squares[k]
        return s2 if s1 == top else s1

    if lca == OUT:
        left = [x for x in pa if x != OUT]
        right = [x for x in pb if x != OUT]
        seq = ([ext_square(pa, fa)] + left[::-1]) if na != OUT else [fa]
        tail = (right + [ext_square(pb, fb)]) if nb != OUT else [fb]
        c_idx = seq + tail
        closed = False
    else:
        c_idx = pa[:-1] + [lca] + pb[:-1][::-1]
        closed = True
    c = [eng.square(i) for i in c_idx]
    gamma = [(x + 0.5, y + 0.5) for (x, y) in c]
    if closed:
        glen = float(len(c))
    else:
        glen = float(len(c) - 1)
    crossed = []
    for i in range(len(c_idx) - (0 if closed else 1)):
        a = c_idx[i]
        b = c_idx[(i + 1) % len(c_idx)]
        crossed.append(_shared_edge(eng, a, b))
    return SeparatorCurve(
        c=c, closed=closed, m=len(c), gamma=gamma, gamma_length=glen, v0=c[0],
        inside=s_in, outside=n - s_in, split_edge=split_edge, crossed=crossed,
    )


def _shared_edge(eng, a, b):
    for d in range(4):
        if a + eng.dS[d] == b:
            k = eng.sq_edge[4 * a + d]
            if k >= 0:
                return k
            return eng.sq_edge[4 * b + (d + 2) % 4]
    raise AssertionError("squares are not adjacent")


# ---------------------------------------------------------------------------
# policies


class CenterContext:
    """Everything a policy needs about the region being refined.

    ``rid`` names the region at the moment it became the focus; its members
    and faces are frozen here so repeated queries see the same separator.
    """

    def __init__(self, rtree: RegionTree, forest: DualForest, rid):
        self.rtree = rtree
        self.forest = forest
        self.rid = rid
        self.members = list(rtree.regions[rid].members)
        self.n = len(self.members)
        self.faces = region_faces(rtree, rid)
        self.calls = 0
        self._sep = None
        self._sep_done = False
        self._central = None
        self._cpos = 0

    def separator(self):
        if not self._sep_done:
            self._sep_done = True
            try:
                self._sep = cycle_separator(self.rtree, self.rid)
            except TooSmall:
                self._sep = None
        return self._sep

    def random_face(self, rng):
        """Uniform non-tree face among this context's faces, or -1."""
        faces = self.faces
        in_tree = self.forest.in_tree
        if not faces:
            return -1
        for _ in range(24):
            i = faces[rng.randrange(len(faces))]
            if not in_tree[i]:
                return i
        live = [i for i in faces if not in_tree[i]]
        self.faces = live
        if not live:
            return -1
        return live[rng.randrange(len(live))]

    def central_face(self):
        """First non-tree face in order of distance from the region's centroid."""
        eng = self.forest.eng
        if self._central is None:
            cells = self.rtree.region.cells
            W = eng.W
            mx = sum(cells[v][0] for v in self.members) / self.n - 0.5 - eng.x0
            my = sum(cells[v][1] for v in self.members) / self.n - 0.5 - eng.y0
            keyed = []
            for i in self.faces:
                dx = i % W - mx
                dy = i // W - my
                keyed.append((dx * dx + dy * dy, i))
            keyed.sort()
            self._central = [i for _, i in keyed]
        in_tree = self.forest.in_tree
        while self._cpos < len(self._central) and in_tree[self._central[self._cpos]]:
            self._cpos += 1
        if self._cpos == len(self._central):
            return -1
        return self._central[self._cpos]


def _fallback_face(ctx: CenterContext, rng):
    i = ctx.random_face(rng)
    if i < 0:
        nt = ctx.forest.nontree_faces()
        i = nt[rng.randrange(len(nt))] if nt else ctx.forest.eng.face_idx[0]
    return i


def policy_uniform_random(ctx: CenterContext, rng) -> PolicyDirective:
    i = _fallback_face(ctx, rng)
    return PolicyDirective(ctx.forest.eng.square(i), 1, "random")


def policy_Q(ctx: CenterContext, call_index: int, params: PolicyParams, rng) -> PolicyDirective:
    """Stage directive for the ``call_index``-th query (1-based) on a region."""
    if params.mode == "random":
        return policy_uniform_random(ctx, rng)
    eng = ctx.forest.eng
    n = ctx.n
    r = params.epsilon * math.sqrt(n)
    sep = ctx.separator() if r >= params.r_min else None
    if sep is None:
        if params.mode == "paper":
            i = ctx.central_face()
            if i < 0:
                i = _fallback_face(ctx, rng)
        else:
            i = _fallback_face(ctx, rng)
        return PolicyDirective(eng.square(i), 1, "line4")
    c = sep.c
    if sep.closed:
        if call_index == 1:
            return PolicyDirective(c[rng.randrange(len(c))], 1, "line7")
        # rotate the cycle to start at the first square the earlier walks reached
        in_tree = ctx.forest.in_tree
        j = 0
        for idx, sq in enumerate(c):
            if in_tree[eng.index(sq)]:
                j = idx
                break
        c = c[j:] + c[:j + 1]
    v0 = c[0]
    if rng.random() < 0.5:
        s = v0
    else:
        s = c[rng.randrange(len(c))]
    if params.mode == "paper":
        t = paper_t(r, sep.gamma_length, sep.m, params.lattice)
    else:
        t = calibrated_t(r, sep.gamma_length, params.t_mult)
    cap = params.t_cap * n
    t = min(t, cap)
    t = max(1, int(math.ceil(t))) if math.isfinite(t) else 1 << 62
    return PolicyDirective(s, t, "main")


class Policy:
    """Callable wrapper pairing :class:`PolicyParams` with the query function."""

    def __init__(self, params: PolicyParams | str = "calibrated"):
        self.params = make_params(params) if isinstance(params, str) else params

    @property
    def name(self):
        return self.params.mode

    def __call__(self, ctx: CenterContext, call_index: int, rng) -> PolicyDirective:
        return policy_Q(ctx, call_index, self.params, rng)

    def __repr__(self):
        return f"Policy({self.params.mode})"


def as_policy(policy) -> Policy:
    if policy is None:
        return Policy("calibrated")
    if isinstance(policy, Policy):
        return policy
    if isinstance(policy, (str, PolicyParams)):
        return Policy(policy)
    raise TypeError(f"cannot use {policy!r} as a policy")
