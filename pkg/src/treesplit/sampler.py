"""Balanced 2-partition sampling, q-balanced counting and spanning-tree sampling.

All three samplers drive the same machinery: a :class:`DualForest` grows the
dual tree in stages chosen by a policy, and a :class:`RegionTree` tracks the
bridge-block decomposition of what is left of the primal graph.  The samplers
differ only in which regions they keep refining.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import NotSimplyConnected, QTooLarge
from .planar import PlanarRegion
from .regiontree import (
    RegionTree,
    WeightedTree,
    center_split,
    cyclic_contiguous_split,
    enumerate_q_centers,
    select_vstar,
)
from .rng import WalkRng, make_rng
from .separator import CenterContext, as_policy
from .walks import DualForest


@dataclass
class Partition2:
    side_a: tuple  # sorted vertex ids; the side holding the smallest id
    side_b: tuple
    weight_a: int
    weight_b: int
    balance_edge: int | None = None

    @classmethod
    def from_side(cls, region: PlanarRegion, side, balance_edge=None):
        side = set(side)
        other = [v for v in range(region.n) if v not in side]
        a = sorted(side)
        b = sorted(other)
        if b and (not a or b[0] < a[0]):
            a, b = b, a
        w = region.weights
        return cls(tuple(a), tuple(b), sum(w[v] for v in a), sum(w[v] for v in b), balance_edge)

    @property
    def key(self):
        return self.side_a

    def to_json(self, region: PlanarRegion):
        cells = region.cells
        return {
            "sideA": [list(cells[v]) for v in self.side_a],
            "sideB": [list(cells[v]) for v in self.side_b],
            "weights": [self.weight_a, self.weight_b],
            "balanceEdge": None if self.balance_edge is None else [list(cells[v]) for v in region.edges[self.balance_edge]],
        }


@dataclass
class SampleOutcome:
    result: Partition2 | None
    q_count: int = 0
    stats: dict = field(default_factory=dict)
    tree: list | None = None  # full primal tree, trace mode only

    @property
    def bot(self):
        return self.result is None

    def to_json(self, region: PlanarRegion, seed=None):
        out = {"bot": self.bot, "qCount": self.q_count}
        if self.result is not None:
            out.update(self.result.to_json(region))
        else:
            out.update({"sideA": [], "sideB": [], "weights": [], "balanceEdge": None})
        out["seed"] = seed
        out["stats"] = self.stats
        return out


class _Run:
    """Mutable state of one sampler invocation."""

    def __init__(self, region: PlanarRegion, policy, rng: WalkRng, trace=None):
        if not region.simply_connected:
            raise NotSimplyConnected("region is not simply connected")
        self.region = region
        self.policy = as_policy(policy)
        self.rng = rng
        self.forest = DualForest(region, trace)
        self.rtree = RegionTree.initial(region, self.forest.alive)
        self.levels = 0

    def stats(self, **extra):
        f = self.forest
        out = {
            "stages": f.stages,
            "steps": f.total_steps,
            "levels": self.levels,
            "aborts": f.aborts,
            "precheck": False,
        }
        out.update(extra)
        return out

    def _stage(self, ctx, calls):
        d = self.policy(ctx, calls, self.rng)
        rng = self.rng
        paths = self.forest.stage(d.s, d.t, rng, restart=lambda: ctx.random_face(rng))
        edges = [k for p in paths for k in p]
        return self.rtree.refine_tree_paths(edges) if edges else {}

    def refine_center(self, rid):
        """Refine region ``rid`` until no non-atomic piece exceeds 3/4 of its weight."""
        regs = self.rtree.regions
        wA = regs[rid].weight
        ctx = CenterContext(self.rtree, self.forest, rid)
        derived = {rid}
        big = {rid} if len(regs[rid].members) > 1 else set()
        calls = 0
        while big:
            calls += 1
            mapping = self._stage(ctx, calls)
            for old, new in mapping.items():
                if old in derived:
                    derived.discard(old)
                    derived.update(new)
                    if old in big:
                        big.discard(old)
                        for r in new:
                            rr = regs[r]
                            if len(rr.members) > 1 and 4 * rr.weight > 3 * wA:
                                big.add(r)
        return derived

    def refine_full(self, rid):
        """Refine ``rid`` and everything derived from it down to single vertices."""
        regs = self.rtree.regions
        stack = [rid]
        while stack:
            r = stack.pop()
            if r not in regs or len(regs[r].members) == 1:
                continue
            for x in self.refine_center(r):
                if x in regs and len(regs[x].members) > 1:
                    stack.append(x)

    def complete(self):
        """Finish the dual tree with plain Wilson walks; returns the primal tree."""
        f = self.forest
        rng = self.rng
        for i in f.eng.face_idx:
            if not f.in_tree[i]:
                f.lerw(i, rng)
        return f.primal_tree()


def _contracted_tree(rtree: RegionTree, focus, ports) -> WeightedTree:
    """Tree on ``focus`` with each port bridge ending in a virtual leaf."""
    regs = rtree.regions
    wt = WeightedTree()
    for rid in focus:
        wt.weight[rid] = regs[rid].weight
        wt.adj[rid] = []
    for k, w in ports.items():
        vid = -1 - k
        wt.weight[vid] = w
        wt.adj[vid] = []
    for rid in focus:
        for k in regs[rid].bridges:
            if k in ports:
                wt.add_edge(k, rid, -1 - k)
            else:
                o = rtree.other_end(k, rid)
                if rid < o:
                    wt.add_edge(k, rid, o)
    return wt


def _split_outcome(run: _Run, k, **stats):
    rg = run.region
    side = run.rtree.side_vertices(k, rg.edges[k][0])
    return Partition2.from_side(rg, side, k)


def sample_balanced(region: PlanarRegion, policy=None, rng=None, precheck=True, trace=False, walk_trace=None) -> SampleOutcome:
    """Exactly balanced split of an implicitly drawn uniform spanning tree, or bot."""
    rng = make_rng(rng)
    run = _Run(region, policy, rng, walk_trace)
    rtree = run.rtree
    regs = rtree.regions
    W = rtree.total_weight
    focus = set(regs)
    ports = {}
    prev_w = None
    fired = False
    result = None
    while True:
        wt = _contracted_tree(rtree, focus, ports)
        c, comp = center_split(wt)
        if c.kind == "edge":
            k = c.location
            result = _split_outcome(run, k)
            assert 2 * result.weight_a == W
            break
        rid = c.location
        assert rid >= 0, "center fell outside the focus"
        reg = regs[rid]
        if len(reg.members) == 1:
            break
        if precheck:
            order = rtree.cyclic_bridges(rid)
            if not cyclic_contiguous_split([comp[k] for k in order], W):
                fired = True
                break
        if prev_w is not None:
            assert 4 * reg.weight <= 3 * prev_w, "center did not contract"
        prev_w = reg.weight
        run.levels += 1
        focus = run.refine_center(rid)
        ports = comp
    out = SampleOutcome(result, 0 if result is None else 1, run.stats(precheck=fired))
    if trace:
        out.tree = run.complete()
    return out


def sample_q_balanced(region: PlanarRegion, q: int, policy=None, rng=None, strict=False, trace=False, walk_trace=None) -> SampleOutcome:
    """Count the q-balance edges of an implicit uniform spanning tree and pick one uniformly.

    With ``strict`` the call refuses ``q >= n/6``; otherwise larger slack is
    accepted and handled without the single-path shortcut.
    """
    q = int(q)
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 0:
        return sample_balanced(region, policy, rng, trace=trace, walk_trace=walk_trace)
    W = region.total_weight
    if strict and 6 * q >= W:
        raise QTooLarge(f"q={q} needs q < n/6 = {W / 6:.3g}")
    rng = make_rng(rng)
    run = _Run(region, policy, rng, walk_trace)
    rtree = run.rtree
    regs = rtree.regions
    while True:
        wt = rtree.weighted_tree()
        qc = enumerate_q_centers(wt, q)
        pending = [v for v in qc.vertex_centers if len(regs[v].members) > 1]
        if not pending:
            break
        run.levels += 1
        jobs = []
        if len(qc.vertex_centers) > 1 and 6 * q < W and qc.edge_centers:
            e = qc.edge_centers[0]
            vset = set(pending)
            for end in wt.ends[e]:
                vstar = select_vstar(wt, q, e, end)
                side = _side(wt, end, e)
                for v in sorted(vset & side):
                    jobs.append((v == vstar, v))
        else:
            jobs = [(True, v) for v in pending]
        for loop, v in jobs:
            if v not in regs:
                continue
            if loop:
                run.refine_center(v)
            else:
                run.refine_full(v)
    edges = qc.edge_centers
    result = None
    if edges:
        k = edges[rng.randrange(len(edges))]
        result = _split_outcome(run, k)
    out = SampleOutcome(result, len(edges), run.stats())
    if trace:
        out.tree = run.complete()
    return out


def _side(wt: WeightedTree, start, banned):
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w, e in wt.adj[v]:
            if e != banned and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def sample_ust(region: PlanarRegion, policy=None, rng=None, walk_trace=None):
    """Uniform spanning tree by refining every region down to single vertices.

    Returns ``(tree edge ids, stats)``.
    """
    rng = make_rng(rng)
    run = _Run(region, policy, rng, walk_trace)
    regs = run.rtree.regions
    stack = [(rid, 0) for rid in sorted(regs, reverse=True) if len(regs[rid].members) > 1]
    max_depth = 0
    while True:
        while stack:
            rid, depth = stack.pop()
            if rid not in regs or len(regs[rid].members) == 1:
                continue
            max_depth = max(max_depth, depth + 1)
            for x in sorted(run.refine_center(rid), reverse=True):
                if x in regs and len(regs[x].members) > 1:
                    stack.append((x, depth + 1))
        left = [rid for rid in sorted(regs) if len(regs[rid].members) > 1]
        if not left:
            break
        stack = [(rid, max_depth) for rid in left]
    run.levels = max_depth
    tree = run.forest.primal_tree()
    assert len(tree) == region.n - 1
    return tree, run.stats(depth=max_depth)


def outcome_record(region, outcome: SampleOutcome, seed=None, stream=None, timing=None):
    rec = outcome.to_json(region, seed)
    rec["stream"] = stream
    if timing is not None:
        rec["wallTimeMs"] = timing
    return json.dumps(rec, sort_keys=True)
