"""ReCom and reversible ReCom chains over k-district plans of a grid region."""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import partial

from .errors import BadInput, InfeasibleBalance
from .planar import PlanarRegion, euler_holes, grid_region
from .rng import WalkRng, make_rng
from .sampler import sample_balanced, sample_q_balanced
from .walks import adjacency_from_edges, wilson_ust


class Plan:
    """Assignment of every vertex of ``graph`` to a district ``1..k``."""

    def __init__(self, graph: PlanarRegion, assignment, k=None, q=0, check=True):
        self.graph = graph
        self.assign = list(assignment)
        if len(self.assign) != graph.n:
            raise BadInput("assignment must cover every vertex")
        self.k = k or max(self.assign)
        self.q = q
        self.members = {d: [] for d in range(1, self.k + 1)}
        for v, d in enumerate(self.assign):
            if d not in self.members:
                raise BadInput(f"district id {d} outside 1..{self.k}")
            self.members[d].append(v)
        w = graph.weights
        self.weights = {d: sum(w[v] for v in vs) for d, vs in self.members.items()}
        if self.k < 2:
            raise BadInput("a plan needs at least two districts")
        self.pairs = self._pairs()
        if check:
            self.validate()

    def _pairs(self):
        cut = {}
        a = self.assign
        for x, y in self.graph.edges:
            dx, dy = a[x], a[y]
            if dx != dy:
                key = (dx, dy) if dx < dy else (dy, dx)
                cut[key] = cut.get(key, 0) + 1
        return cut

    def relabel(self, changes: dict, check=False) -> "Plan":
        """New plan with ``changes`` ({vertex: district}) applied; cut counts updated locally."""
        new = object.__new__(Plan)
        new.graph = g = self.graph
        new.k, new.q = self.k, self.q
        a = list(self.assign)
        old = self.assign
        pairs = dict(self.pairs)
        touched = set(changes)

        def bump(x, y, by):
            if x != y:
                key = (x, y) if x < y else (y, x)
                c = pairs.get(key, 0) + by
                if c:
                    pairs[key] = c
                else:
                    del pairs[key]

        for v in touched:
            for u in g.neighbors(v):
                if u in touched and u < v:
                    continue
                bump(old[v], old[u], -1)
        for v, d in changes.items():
            a[v] = d
        for v in touched:
            for u in g.neighbors(v):
                if u in touched and u < v:
                    continue
                bump(a[v], a[u], 1)
        new.assign = a
        new.pairs = pairs
        labels = {old[v] for v in touched} | set(changes.values())
        members = dict(self.members)
        weights = dict(self.weights)
        w = g.weights
        pool = sorted({v for d in labels for v in self.members[d]})
        for d in labels:
            members[d] = []
        for v in pool:
            members[a[v]].append(v)
        for d in labels:
            weights[d] = sum(w[v] for v in members[d])
        new.members = members
        new.weights = weights
        if check:
            assert pairs == new._pairs()
            new.validate()
        return new

    @property
    def adjacent_pairs(self):
        return sorted(self.pairs)

    def target(self):
        return self.graph.total_weight / self.k

    def validate(self):
        g = self.graph
        for d, vs in self.members.items():
            if not vs:
                raise BadInput(f"district {d} is empty")
            seen = {vs[0]}
            stack = [vs[0]]
            while stack:
                v = stack.pop()
                for u in g.neighbors(v):
                    if u not in seen and self.assign[u] == d:
                        seen.add(u)
                        stack.append(u)
            if len(seen) != len(vs):
                raise BadInput(f"district {d} is not connected")
        tgt = self.target()
        for d, w in self.weights.items():
            if abs(w - tgt) > self.q:
                raise BadInput(f"district {d} weight {w} not within {self.q} of {tgt:g}")
        return True

    def key(self):
        """Label-free identity: districts relabelled by first vertex."""
        seen = {}
        out = []
        for d in self.assign:
            if d not in seen:
                seen[d] = len(seen) + 1
            out.append(seen[d])
        return tuple(out)

    def to_json(self):
        cells = self.graph.cells
        return {"k": self.k, "assignment": {f"{x},{y}": d for (x, y), d in zip(cells, self.assign)}}


def stripe_plan(graph: PlanarRegion, k, q=0) -> Plan | None:
    """Column-major snake order cut into k runs of equal weight, if that works."""
    cells = graph.cells
    order = sorted(range(graph.n), key=lambda v: (cells[v][0], cells[v][1] if cells[v][0] % 2 == 0 else -cells[v][1]))
    W = graph.total_weight
    if W % k and q == 0:
        return None
    tgt = W / k
    assign = [0] * graph.n
    d = 1
    acc = 0
    for v in order:
        if acc >= tgt - q and d < k and acc + graph.weights[v] > tgt + q:
            d += 1
            acc = 0
        assign[v] = d
        acc += graph.weights[v]
        if acc == tgt and d < k:
            d += 1
            acc = 0
    try:
        return Plan(graph, assign, k, q)
    except BadInput:
        return None


def random_bisection_plan(graph: PlanarRegion, k, q, rng: WalkRng, attempts=2000) -> Plan:
    """Recursive random spanning-tree splitting into k pieces of target weight."""
    W = graph.total_weight
    tgt = W / k
    for _ in range(attempts):
        assign = [0] * graph.n
        ok = _bisect(graph, list(range(graph.n)), 1, k, tgt, q, rng, assign)
        if ok:
            try:
                return Plan(graph, assign, k, q)
            except BadInput:
                continue
    raise InfeasibleBalance(f"no balanced {k}-plan found")


def _bisect(graph, verts, first, k, tgt, q, rng, assign):
    if k == 1:
        for v in verts:
            assign[v] = first
        return True
    vset = set(verts)
    edges = [(a, b) for a, b in graph.edges if a in vset and b in vset]
    adj = adjacency_from_edges(edges, verts)
    tree = wilson_ust(adj, verts[0], verts, rng)
    tadj = {v: [] for v in verts}
    for e in tree:
        a, b = edges[e]
        tadj[a].append(b)
        tadj[b].append(a)
    parent = {verts[0]: None}
    order = [verts[0]]
    for v in order:
        for w in tadj[v]:
            if w not in parent:
                parent[w] = v
                order.append(w)
    sub = {v: graph.weights[v] for v in verts}
    for v in reversed(order):
        if parent[v] is not None:
            sub[parent[v]] += sub[v]
    k1 = k // 2
    cands = [v for v in order if parent[v] is not None and abs(sub[v] - k1 * tgt) <= q]
    if not cands:
        return False
    cut = cands[rng.randrange(len(cands))]
    side = {cut}
    stack = [cut]
    while stack:
        v = stack.pop()
        for w in tadj[v]:
            if w != parent[v] and w not in side:
                side.add(w)
                stack.append(w)
    a = [v for v in verts if v in side]
    b = [v for v in verts if v not in side]
    return _bisect(graph, a, first, k1, tgt, q, rng, assign) and _bisect(graph, b, first + k1, k - k1, tgt, q, rng, assign)


def initial_plan(graph: PlanarRegion, k, q=0, rng=None) -> tuple[Plan, str]:
    p = stripe_plan(graph, k, q)
    if p is not None:
        return p, "stripes"
    return random_bisection_plan(graph, k, q, make_rng(rng)), "random-bisection"


@dataclass
class ChainStats:
    steps: int = 0
    accepted: int = 0  # steps that moved to a different plan
    plans_with_nonsc_pair: int = 0  # step visits
    nonsc_recombinations: int = 0
    distinct_nonsc_plans: int = 0
    distinct_plans: int = 0
    bot: int = 0
    rejected_nonsc: int = 0
    rejected_filter: int = 0
    wall_ms: float = 0.0
    step_ms: list = field(default_factory=list)


class _UnionCache:
    """LRU map from a sorted vertex tuple to (region, vertex ids)."""

    def __init__(self, graph: PlanarRegion, size=4096):
        self.graph = graph
        self.size = size
        self.data = OrderedDict()

    def get(self, verts):
        key = tuple(verts)
        hit = self.data.get(key)
        if hit is not None:
            self.data.move_to_end(key)
            return hit
        # region vertex ids follow sorted cells; graph ids do too, so the order matches
        hit = (PlanarRegion.induced(self.graph, key), key)
        self.data[key] = hit
        if len(self.data) > self.size:
            self.data.popitem(last=False)
        return hit


class Chain:
    """A running ReCom or reversible-ReCom chain."""

    def __init__(self, plan: Plan, method="recom", q=0, policy=None, rng=None, check=False):
        if method not in ("recom", "revrecom"):
            raise ValueError(f"unknown method {method!r}")
        self.plan = plan
        self.method = method
        self.q = q
        self.policy = policy
        self.rng = make_rng(rng)
        self.check = check
        self.stats = ChainStats()
        self.unions = _UnionCache(plan.graph)
        self._sc = OrderedDict()
        self._seen_nonsc = set()
        self._seen = set()
        self._nonsc = {}
        self._refresh_nonsc(None)

    def _union(self, i, j):
        m = self.plan.members
        return sorted(m[i] + m[j])

    def _is_sc(self, verts):
        key = tuple(verts)
        val = self._sc.get(key)
        if val is None:
            cells = self.plan.graph.cells
            val = euler_holes({cells[v] for v in key}) == 0
            self._sc[key] = val
            if len(self._sc) > 8192:
                self._sc.popitem(last=False)
        return val

    def _refresh_nonsc(self, labels):
        """Recompute the non-simply-connected flag for pairs touching ``labels`` (all if None)."""
        pairs = self.plan.pairs
        flags = self._nonsc
        for p in list(flags):
            if p not in pairs or labels is None or p[0] in labels or p[1] in labels:
                del flags[p]
        for p in pairs:
            if p not in flags:
                flags[p] = not self._is_sc(self._union(*p))
        self._nonsc_now = any(flags.values())

    def _plan_has_nonsc(self):
        return self._nonsc_now

    def step(self):
        st = self.stats
        plan = self.plan
        rng = self.rng
        st.steps += 1
        pairs = plan.adjacent_pairs
        i, j = pairs[rng.randrange(len(pairs))]
        verts = self._union(i, j)
        moved = False
        if not self._is_sc(verts):
            st.rejected_nonsc += 1
        else:
            region, ids = self.unions.get(verts)
            if self.q == 0:
                out = sample_balanced(region, self.policy, rng)
            else:
                out = sample_q_balanced(region, self.q, self.policy, rng)
            if out.bot:
                st.bot += 1
            else:
                moved = self._propose(i, j, ids, out)
                if moved and not self._is_sc(verts):
                    st.nonsc_recombinations += 1
        self._record(moved)
        return moved

    def _propose(self, i, j, ids, out):
        plan = self.plan
        st = self.stats
        rng = self.rng
        side_a = [ids[v] for v in out.result.side_a]
        side_b = [ids[v] for v in out.result.side_b]
        tgt = plan.target()
        w = plan.graph.weights
        if self.q and any(abs(sum(w[v] for v in s) - tgt) > self.q for s in (side_a, side_b)):
            st.rejected_filter += 1
            return False
        a = plan.assign
        # the side holding the union's first vertex keeps that vertex's label
        la = a[side_a[0]]
        lb = j if la == i else i
        changes = {v: la for v in side_a if a[v] != la}
        changes.update((v, lb) for v in side_b if a[v] != lb)
        if not changes:
            return False
        nplan = plan.relabel(changes, check=self.check)
        if self.method == "revrecom":
            M = 2 * self.q + 1
            if rng.random() >= out.q_count / M:
                st.rejected_filter += 1
                return False
            ratio = (len(plan.pairs) * plan.pairs[(i, j) if i < j else (j, i)]) / (
                len(nplan.pairs) * nplan.pairs[(i, j) if i < j else (j, i)]
            )
            if ratio < 1 and rng.random() >= ratio:
                st.rejected_filter += 1
                return False
        self.plan = nplan
        self._refresh_nonsc((i, j))
        return True

    def _record(self, moved):
        st = self.stats
        if moved:
            st.accepted += 1
        if self._nonsc_now:
            st.plans_with_nonsc_pair += 1
            key = self.plan.key()
            if key not in self._seen_nonsc:
                self._seen_nonsc.add(key)
                st.distinct_nonsc_plans += 1

    def run(self, steps, snapshot_every=0, on_snapshot=None, track_distinct=False):
        t0 = time.perf_counter()
        for s in range(1, steps + 1):
            self.step()
            if track_distinct:
                self._seen.add(self.plan.key())
            if snapshot_every and on_snapshot is not None and s % snapshot_every == 0:
                on_snapshot(s, self.plan)
        self.stats.wall_ms += (time.perf_counter() - t0) * 1000
        if track_distinct:
            self.stats.distinct_plans = len(self._seen)
        return self.stats


def recom_step(chain: Chain) -> Plan:
    chain.step()
    return chain.plan


def revrecom_step(chain: Chain) -> Plan:
    if chain.method != "revrecom":
        raise ValueError("chain was built for recom")
    chain.step()
    return chain.plan


CSV_FIELDS = [
    "trial", "method", "k", "q", "steps", "accepted", "plansWithNonSCPair",
    "nonSCRecombinations", "distinctNonSCPlans", "wallTimeMs",
]


def stats_row(trial, method, k, q, st: ChainStats, timing=True):
    return {
        "trial": trial,
        "method": method,
        "k": k,
        "q": q,
        "steps": st.steps,
        "accepted": st.accepted,
        "plansWithNonSCPair": st.plans_with_nonsc_pair,
        "nonSCRecombinations": st.nonsc_recombinations,
        "distinctNonSCPlans": st.distinct_nonsc_plans,
        "wallTimeMs": round(st.wall_ms, 1) if timing else "",
    }


def average_row(rows, method, k, q, timing=True):
    def mean(key):
        return sum(float(r[key]) for r in rows) / len(rows)

    out = {
        "trial": "mean",
        "method": method,
        "k": k,
        "q": q,
        "steps": rows[0]["steps"],
        "accepted": mean("accepted"),
        "plansWithNonSCPair": mean("plansWithNonSCPair"),
        "nonSCRecombinations": mean("nonSCRecombinations"),
        "distinctNonSCPlans": mean("distinctNonSCPlans"),
        "wallTimeMs": round(mean("wallTimeMs"), 1) if timing else "",
    }
    return out


def _forward_snapshot(fn, trial, step, plan):
    fn(trial, step, plan)


def run_experiment(grid_size, k, q=0, method="recom", steps=1000, trials=1, seed=0, policy=None,
                   timing=True, trial_ids=None, snapshot_every=0, on_snapshot=None):
    """Run independent chains from the same initial plan; returns (rows, init_kind).

    Trial ``i`` uses RNG stream ``i``.  ``rows`` holds one dict per trial plus
    a final averaged row.
    """
    if isinstance(grid_size, PlanarRegion):
        graph = grid_size
    else:
        w, h = (grid_size, grid_size) if isinstance(grid_size, int) else grid_size
        graph = grid_region(w, h)
    if q == 0 and graph.total_weight % k:
        raise InfeasibleBalance(f"total weight {graph.total_weight} not divisible by k={k}")
    plan0, kind = initial_plan(graph, k, q, WalkRng(seed, 1 << 20))
    rows = []
    for t in trial_ids if trial_ids is not None else range(trials):
        chain = Chain(plan0, method, q, policy, WalkRng(seed, t))
        cb = None
        if on_snapshot is not None:
            cb = partial(_forward_snapshot, on_snapshot, t)
        st = chain.run(steps, snapshot_every, cb)
        rows.append(stats_row(t, method, k, q, st, timing))
    rows.append(average_row(rows, method, k, q, timing))
    return rows, kind
