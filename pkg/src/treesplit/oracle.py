"""Exact ground truth for small graphs: tree counts, enumeration, split laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import TooLarge
from .planar import PlanarRegion

DEFAULT_CAP = 200_000


def _graph(graph):
    """Normalise to ``(n, edges)`` with vertices ``0..n-1``."""
    if isinstance(graph, PlanarRegion):
        return graph.n, list(graph.edges)
    n, edges = graph
    return n, [tuple(e) for e in edges]


def matrix_tree_count(graph) -> int:
    """Number of spanning trees via a fraction-free (Bareiss) determinant.

    ``graph`` is a :class:`PlanarRegion` or ``(n, edges)``; parallel edges count.
    """
    n, edges = _graph(graph)
    if n <= 1:
        return 1
    L = [[0] * n for _ in range(n)]
    for a, b in edges:
        if a == b:
            continue
        L[a][a] += 1
        L[b][b] += 1
        L[a][b] -= 1
        L[b][a] -= 1
    M = [row[1:] for row in L[1:]]
    m = n - 1
    sign = 1
    prev = 1
    for k in range(m - 1):
        if M[k][k] == 0:
            for i in range(k + 1, m):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        piv = M[k][k]
        for i in range(k + 1, m):
            for j in range(k + 1, m):
                M[i][j] = (M[i][j] * piv - M[i][k] * M[k][j]) // prev
        prev = piv
    return sign * M[m - 1][m - 1]


def enumerate_spanning_trees(graph, cap=DEFAULT_CAP) -> list:
    """All spanning trees as sorted tuples of edge indices.

    Include/exclude backtracking with a union-find connectivity bound.
    """
    n, edges = _graph(graph)
    if n <= 1:
        return [()]
    if matrix_tree_count((n, edges)) > cap:
        raise TooLarge(f"more than {cap} spanning trees")
    m = len(edges)
    out = []

    def find(p, a):
        while p[a] != a:
            a = p[a]
        return a

    def connected_with(rest_from, chosen_parent):
        # can the chosen edges plus edges rest_from.. still connect everything?
        p = list(chosen_parent)
        comps = sum(1 for v in range(n) if p[v] == v)
        for j in range(rest_from, m):
            a, b = edges[j]
            ra, rb = find(p, a), find(p, b)
            if ra != rb:
                p[ra] = rb
                comps -= 1
        return comps == 1

    def rec(i, parent, chosen):
        if len(chosen) == n - 1:
            out.append(tuple(chosen))
            return
        if i == m or not connected_with(i, parent):
            return
        a, b = edges[i]
        ra, rb = find(parent, a), find(parent, b)
        if ra != rb:
            p2 = list(parent)
            p2[ra] = rb
            chosen.append(i)
            rec(i + 1, p2, chosen)
            chosen.pop()
        rec(i + 1, parent, chosen)

    rec(0, list(range(n)), [])
    return out


def _components(n, edges, keep):
    p = list(range(n))

    def find(a):
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    for i in keep:
        a, b = edges[i]
        p[find(a)] = find(b)
    return [find(v) for v in range(n)]


def canonical_side(side, n):
    """Sorted vertex tuple of the side holding the smallest vertex id."""
    s = set(side)
    other = [v for v in range(n) if v not in s]
    a = sorted(s)
    if other and (not a or other[0] < a[0]):
        a = other
    return tuple(a)


@dataclass
class ExactDistribution:
    entries: dict = field(default_factory=dict)  # canonical side -> Fraction
    bot: Fraction = Fraction(0)
    tree_count: int = 0

    @property
    def total(self):
        return sum(self.entries.values(), Fraction(0)) + self.bot


def tree_splits(n, edges, weights, tree, q):
    """Canonical sides of every q-balance edge of ``tree``."""
    W = sum(weights)
    out = []
    tset = list(tree)
    for e in tset:
        keep = [x for x in tset if x != e]
        comp = _components(n, edges, keep)
        r = comp[edges[e][0]]
        side = [v for v in range(n) if comp[v] == r]
        w = sum(weights[v] for v in side)
        if 2 * abs(2 * w - W) <= 4 * q:  # |w - W/2| <= q
            out.append(canonical_side(side, n))
    return out


def _enumerated(region: PlanarRegion, q, cap):
    n, edges = region.n, list(region.edges)
    trees = enumerate_spanning_trees(region, cap)
    dist = ExactDistribution(tree_count=len(trees))
    share = Fraction(1, len(trees))
    for t in trees:
        sides = tree_splits(n, edges, region.weights, t, q)
        if not sides:
            dist.bot += share
        else:
            part = share / len(sides)
            for s in sides:
                dist.entries[s] = dist.entries.get(s, Fraction(0)) + part
    return dist


def _connected(n, edges, verts):
    vs = set(verts)
    if not vs:
        return False
    start = next(iter(vs))
    adj = {v: [] for v in vs}
    for a, b in edges:
        if a in vs and b in vs:
            adj[a].append(b)
            adj[b].append(a)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(vs)


def _induced(edges, verts):
    idx = {v: i for i, v in enumerate(sorted(verts))}
    return len(idx), [(idx[a], idx[b]) for a, b in edges if a in idx and b in idx]


def closed_form_distribution(region: PlanarRegion, max_vertices=22) -> ExactDistribution:
    """q = 0 law: Pr[P] = tau(P1) * tau(P2) * |cut| / tau(G) over balanced connected splits."""
    n, edges = region.n, list(region.edges)
    if n > max_vertices:
        raise TooLarge(f"closed form enumerates subsets; {n} vertices is too many")
    W = region.total_weight
    w = region.weights
    tau = matrix_tree_count(region)
    dist = ExactDistribution(tree_count=tau)
    if W % 2 == 0:
        rest = list(range(1, n))
        for mask in range(1 << (n - 1)):
            side = [0] + [rest[i] for i in range(n - 1) if mask >> i & 1]
            if 2 * sum(w[v] for v in side) != W:
                continue
            other = [v for v in range(n) if v not in set(side)]
            if not _connected(n, edges, side) or not _connected(n, edges, other):
                continue
            sset = set(side)
            cut = sum(1 for a, b in edges if (a in sset) != (b in sset))
            t1 = matrix_tree_count(_induced(edges, side))
            t2 = matrix_tree_count(_induced(edges, other))
            dist.entries[canonical_side(side, n)] = Fraction(t1 * t2 * cut, tau)
    dist.bot = 1 - sum(dist.entries.values(), Fraction(0))
    return dist


def exact_split_distribution(region: PlanarRegion, q=0, cap=DEFAULT_CAP, method="auto") -> ExactDistribution:
    """Exact law of the split returned for a uniform spanning tree.

    ``method`` is ``"closed"`` (q = 0 only), ``"enumerate"`` or ``"auto"``
    (closed form for q = 0, enumeration otherwise).
    """
    if method == "closed" or (method == "auto" and q == 0):
        if q != 0:
            raise ValueError("closed form applies to q = 0 only")
        return closed_form_distribution(region)
    return _enumerated(region, q, cap)
