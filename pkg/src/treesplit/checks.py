"""Sampler-versus-oracle comparisons: the small corpus, chi-square tests, reports."""

from __future__ import annotations

from collections import Counter

import numpy as np
from scipy import stats

from .oracle import exact_split_distribution
from .planar import PlanarRegion, build_grid_region, grid_region
from .rng import WalkRng
from .sampler import sample_balanced, sample_q_balanced

BOT = "bot"
MIN_EXPECTED = 5.0


def linked_blocks() -> PlanarRegion:
    """Two 2x2 blocks joined by a single edge."""
    a = [(0, 0), (1, 0), (0, 1), (1, 1)]
    b = [(2, 1), (3, 1), (2, 2), (3, 2)]
    return build_grid_region(a + b)


def small_corpus() -> dict:
    return {
        "path-4": grid_region(4, 1),
        "C4": grid_region(2, 2),
        "2x3": grid_region(2, 3),
        "3x3": grid_region(3, 3),
        "2x4": grid_region(2, 4),
        "4x4": grid_region(4, 4),
        "linked-blocks": linked_blocks(),
    }


def outcome_key(out):
    return BOT if out.bot else out.result.side_a


def sample_counts(region, n, policy=None, seed=0, stream=0, q=0) -> Counter:
    """Outcome counts over ``n`` draws sharing one RNG stream."""
    rng = WalkRng(seed, stream)
    c = Counter()
    for _ in range(n):
        if q:
            out = sample_q_balanced(region, q, policy, rng)
        else:
            out = sample_balanced(region, policy, rng)
        c[outcome_key(out)] += 1
    return c


def exact_probabilities(region, q=0) -> dict:
    dist = exact_split_distribution(region, q)
    probs = {k: float(v) for k, v in dist.entries.items() if v}
    if dist.bot:
        probs[BOT] = float(dist.bot)
    return probs


def _merge_rare(keys, expected):
    """Fold categories with expected count below the threshold into one bucket."""
    order = sorted(keys, key=lambda k: expected[k])
    groups = []
    cur = []
    acc = 0.0
    for k in order:
        cur.append(k)
        acc += expected[k]
        if acc >= MIN_EXPECTED:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return groups


def goodness_of_fit(counts: Counter, probs: dict):
    """Chi-square of observed counts against exact probabilities.

    Returns ``(statistic, p, dof)``; a single category gives ``p = 1`` when
    every draw landed in it.  Outcomes the oracle forbids give ``p = 0``.
    """
    n = sum(counts.values())
    if any(k not in probs for k in counts):
        return float("inf"), 0.0, 0
    expected = {k: probs[k] * n for k in probs}
    groups = _merge_rare(list(probs), expected)
    if len(groups) < 2:
        return 0.0, 1.0, 0
    obs = np.array([sum(counts.get(k, 0) for k in g) for g in groups], dtype=float)
    exp = np.array([sum(expected[k] for k in g) for g in groups], dtype=float)
    stat, p = stats.chisquare(obs, exp)
    return float(stat), float(p), len(groups) - 1


def two_sample(counts_a: Counter, counts_b: Counter):
    """Chi-square homogeneity test of two outcome samples; ``(statistic, p, dof)``."""
    keys = sorted(set(counts_a) | set(counts_b), key=str)
    if len(keys) < 2:
        return 0.0, 1.0, 0
    na, nb = sum(counts_a.values()), sum(counts_b.values())
    pooled = {k: (counts_a.get(k, 0) + counts_b.get(k, 0)) for k in keys}
    scale = min(na, nb) / (na + nb)
    groups = _merge_rare(keys, {k: pooled[k] * scale for k in keys})
    if len(groups) < 2:
        return 0.0, 1.0, 0
    table = np.array(
        [[sum(counts_a.get(k, 0) for k in g) for g in groups], [sum(counts_b.get(k, 0) for k in g) for g in groups]],
        dtype=float,
    )
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof)


def oracle_report(name, region, n, policy=None, seed=0, stream=0, q=0, alpha=1e-3):
    """JSON-ready comparison of ``n`` sampler draws with the exact law."""
    probs = exact_probabilities(region, q)
    counts = sample_counts(region, n, policy, seed, stream, q)
    stat, p, dof = goodness_of_fit(counts, probs)
    cells = region.cells
    rows = []
    for k in sorted(set(probs) | set(counts), key=lambda k: (k == BOT, str(k))):
        rows.append({
            "outcome": BOT if k == BOT else [list(cells[v]) for v in k],
            "expected": probs.get(k, 0.0) * n,
            "observed": counts.get(k, 0),
        })
    return {
        "region": name,
        "n": n,
        "q": q,
        "chi2": stat,
        "dof": dof,
        "p": p,
        "pass": p > alpha,
        "rows": rows,
    }
