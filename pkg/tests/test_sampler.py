import json
import random
from collections import Counter

import pytest
from helpers import random_sc_region

from treesplit.checks import exact_probabilities, goodness_of_fit, outcome_key, sample_counts, small_corpus, two_sample
from treesplit.errors import NotSimplyConnected, QTooLarge
from treesplit.oracle import enumerate_spanning_trees, tree_splits
from treesplit.planar import build_grid_region, grid_region
from treesplit.rng import WalkRng
from treesplit.sampler import Partition2, sample_balanced, sample_q_balanced, sample_ust
from treesplit.separator import PolicyParams
from treesplit.walks import adjacency_from_edges, wilson_ust

ALPHA = 1e-3
POLICIES = ["calibrated", "paper", "random"]


def connected(region, side):
    side = set(side)
    if not side:
        return False
    start = next(iter(side))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in region.neighbors(v):
            if w in side and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == side


# sample_balanced

@pytest.mark.parametrize("policy", POLICIES)
def test_path_of_four_always_splits_in_the_middle(policy):
    r = grid_region(4, 1)
    rng = WalkRng(1)
    for _ in range(50):
        out = sample_balanced(r, policy, rng)
        assert out.result.side_a == (0, 1) and out.result.side_b == (2, 3)


def test_c4_opposite_pairs_half_each():
    r = grid_region(2, 2)
    c = sample_counts(r, 20_000, seed=2)
    assert "bot" not in c and len(c) == 2
    assert goodness_of_fit(c, exact_probabilities(r))[1] > ALPHA
    assert all(abs(v / 20_000 - 0.5) < 0.02 for v in c.values())


def test_path_of_five_is_always_bot():
    r = grid_region(5, 1)
    rng = WalkRng(0)
    assert all(sample_balanced(r, None, rng).bot for _ in range(50))


def test_balanced_partition_invariants():
    rng = random.Random(3)
    wr = WalkRng(3)
    seen = 0
    for _ in range(150):
        r = random_sc_region(rng, rng.randint(2, 30))
        out = sample_balanced(r, None, wr)
        if out.bot:
            continue
        p = out.result
        seen += 1
        assert p.weight_a == p.weight_b == r.total_weight // 2
        assert set(p.side_a) | set(p.side_b) == set(range(r.n)) and not set(p.side_a) & set(p.side_b)
        assert connected(r, p.side_a) and connected(r, p.side_b)
        a, b = r.edges[p.balance_edge]
        assert (a in p.side_a) != (b in p.side_a)
    assert seen > 20


def test_weighted_vertices():
    # weights 3,1,1,1 on a path: only the first vertex balances the rest
    r = build_grid_region([(0, 0), (1, 0), (2, 0), (3, 0)], {(0, 0): 3})
    out = sample_balanced(r, None, WalkRng(0))
    assert out.result.side_a == (0,) and out.result.weight_a == 3


def test_small_regions_match_the_closed_form():
    rng = random.Random(7)
    done = 0
    while done < 6:
        r = random_sc_region(rng, rng.randint(6, 12), spread=3)
        if r.total_weight % 2 or not r.faces:
            continue
        probs = exact_probabilities(r)
        c = sample_counts(r, 6000, seed=40 + done)
        assert goodness_of_fit(c, probs)[1] > ALPHA, sorted(r.cells)
        done += 1


@pytest.mark.parametrize("name", ["C4", "2x3", "3x3", "linked-blocks"])
def test_policy_choice_does_not_change_the_law(name):
    r = small_corpus()[name]
    a = sample_counts(r, 8000, "calibrated", seed=5, stream=0)
    b = sample_counts(r, 8000, "random", seed=5, stream=1)
    c = sample_counts(r, 8000, "paper", seed=5, stream=2)
    assert two_sample(a, b)[1] > ALPHA
    assert two_sample(a, c)[1] > ALPHA


def test_trace_mode_tree_agrees_with_the_outcome():
    r = grid_region(4, 4)
    rng = WalkRng(9)
    n, edges = r.n, list(r.edges)
    for _ in range(300):
        out = sample_balanced(r, "calibrated", rng, trace=True)
        assert len(out.tree) == n - 1
        splits = tree_splits(n, edges, r.weights, out.tree, 0)
        if out.bot:
            assert splits == []
        else:
            assert splits == [out.result.side_a]


def test_precheck_matches_no_precheck_law():
    r = grid_region(4, 4)
    a, b = Counter(), Counter()
    ra, rb = WalkRng(12, 0), WalkRng(12, 1)
    for _ in range(6000):
        a[outcome_key(sample_balanced(r, None, ra, precheck=True))] += 1
        b[outcome_key(sample_balanced(r, None, rb, precheck=False))] += 1
    assert two_sample(a, b)[1] > ALPHA


def test_hole_is_rejected():
    ring = {(x, y) for x in range(3) for y in range(3)} - {(1, 1)}
    r = build_grid_region(ring)
    with pytest.raises(NotSimplyConnected):
        sample_balanced(r, None, WalkRng(0))
    with pytest.raises(NotSimplyConnected):
        sample_ust(r, None, WalkRng(0))


def test_same_seed_same_outcome():
    r = grid_region(9, 8)
    a = sample_balanced(r, None, WalkRng(4, 1))
    b = sample_balanced(r, None, WalkRng(4, 1))
    assert a.result == b.result and a.stats == b.stats


def test_outcome_json_shape():
    r = grid_region(2, 2)
    out = sample_balanced(r, None, WalkRng(0))
    d = out.to_json(r, seed=0)
    json.dumps(d)
    assert set(d) >= {"sideA", "sideB", "weights", "qCount", "bot", "seed", "stats"}
    assert d["weights"] == [2, 2] and d["bot"] is False and d["qCount"] == 1
    assert set(d["stats"]) >= {"stages", "steps", "levels", "precheck"}


def test_partition_from_side_orders_sides():
    r = grid_region(2, 2)
    p = Partition2.from_side(r, {2, 3})
    assert p.side_a == (0, 1) and p.side_b == (2, 3)


# sample_q_balanced

def test_path_of_six_q1_counts_three():
    r = grid_region(6, 1)
    rng = WalkRng(2)
    c = Counter()
    for _ in range(6000):
        out = sample_q_balanced(r, 1, None, rng)
        assert out.q_count == 3
        c[out.result.weight_a] += 1
    assert set(c) == {2, 3, 4}
    assert goodness_of_fit(c, {2: 1 / 3, 3: 1 / 3, 4: 1 / 3})[1] > ALPHA


def test_c4_q1_counts_three():
    r = grid_region(2, 2)
    rng = WalkRng(3)
    for _ in range(500):
        out = sample_q_balanced(r, 1, None, rng)
        assert out.q_count == 3
        assert abs(out.result.weight_a - 2) <= 1


def test_q0_is_sample_balanced():
    r = grid_region(3, 4)
    for seed in range(30):
        a = sample_q_balanced(r, 0, None, WalkRng(seed))
        b = sample_balanced(r, None, WalkRng(seed))
        assert a.result == b.result and a.q_count == b.q_count
        assert a.q_count in (0, 1)


@pytest.mark.parametrize("q", [1, 2])
def test_q_count_matches_the_completed_tree(q):
    rng = random.Random(q)
    wr = WalkRng(30 + q)
    for _ in range(60):
        r = random_sc_region(rng, rng.randint(4, 30), spread=4)
        out = sample_q_balanced(r, q, "calibrated", wr, trace=True)
        splits = tree_splits(r.n, list(r.edges), r.weights, out.tree, q)
        assert out.q_count == len(splits)
        if out.bot:
            assert splits == []
        else:
            assert out.result.side_a in splits
            assert abs(2 * out.result.weight_a - r.total_weight) <= 2 * q


def test_q_mode_matches_enumeration_on_3x3():
    r = grid_region(3, 3)
    probs = exact_probabilities(r, q=1)
    c = sample_counts(r, 8000, seed=8, q=1)
    assert goodness_of_fit(c, probs)[1] > ALPHA


def test_strict_mode_refuses_large_q():
    r = grid_region(4, 4)
    with pytest.raises(QTooLarge):
        sample_q_balanced(r, 3, None, WalkRng(0), strict=True)
    sample_q_balanced(r, 2, None, WalkRng(0), strict=True)
    assert sample_q_balanced(r, 3, None, WalkRng(0)).q_count >= 1
    with pytest.raises(ValueError):
        sample_q_balanced(r, -1, None, WalkRng(0))


# sample_ust

def test_ust_on_tree_region_is_the_region():
    r = build_grid_region({(0, 0), (1, 0), (2, 0), (1, 1), (1, 2)})
    for seed in range(5):
        tree, _ = sample_ust(r, None, WalkRng(seed))
        assert sorted(tree) == list(range(r.m))


def test_ust_c4_uniform():
    r = grid_region(2, 2)
    rng = WalkRng(6)
    c = Counter(tuple(sample_ust(r, None, rng)[0]) for _ in range(40_000))
    assert goodness_of_fit(c, {t: 1 / 4 for t in enumerate_spanning_trees(r)})[1] > ALPHA


@pytest.mark.parametrize("policy", POLICIES)
def test_ust_3x3_uniform(policy):
    r = grid_region(3, 3)
    trees = enumerate_spanning_trees(r)
    assert len(trees) == 192
    rng = WalkRng(7)
    c = Counter(tuple(sample_ust(r, policy, rng)[0]) for _ in range(192 * 60))
    assert goodness_of_fit(c, {t: 1 / 192 for t in trees})[1] > ALPHA


@pytest.mark.parametrize("name", ["2x3", "linked-blocks"])
def test_ust_matches_wilson(name):
    r = small_corpus()[name]
    adj = adjacency_from_edges(list(r.edges), range(r.n))
    ra, rb = WalkRng(10, 0), WalkRng(10, 1)
    a = Counter(tuple(sample_ust(r, None, ra)[0]) for _ in range(6000))
    b = Counter(tuple(sorted(wilson_ust(adj, 0, range(r.n), rb))) for _ in range(6000))
    assert two_sample(a, b)[1] > ALPHA


def test_ust_depth_is_logarithmic_on_blocks():
    params = PolicyParams.calibrated()
    for k in (8, 16, 32):
        _, st = sample_ust(grid_region(k, k), params, WalkRng(k))
        assert st["depth"] <= 4 * (2 * k.bit_length())
