import math
from collections import Counter

import pytest
from helpers import all_two_plans

from treesplit.chains import (
    CSV_FIELDS,
    Chain,
    Plan,
    initial_plan,
    random_bisection_plan,
    recom_step,
    revrecom_step,
    run_experiment,
    stripe_plan,
)
from treesplit.checks import goodness_of_fit
from treesplit.errors import BadInput, InfeasibleBalance
from treesplit.planar import grid_region
from treesplit.rng import WalkRng

ALPHA = 1e-3


# plans

def test_plan_needs_two_districts():
    with pytest.raises(BadInput):
        Plan(grid_region(2, 2), [1, 1, 1, 1])


def test_plan_validation():
    g = grid_region(2, 2)
    with pytest.raises(BadInput):
        Plan(g, [1, 2, 2, 1])  # diagonal districts are disconnected
    with pytest.raises(BadInput):
        Plan(g, [1, 1, 1, 2])  # 3 vs 1
    p = Plan(g, [1, 1, 1, 2], q=1)
    assert p.weights == {1: 3, 2: 1}
    with pytest.raises(BadInput):
        Plan(g, [1, 2, 3])


def test_plan_pairs_and_key():
    g = grid_region(3, 1)
    p = Plan(g, [1, 2, 3])
    assert p.adjacent_pairs == [(1, 2), (2, 3)]
    assert Plan(g, [3, 2, 1]).key() == p.key() == (1, 2, 3)


def test_relabel_updates_cut_counts():
    g = grid_region(4, 4)
    p = Plan(g, [1 if g.cells[v][0] < 2 else 2 for v in range(g.n)])
    assert p.pairs == {(1, 2): 4}
    # turn the vertical split into a horizontal one
    target = [1 if g.cells[v][1] < 2 else 2 for v in range(g.n)]
    ch = {v: d for v, d in enumerate(target) if d != p.assign[v]}
    q = p.relabel(ch, check=True)
    assert q.pairs == q._pairs() == {(1, 2): 4}
    assert q.weights == {1: 8, 2: 8}
    assert q.members[1] == sorted(v for v in range(g.n) if target[v] == 1)
    assert p.pairs == {(1, 2): 4} and p.assign != q.assign


def test_stripes_and_bisection():
    g = grid_region(10, 10)
    for k in (2, 4, 5, 10):
        p = stripe_plan(g, k)
        assert p is not None and p.validate()
    assert stripe_plan(g, 3) is None
    p = random_bisection_plan(grid_region(6, 6), 3, 0, WalkRng(1))
    assert p.validate() and sorted(p.weights.values()) == [12, 12, 12]
    p, kind = initial_plan(grid_region(6, 6), 4)
    assert kind == "stripes"


# steps

def test_chain_keeps_plans_valid():
    g = grid_region(8, 8)
    plan, _ = initial_plan(g, 4)
    chain = Chain(plan, "recom", rng=WalkRng(3), check=True)
    total = g.total_weight
    for _ in range(300):
        p = recom_step(chain)
        assert p.validate()
        assert sum(p.weights.values()) == total
    assert chain.stats.accepted > 0


def test_q_chain_stays_within_q():
    g = grid_region(6, 6)
    plan, _ = initial_plan(g, 3, q=2)
    chain = Chain(plan, "revrecom", q=2, rng=WalkRng(5), check=True)
    for _ in range(200):
        p = revrecom_step(chain)
        assert all(abs(w - 12) <= 2 for w in p.weights.values())


def test_two_by_two_occupancy_half_each():
    g = grid_region(2, 2)
    for method in ("recom", "revrecom"):
        chain = Chain(Plan(g, [1, 1, 2, 2]), method, rng=WalkRng(8))
        n = 10_000
        c = Counter()
        for _ in range(n):
            chain.step()
            c[chain.plan.key()] += 1
        assert len(c) == 2
        sigma = math.sqrt(n * 0.25)
        # consecutive states are correlated; moves happen with probability 1/2 per step
        assert all(abs(v - n / 2) < 3 * 2 * sigma for v in c.values())


def test_non_simply_connected_pair_is_rejected():
    g = grid_region(3, 3)
    ring_a = {(0, 0), (1, 0), (2, 0), (0, 1)}
    assign = []
    for x, y in g.cells:
        if (x, y) == (1, 1):
            assign.append(3)
        elif (x, y) in ring_a:
            assign.append(1)
        else:
            assign.append(2)
    plan = Plan(g, assign, 3, q=3)
    chain = Chain(plan, "recom", q=3, rng=WalkRng(2))
    assert chain._plan_has_nonsc()
    chain.run(400)
    st = chain.stats
    assert st.rejected_nonsc > 0
    assert st.plans_with_nonsc_pair > 0 and st.distinct_nonsc_plans >= 1
    assert st.nonsc_recombinations == 0


def test_revrecom_step_needs_revrecom_chain():
    chain = Chain(Plan(grid_region(2, 2), [1, 1, 2, 2]), "recom")
    with pytest.raises(ValueError):
        revrecom_step(chain)
    with pytest.raises(ValueError):
        Chain(chain.plan, "forest")


def test_revrecom_stationary_law_on_2x3():
    g = grid_region(2, 3)
    weights = all_two_plans(g)
    total = sum(weights.values())
    chain = Chain(stripe_plan(g, 2), "revrecom", rng=WalkRng(4))
    n = 40_000
    occ = Counter()
    flows = Counter()
    prev = chain.plan.key()
    for _ in range(n):
        chain.step()
        cur = chain.plan.key()
        occ[cur] += 1
        if cur != prev:
            flows[(prev, cur)] += 1
        prev = cur
    assert set(occ) <= set(weights)
    probs = {k: w / total for k, w in weights.items()}
    assert goodness_of_fit(occ, probs)[1] > ALPHA
    # detailed balance: flow x -> y matches flow y -> x within counting error
    for (x, y), f in flows.items():
        b = flows.get((y, x), 0)
        assert abs(f - b) <= 3 * math.sqrt(f + b) + 3


# experiments

def test_experiment_rows_and_fields():
    rows, kind = run_experiment(6, 3, method="recom", steps=50, trials=2, seed=1, timing=False)
    assert kind == "stripes"
    assert len(rows) == 3 and rows[-1]["trial"] == "mean"
    for r in rows:
        assert list(r) == CSV_FIELDS
        assert r["nonSCRecombinations"] == 0 and r["wallTimeMs"] == ""


def test_experiment_is_deterministic():
    a, _ = run_experiment(6, 2, method="revrecom", steps=80, trials=2, seed=3, timing=False)
    b, _ = run_experiment(6, 2, method="revrecom", steps=80, trials=2, seed=3, timing=False)
    assert a == b
    c, _ = run_experiment(6, 2, method="revrecom", steps=80, trials=2, seed=3, timing=False, trial_ids=[1])
    assert c[0] == a[1]


def test_experiment_rejects_infeasible_balance():
    with pytest.raises(InfeasibleBalance):
        run_experiment(10, 3, steps=1)


def test_snapshots_every_n_steps():
    seen = []
    run_experiment(6, 3, steps=20, trials=1, snapshot_every=5, on_snapshot=lambda t, s, p: seen.append((t, s, p.to_json())))
    assert [s for _, s, _ in seen] == [5, 10, 15, 20]
    assert len(seen[0][2]["assignment"]) == 36 and seen[0][2]["k"] == 3
