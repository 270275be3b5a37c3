"""Acceptance run: criteria 1-9, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.  Criteria 6 and 7 dominate the runtime
(about 4 and 25 minutes).  Results of criteria 1 and 7 are cached in this
module so criterion 9 can rerun them and compare bytes.
"""

import csv
import hashlib
import io
import sys
import time
from collections import Counter, defaultdict

import pytest
from helpers import all_two_plans
from lemmas import ALL_CHECKS
from scipy import stats

from treesplit.bench import bench, summarize
from treesplit.chains import CSV_FIELDS, Chain, run_experiment, stripe_plan
from treesplit.checks import (
    BOT,
    exact_probabilities,
    goodness_of_fit,
    outcome_key,
    sample_counts,
    small_corpus,
    two_sample,
)
from treesplit.oracle import enumerate_spanning_trees, matrix_tree_count, tree_splits
from treesplit.planar import dual_tree_to_primal_tree, grid_region
from treesplit.rng import WalkRng
from treesplit.sampler import outcome_record, sample_balanced, sample_q_balanced, sample_ust
from treesplit.separator import make_params
from treesplit.walks import contracted_dual_adjacency, wilson_ust

ALPHA = 1e-3
CORPUS = small_corpus()
SEED = 1

_cache = {}


_out = {}


@pytest.fixture(autouse=True)
def _terminal(pytestconfig):
    _out["tr"] = pytestconfig.pluginmanager.getplugin("terminalreporter")
    yield


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    tr = _out.get("tr")
    if tr is not None:
        tr.write_line("")
        tr.write_line(line)
    else:
        print(line)
    assert ok, line


# criterion 1 helpers

def balanced_run(region, n, stream, policy="calibrated"):
    """Outcome counts plus a digest of the JSONL records, one RNG stream."""
    rng = WalkRng(SEED, stream)
    counts = Counter()
    h = hashlib.sha256()
    for i in range(n):
        out = sample_balanced(region, policy, rng)
        counts[outcome_key(out)] += 1
        h.update(outcome_record(region, out, seed=SEED, stream=i).encode() + b"\n")
    return counts, h.hexdigest()


def c1_runs():
    if "c1" not in _cache:
        _cache["c1"] = {name: balanced_run(r, 50_000, i) for i, (name, r) in enumerate(CORPUS.items())}
    return _cache["c1"]


def test_criterion_1_exact_distribution():
    t0 = time.perf_counter()
    runs = c1_runs()
    worst = 1.0
    bad = []
    for name, r in CORPUS.items():
        counts, _ = runs[name]
        p = goodness_of_fit(counts, exact_probabilities(r))[1]
        worst = min(worst, p)
        if p <= ALPHA:
            bad.append(name)
    secs = time.perf_counter() - t0
    report(1, not bad and secs < 120, f"min p={worst:.4f} failing={bad} time={secs:.0f}s (limit 120s)")


def test_criterion_2_policy_invariance():
    runs = c1_runs()
    worst = 1.0
    bad = []
    for i, (name, r) in enumerate(CORPUS.items()):
        samples = {
            "calibrated": runs[name][0],
            "paper": sample_counts(r, 50_000, "paper", SEED, 100 + i),
            "random": sample_counts(r, 50_000, "random", SEED, 200 + i),
        }
        for a, b in (("calibrated", "paper"), ("calibrated", "random"), ("paper", "random")):
            p = two_sample(samples[a], samples[b])[1]
            worst = min(worst, p)
            if p <= ALPHA:
                bad.append((name, a, b))
    report(2, not bad, f"min p={worst:.4f} failing={bad}")


def test_criterion_3_q_balanced_counting():
    t0 = time.perf_counter()
    count_errors = 0
    outside = 0
    worst = 1.0
    bad = []
    for i, (name, r) in enumerate(CORPUS.items()):
        edges = list(r.edges)
        for q in (1, 2):
            rng = WalkRng(SEED, 300 + 10 * i + q)
            classes = defaultdict(Counter)
            for _ in range(2500):
                out = sample_q_balanced(r, q, "calibrated", rng, trace=True)
                splits = tuple(tree_splits(r.n, edges, r.weights, out.tree, q))
                if out.q_count != len(splits):
                    count_errors += 1
                if out.bot:
                    outside += bool(splits)
                    continue
                if out.result.side_a not in splits:
                    outside += 1
                    continue
                classes[splits][out.result.side_a] += 1
            # uniform choice within each class of trees sharing the same split set
            stat, dof = 0.0, 0
            for splits, c in classes.items():
                m = sum(c.values())
                if len(splits) < 2 or m / len(splits) < 5:
                    continue
                e = m / len(splits)
                stat += sum((c.get(s, 0) - e) ** 2 / e for s in splits)
                dof += len(splits) - 1
            p = float(stats.chi2.sf(stat, dof)) if dof else 1.0
            worst = min(worst, p)
            if p <= ALPHA:
                bad.append((name, q))
    secs = time.perf_counter() - t0
    ok = count_errors == 0 and outside == 0 and not bad and secs < 120
    report(3, ok, f"count mismatches={count_errors} off-list picks={outside} min p={worst:.4f} "
                  f"failing={bad} time={secs:.0f}s (limit 120s)")


def dual_wilson_tree(region, adj, rng):
    dual = wilson_ust(adj, "outer", list(adj), rng)
    return tuple(sorted(dual_tree_to_primal_tree(region, dual)))


def b_of_tree(region, tree):
    splits = tree_splits(region.n, list(region.edges), region.weights, tree, 0)
    return splits[0] if splits else BOT


def test_criterion_4_ust_samplers_agree():
    t0 = time.perf_counter()
    problems = []
    worst = 1.0
    for i, (name, r) in enumerate(CORPUS.items()):
        adj = contracted_dual_adjacency(r)
        verts = {v: j for j, v in enumerate(adj)}
        dual_edges = {k: (verts[f], verts[g]) for f in adj for g, k in adj[f]}
        tau = matrix_tree_count(r)
        trees = enumerate_spanning_trees(r)
        tau_dual = matrix_tree_count((len(verts), list(dual_edges.values())))
        if not tau == len(trees) == tau_dual:
            problems.append((name, "counts", tau, len(trees), tau_dual))
        ra, rb = WalkRng(SEED, 400 + i), WalkRng(SEED, 500 + i)
        if tau <= 1000:
            n = max(4000, 60 * tau)
            a = Counter(tuple(sorted(sample_ust(r, "calibrated", ra)[0])) for _ in range(n))
            b = Counter(dual_wilson_tree(r, adj, rb) for _ in range(n))
            uniform = {t: 1 / tau for t in trees}
            ps = [goodness_of_fit(a, uniform)[1], goodness_of_fit(b, uniform)[1], two_sample(a, b)[1]]
        else:
            # too many trees for a direct test: compare the b(T) projection with its exact law
            n = 20_000
            a = Counter(b_of_tree(r, tuple(sorted(sample_ust(r, "calibrated", ra)[0]))) for _ in range(n))
            b = Counter(b_of_tree(r, dual_wilson_tree(r, adj, rb)) for _ in range(n))
            law = exact_probabilities(r)
            ps = [goodness_of_fit(a, law)[1], goodness_of_fit(b, law)[1], two_sample(a, b)[1]]
        worst = min(worst, *ps)
        if min(ps) <= ALPHA:
            problems.append((name, "law", [round(p, 4) for p in ps]))
    secs = time.perf_counter() - t0
    report(4, not problems and secs < 120, f"min p={worst:.4f} problems={problems} time={secs:.0f}s (limit 120s)")


def test_criterion_5_lemma_suite():
    t0 = time.perf_counter()
    failed = []
    cases = 0
    for name, check in ALL_CHECKS:
        try:
            got = check()
            cases += got
            if got <= 0:
                failed.append(name)
        except AssertionError as e:
            failed.append(f"{name}: {e}")
    secs = time.perf_counter() - t0
    report(5, not failed and secs < 300,
           f"{len(ALL_CHECKS) - len(failed)}/{len(ALL_CHECKS)} checks, {cases} cases, failing={failed} "
           f"time={secs:.0f}s (limit 300s)")


def test_criterion_6_scaling():
    t0 = time.perf_counter()
    rows = bench([32, 64, 128, 256, 512], ["balanced", "wilson"], 20, SEED, make_params("calibrated"), timing=True)
    summ = summarize(rows)
    sb, sw = summ["balanced"]["stepSlope"], summ["wilson"]["stepSlope"]
    secs = time.perf_counter() - t0
    ok = 0.85 <= sb <= 1.15 and sw > sb and secs <= 1800
    report(6, ok, f"balanced step slope={sb:.3f} (want 0.85..1.15), wilson slope={sw:.3f} (want > balanced), "
                  f"wall slopes {summ['balanced']['wallSlope']:.3f}/{summ['wilson']['wallSlope']:.3f} "
                  f"time={secs:.0f}s (limit 1800s)")


CHAIN_CONFIGS = [("recom", 5), ("recom", 10), ("revrecom", 5), ("revrecom", 10)]


def rows_bytes(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    for r in rows:
        w.writerow({**r, "wallTimeMs": ""})
    return buf.getvalue().encode()


def test_criterion_7_chain_table():
    t0 = time.perf_counter()
    results = {}
    lines = []
    ok = True
    for method, k in CHAIN_CONFIGS:
        rows, _ = run_experiment(10, k, 0, method, steps=100_000, trials=10, seed=SEED, policy="paper", timing=True)
        results[(method, k)] = rows
        trials, mean = rows[:-1], rows[-1]
        zero = all(r["nonSCRecombinations"] == 0 for r in trials)
        ok &= zero
        if method == "recom":
            ok &= 0 <= mean["plansWithNonSCPair"] <= 100
        lines.append(f"{method} k={k}: nonSC recombinations {'0' if zero else 'NONZERO'}, "
                     f"mean plansWithNonSCPair={mean['plansWithNonSCPair']:.1f}, "
                     f"distinct={mean['distinctNonSCPlans']:.1f}, accepted={mean['accepted']:.0f}")
    _cache["c7"] = results
    secs = time.perf_counter() - t0
    ok &= secs <= 1800
    report(7, ok, "; ".join(lines) + f"; time={secs:.0f}s (limit 1800s)")


def test_criterion_8_revrecom_stationarity():
    t0 = time.perf_counter()
    g = grid_region(2, 3)
    weights = all_two_plans(g)
    total = sum(weights.values())
    chain = Chain(stripe_plan(g, 2), "revrecom", policy="paper", rng=WalkRng(SEED, 800))
    occ = Counter()
    for _ in range(1_000_000):
        chain.step()
        occ[chain.plan.key()] += 1
    stat, p, dof = goodness_of_fit(occ, {key: w / total for key, w in weights.items()})
    secs = time.perf_counter() - t0
    report(8, p > ALPHA and secs < 300,
           f"{len(weights)} plans, chi2={stat:.2f} dof={dof} p={p:.4f} time={secs:.0f}s (limit 300s)")


def test_criterion_9_determinism():
    first = c1_runs()
    again = {name: balanced_run(r, 50_000, i) for i, (name, r) in enumerate(CORPUS.items())}
    c1_same = all(first[n][1] == again[n][1] for n in CORPUS)
    c7 = _cache.get("c7")
    c7_same = True
    for method, k in CHAIN_CONFIGS:
        rerun, _ = run_experiment(10, k, 0, method, steps=100_000, seed=SEED, policy="paper", timing=False,
                                  trial_ids=[0])
        if c7 is not None:
            ref = c7[(method, k)][:1]
        else:
            ref, _ = run_experiment(10, k, 0, method, steps=100_000, seed=SEED, policy="paper", timing=False,
                                    trial_ids=[0])
        c7_same &= rows_bytes(ref) == rows_bytes(rerun[:1])
    report(9, c1_same and c7_same, f"criterion 1 records identical={c1_same}, criterion 7 trial-0 rows identical={c7_same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
