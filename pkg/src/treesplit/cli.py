"""Command-line entry point: ``treesplit <subcommand> ...``.

Exit codes: 0 success, 2 bad configuration, 3 bad region.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .bench import BENCH_FIELDS, METHODS, bench, loglog_slope, summarize
from .chains import CSV_FIELDS, average_row, run_experiment
from .checks import oracle_report, small_corpus
from .errors import (
    BadInput,
    DisconnectedInput,
    InfeasibleBalance,
    NotSimplyConnected,
    QTooLarge,
    TooLarge,
    TreesplitError,
)
from .planar import grid_region, load_region_file, parse_cell_key
from .regiontree import RegionTree
from .rng import RNG_ALGORITHM, WalkRng
from .sampler import outcome_record, sample_balanced, sample_q_balanced, sample_ust
from .separator import make_params
from .svgplot import cell_map, loglog_plot

EXIT_OK, EXIT_CONFIG, EXIT_REGION = 0, 2, 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config and provenance


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_config(args) -> dict:
    """The validated options that determine the primary output (paths excluded)."""
    skip = {"func", "out", "svg", "dump_region_tree", "snapshot_out", "summary", "inputs"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["rng"] = RNG_ALGORITHM
    return cfg


def header(cfg) -> dict:
    return {"tool": "treesplit", "version": __version__, "configHash": config_hash(cfg), "config": cfg}


def csv_text(rows, fields, cfg) -> str:
    buf = io.StringIO()
    h = header(cfg)
    buf.write(f"# treesplit {h['version']} configHash={h['configHash']} config={json.dumps(cfg, sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def read_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w"), True


def write_text(path, text):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def workers(jobs: int) -> int:
    env = os.environ.get("TREESPLIT_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"TREESPLIT_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ConfigError("TREESPLIT_THREADS must be at least 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, jobs))


def pool_map(fn, jobs):
    """Results in job order; runs inline with a single worker."""
    jobs = list(jobs)
    n = workers(len(jobs))
    if n == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, jobs))


# ---------------------------------------------------------------------------
# region and policy


def parse_grid(text):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"--grid expects WxH, got {text!r}") from exc
    if w < 1 or h < 1:
        raise ConfigError("grid sides must be positive")
    return w, h


def region_source(args):
    """Picklable description of the region: ``("grid", w, h)`` or ``("file", path)``."""
    grid = getattr(args, "grid", None)
    path = getattr(args, "region", None)
    if grid and path:
        raise ConfigError("give either --grid or --region, not both")
    if grid:
        return ("grid",) + parse_grid(grid)
    if path:
        return ("file", path)
    return None


_REGIONS = {}


def build_region(source):
    r = _REGIONS.get(source)
    if r is None:
        if source[0] == "grid":
            r = grid_region(source[1], source[2])
        else:
            r = load_region_file(source[1])
        _REGIONS[source] = r
    return r


def policy_from(args):
    for name in ("t_mult", "t_cap", "epsilon_override"):
        v = getattr(args, name, None)
        if v is not None and not v > 0:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    try:
        return make_params(args.policy, args.t_mult, args.t_cap, args.epsilon_override)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _check_count(name, v, low=1):
    if v < low:
        raise ConfigError(f"--{name} must be at least {low}")


# ---------------------------------------------------------------------------
# sample / ust


def _sample_job(job):
    source, pargs, q, seed, lo, hi, timing, precheck = job
    region = build_region(source)
    policy = make_params(*pargs)
    out = []
    for i in range(lo, hi):
        rng = WalkRng(seed, i)
        t0 = time.perf_counter()
        if q:
            o = sample_q_balanced(region, q, policy, rng)
        else:
            o = sample_balanced(region, policy, rng, precheck=precheck)
        ms = round((time.perf_counter() - t0) * 1000, 3) if timing else None
        out.append((outcome_record(region, o, seed=seed, stream=i, timing=ms), o.bot, o.stats))
    return out


def _chunks(n, parts):
    step = max(1, -(-n // parts))
    return [(lo, min(n, lo + step)) for lo in range(0, n, step)]


def _policy_args(args):
    return (args.policy, args.t_mult, args.t_cap, args.epsilon_override)


def cmd_sample(args):
    source = region_source(args)
    if source is None:
        raise ConfigError("sample needs --grid or --region")
    _check_count("n", args.n)
    if args.q < 0:
        raise ConfigError("--q must be nonnegative")
    policy_from(args)
    cfg = run_config(args)
    region = build_region(source)
    if not region.simply_connected:
        raise NotSimplyConnected("region has a hole")
    if args.strict and args.q and 6 * args.q >= region.total_weight:
        raise QTooLarge(f"q={args.q} needs q < n/6")
    if args.dump_region_tree:
        write_text(args.dump_region_tree, json.dumps(RegionTree(region).dump(), indent=1) + "\n")
    jobs = [
        (source, _policy_args(args), args.q, args.seed, lo, hi, not args.no_timing, not args.no_precheck)
        for lo, hi in _chunks(args.n, workers(args.n) * 4)
    ]
    results = [r for part in pool_map(_sample_job, jobs) for r in part]
    fh, close = _open_out(args.out)
    try:
        fh.write(json.dumps({"header": header(cfg)}, sort_keys=True) + "\n")
        for line, _, _ in results:
            fh.write(line + "\n")
    finally:
        if close:
            fh.close()
    n = len(results)
    summary = {
        "n": n,
        "botRate": sum(b for _, b, _ in results) / n,
        "meanStages": sum(s["stages"] for _, _, s in results) / n,
        "meanSteps": sum(s["steps"] for _, _, s in results) / n,
        "meanLevels": sum(s["levels"] for _, _, s in results) / n,
        "prechecks": sum(bool(s.get("precheck")) for _, _, s in results),
        "configHash": config_hash(cfg),
    }
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    if args.summary:
        write_text(args.summary, json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def _ust_job(job):
    source, pargs, seed, lo, hi, timing = job
    region = build_region(source)
    policy = make_params(*pargs)
    cells = region.cells
    out = []
    for i in range(lo, hi):
        t0 = time.perf_counter()
        tree, st = sample_ust(region, policy, WalkRng(seed, i))
        rec = {
            "stream": i,
            "seed": seed,
            "tree": [[list(cells[a]), list(cells[b])] for a, b in (region.edges[k] for k in sorted(tree))],
            "stats": st,
        }
        if timing:
            rec["wallTimeMs"] = round((time.perf_counter() - t0) * 1000, 3)
        out.append(json.dumps(rec, sort_keys=True))
    return out


def cmd_ust(args):
    source = region_source(args)
    if source is None:
        raise ConfigError("ust needs --grid or --region")
    _check_count("n", args.n)
    policy_from(args)
    cfg = run_config(args)
    region = build_region(source)
    if not region.simply_connected:
        raise NotSimplyConnected("region has a hole")
    jobs = [(source, _policy_args(args), args.seed, lo, hi, not args.no_timing) for lo, hi in _chunks(args.n, workers(args.n) * 4)]
    lines = [ln for part in pool_map(_ust_job, jobs) for ln in part]
    fh, close = _open_out(args.out)
    try:
        fh.write(json.dumps({"header": header(cfg)}, sort_keys=True) + "\n")
        for ln in lines:
            fh.write(ln + "\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# chain


def _chain_job(job):
    source, k, q, method, steps, seed, pargs, timing, trial, snap_every = job
    region = build_region(source)
    snaps = []

    def keep(t, s, plan):
        snaps.append({"trial": t, "step": s, **plan.to_json()})

    rows, kind = run_experiment(
        region, k, q, method, steps, seed=seed, policy=make_params(*pargs), timing=timing,
        trial_ids=[trial], snapshot_every=snap_every, on_snapshot=keep if snap_every else None,
    )
    return rows[0], kind, snaps


def cmd_chain(args):
    source = region_source(args) or ("grid", 10, 10)
    _check_count("k", args.k, 2)
    _check_count("steps", args.steps)
    _check_count("trials", args.trials)
    if args.q < 0:
        raise ConfigError("--q must be nonnegative")
    if args.snapshot_every < 0:
        raise ConfigError("--snapshot-every must be nonnegative")
    policy_from(args)
    cfg = run_config(args)
    region = build_region(source)
    if args.q == 0 and region.total_weight % args.k:
        raise InfeasibleBalance(f"total weight {region.total_weight} is not divisible by k={args.k}")
    jobs = [
        (source, args.k, args.q, args.method, args.steps, args.seed, _policy_args(args), not args.no_timing, t, args.snapshot_every)
        for t in range(args.trials)
    ]
    results = pool_map(_chain_job, jobs)
    rows = [r for r, _, _ in results]
    rows.append(average_row(rows, args.method, args.k, args.q, not args.no_timing))
    cfg_out = dict(cfg, init=results[0][1])
    write_text(args.out, csv_text(rows, CSV_FIELDS, cfg_out))
    if args.snapshot_every and args.snapshot_out:
        fh, close = _open_out(args.snapshot_out)
        try:
            fh.write(json.dumps({"header": header(cfg_out)}, sort_keys=True) + "\n")
            for _, _, snaps in results:
                for s in snaps:
                    fh.write(json.dumps(s, sort_keys=True) + "\n")
        finally:
            if close:
                fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args):
    try:
        sizes = [int(s) for s in args.sizes.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--sizes expects integers, got {args.sizes!r}") from exc
    if not sizes or min(sizes) < 2:
        raise ConfigError("grid sizes must be at least 2")
    methods = args.methods.split(",")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown bench methods {bad}; choose from {list(METHODS)}")
    _check_count("reps", args.reps)
    policy_from(args)
    cfg = run_config(args)
    rows = bench(sizes, methods, args.reps, args.seed, make_params(*_policy_args(args)), not args.no_timing)
    write_text(args.out, csv_text(rows, BENCH_FIELDS, cfg))
    summ = summarize(rows)
    print(json.dumps(summ, sort_keys=True), file=sys.stderr)
    if args.svg:
        series = {m: (s["n"], s["meanSteps"], s.get("stepSlope")) for m, s in summ.items()}
        write_text(args.svg, loglog_plot(series, title="walk steps per call"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-check


def cmd_oracle_check(args):
    _check_count("n", args.n)
    if args.q < 0:
        raise ConfigError("--q must be nonnegative")
    policy_from(args)
    cfg = run_config(args)
    source = region_source(args)
    if source is None:
        corpus = small_corpus()
    else:
        r = build_region(source)
        if not r.simply_connected:
            raise NotSimplyConnected("region has a hole")
        corpus = {"region": r}
    policy = make_params(*_policy_args(args))
    reports = []
    for i, (name, region) in enumerate(corpus.items()):
        if args.q and 6 * args.q >= region.total_weight and args.strict:
            continue
        try:
            reports.append(oracle_report(name, region, args.n, policy, args.seed, i, args.q, args.alpha))
        except TooLarge as exc:
            raise ConfigError(f"region {name} is too large for the exact oracle: {exc}") from exc
    doc = {"header": header(cfg), "pass": all(r["pass"] for r in reports), "reports": reports}
    write_text(args.out, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    for r in reports:
        print(f"{r['region']:>14}  chi2={r['chi2']:.2f} dof={r['dof']} p={r['p']:.4f}  {'PASS' if r['pass'] else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if doc["pass"] else 1


# ---------------------------------------------------------------------------
# plot


def _load_json_or_lines(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return [json.loads(text)]
    except json.JSONDecodeError:
        return [json.loads(ln) for ln in text.splitlines() if ln.strip()]


def _partition_labels(doc):
    if "assignment" in doc:
        items = sorted((parse_cell_key(k), d) for k, d in doc["assignment"].items())
        return [c for c, _ in items], [d for _, d in items], f"plan, k={doc.get('k', len(set(d for _, d in items)))}"
    if "sideA" in doc:
        if doc.get("bot"):
            raise BadInput("record is bot; nothing to draw")
        cells = [tuple(c) for c in doc["sideA"]] + [tuple(c) for c in doc["sideB"]]
        labels = [1] * len(doc["sideA"]) + [2] * len(doc["sideB"])
        return cells, labels, "balanced 2-partition"
    raise BadInput("JSON is neither a plan snapshot nor a partition record")


def cmd_plot(args):
    src = args.inputs
    if src.endswith(".csv"):
        rows = read_csv(src)
        if not rows:
            raise BadInput("empty CSV")
        if "size" in rows[0]:
            by = {}
            for r in rows:
                by.setdefault(r["method"], {}).setdefault(int(r["n"]), []).append(float(r["steps"]))
            series = {}
            for m, d in by.items():
                ns = sorted(d)
                ys = [sum(d[n]) / len(d[n]) for n in ns]
                series[m] = (ns, ys, loglog_slope(ns, ys) if len(ns) > 1 else None)
            svg = loglog_plot(series, title="walk steps per call")
        elif "plansWithNonSCPair" in rows[0]:
            trials = [r for r in rows if r["trial"] != "mean"]
            series = {"accepted": ([i + 1 for i in range(len(trials))], [max(float(r["accepted"]), 1e-9) for r in trials], None)}
            svg = loglog_plot(series, title="accepted steps per trial", xlabel="trial", ylabel="accepted")
        else:
            raise BadInput("unrecognized CSV columns")
    else:
        docs = [d for d in _load_json_or_lines(src) if "header" not in d]
        if not docs:
            raise BadInput("no records in input")
        idx = min(args.index, len(docs) - 1)
        cells, labels, title = _partition_labels(docs[idx])
        svg = cell_map(cells, labels, title=title)
    write_text(args.out, svg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_region(p):
    p.add_argument("--grid", help="rectangular region WxH")
    p.add_argument("--region", help="region JSON file")


def _add_policy(p):
    p.add_argument("--policy", choices=["paper", "calibrated", "random"], default="calibrated")
    p.add_argument("--t-mult", type=float, default=None, help="calibrated step budget multiplier")
    p.add_argument("--t-cap", type=float, default=None, help="step budget cap as a multiple of region size")
    p.add_argument("--epsilon-override", type=float, default=None, help="replace the separator radius constant")


def build_parser():
    ap = argparse.ArgumentParser(prog="treesplit", description="Balanced tree-weighted partitions of grid regions.")
    ap.add_argument("--version", action="version", version=f"treesplit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw balanced 2-partitions (JSONL)")
    _add_region(p)
    _add_policy(p)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="refuse q >= n/6")
    p.add_argument("--no-precheck", action="store_true")
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--dump-region-tree", metavar="PATH")
    p.add_argument("--summary", metavar="PATH")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ust", help="draw uniform spanning trees (JSONL)")
    _add_region(p)
    _add_policy(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ust)

    p = sub.add_parser("chain", help="run ReCom or RevReCom trials (CSV)")
    _add_region(p)
    _add_policy(p)
    p.add_argument("--method", choices=["recom", "revrecom"], default="recom")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--snapshot-out", metavar="PATH")
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("bench", help="scaling measurements (CSV, optional SVG)")
    _add_policy(p)
    p.add_argument("--sizes", default="32,64,128")
    p.add_argument("--methods", default="balanced,wilson")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--svg", metavar="PATH")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="sampler vs exact law, chi-square report (JSON)")
    _add_region(p)
    _add_policy(p)
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("plot", help="SVG from a bench/chain CSV or a partition/plan JSON")
    p.add_argument("inputs", help="CSV or JSON(L) file")
    p.add_argument("--index", type=int, default=0, help="record to draw from a JSONL stream")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except (DisconnectedInput, NotSimplyConnected) as exc:
        print(f"treesplit: bad region: {exc}", file=sys.stderr)
        return EXIT_REGION
    except (ConfigError, QTooLarge, InfeasibleBalance) as exc:
        print(f"treesplit: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BadInput as exc:
        # malformed region files are region errors; anything else is configuration
        code = EXIT_REGION if getattr(args, "region", None) and args.func is not cmd_plot else EXIT_CONFIG
        print(f"treesplit: bad input: {exc}", file=sys.stderr)
        return code
    except FileNotFoundError as exc:
        print(f"treesplit: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TreesplitError as exc:
        print(f"treesplit: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
