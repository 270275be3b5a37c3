"""Scaling measurements: walk steps and wall time per call on k x k grids."""

from __future__ import annotations

import math
import time

import numpy as np

from .planar import grid_region
from .rng import WalkRng
from .sampler import sample_balanced, sample_ust
from .walks import dual_wilson_ust

METHODS = ("balanced", "ust", "wilson")
BENCH_FIELDS = ["size", "n", "method", "rep", "steps", "levels", "bot", "wallTimeMs"]


def bench_stream(size_index, method, rep):
    return (size_index * 8 + METHODS.index(method)) * 1_000_000 + rep


def run_one(region, method, policy, rng):
    """Returns ``(walk steps, levels, bot)`` for one call of ``method``."""
    if method == "balanced":
        out = sample_balanced(region, policy, rng)
        return out.stats["steps"], out.stats["levels"], int(out.bot)
    if method == "ust":
        _, st = sample_ust(region, policy, rng)
        return st["steps"], st["depth"], 0
    if method == "wilson":
        _, steps = dual_wilson_ust(region, rng)
        return steps, 0, 0
    raise ValueError(f"unknown method {method!r}")


def bench(sizes, methods=("balanced", "wilson"), reps=3, seed=0, policy=None, timing=True, progress=None):
    """One row per (size, method, rep), in that order."""
    rows = []
    for si, k in enumerate(sizes):
        region = grid_region(k, k)
        for method in methods:
            r = reps[method] if isinstance(reps, dict) else reps
            for rep in range(r):
                rng = WalkRng(seed, bench_stream(si, method, rep))
                t0 = time.perf_counter()
                steps, levels, bot = run_one(region, method, policy, rng)
                ms = (time.perf_counter() - t0) * 1000
                row = {
                    "size": k,
                    "n": region.n,
                    "method": method,
                    "rep": rep,
                    "steps": steps,
                    "levels": levels,
                    "bot": bot,
                    "wallTimeMs": round(ms, 1) if timing else "",
                }
                rows.append(row)
                if progress is not None:
                    progress(row)
    return rows


def loglog_slope(xs, ys):
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def summarize(rows):
    """Per method: mean steps and wall time per size plus the log-log slopes against n."""
    out = {}
    for method in dict.fromkeys(r["method"] for r in rows):
        mine = [r for r in rows if r["method"] == method]
        ns = sorted({r["n"] for r in mine})
        steps = [float(np.mean([r["steps"] for r in mine if r["n"] == n])) for n in ns]
        entry = {"n": ns, "meanSteps": steps}
        if len(ns) >= 2:
            entry["stepSlope"] = loglog_slope(ns, steps)
        walls = [r["wallTimeMs"] for r in mine if r["wallTimeMs"] != ""]
        if len(walls) == len(mine) and len(ns) >= 2:
            wt = [float(np.mean([r["wallTimeMs"] for r in mine if r["n"] == n])) for n in ns]
            entry["meanWallMs"] = wt
            entry["wallSlope"] = loglog_slope(ns, [max(w, 1e-3) for w in wt])
        out[method] = entry
    return out


def standard_error(values):
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
