"""Acceptance criteria A1-A10, shared by ``biasmarket validate`` and the test suite.

Each check returns a :class:`Criterion` with a one-line verdict and the
measured numbers, so a failing criterion still reports what was observed.
"""

from __future__ import annotations

import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytic as _an
from . import rng as _rng
from .engine import init_market, measure_dispersion_slope, run, step
from .market import clearing_price
from .oracle import brute_clearing, naive_step
from .params import Params
from .sweep import HIGHLIGHT_ALPHA, SweepSpec, nonmonotonicity_report, run_sweep

# 100 periods can drain at most 100 * (1 + cost) of liquidity, so 128 rules out exits
NO_EXIT = {"w0": 128.0, "l0": 128.0}


@dataclass
class Criterion:
    ident: str
    title: str
    passed: bool
    detail: str
    runs: list[Params] = field(default_factory=list, repr=False)

    def line(self) -> str:
        return f"{self.ident} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.detail}"


# ---------------------------------------------------------------- A1-A6


def check_a1() -> Criterion:
    runs = [Params(alpha=1.0, gamma=1.0, p0=p0, seed=s) for p0 in (0.9, 0.5, 0.3, 0.123456789) for s in range(3)]
    bad = []
    for p in runs:
        series, summary = run(p)
        if not (np.all(series.price == p.p0) and summary.volatility == 0.0):
            bad.append(p.p0)
    ok = not bad
    return Criterion("A1", "frozen price at alpha=1, gamma=1", ok,
                     f"{len(runs)} runs, price == P0 every period and volatility 0" if ok else f"moved at P0 {bad}",
                     runs)  # fmt: skip


def check_a2(seeds: int = 50) -> Criterion:
    runs, parts, ok = [], [], True
    for gamma in (0.5, 0.8):
        p1_pred, bound = _an.adaptive_prediction(0.9, 0.005, gamma)
        horizon = 3.0 * _an.adaptive_convergence_time(1000, gamma)
        drift, p1_err, steady = [], [], []
        for s in range(seeds):
            p = Params(alpha=1.0, gamma=gamma, p0=0.9, cost=0.005, n_agents=1000, seed=s, **NO_EXIT)
            runs.append(p)
            series, summary = run(p)
            drift.append(abs(summary.final_price - 0.9))
            p1_err.append(abs(series.price[0] - p1_pred))
            steady.append(math.inf if summary.steady_period is None else summary.steady_period)
        tol = bound + 0.0005
        over = sum(d >= tol for d in drift)
        good = over == 0 and max(p1_err) < 0.0005 and max(steady) <= horizon
        ok &= good
        parts.append(
            f"gamma={gamma}: max|Pinf-P0|={max(drift):.5f} (limit {tol:.4f}, {over}/{seeds} over), "
            f"max|P1-pred|={max(p1_err):.5f}, steady by t={max(steady)} (limit {horizon:.1f})"
        )
    return Criterion("A2", "adaptive long-run bound", ok, "; ".join(parts), runs)


def check_a3(seeds: int = 20) -> Criterion:
    runs, parts, ok = [], [], True
    t = np.arange(10, 101)
    for p0 in (0.6, 0.8):
        ps = [Params(alpha=0.0, sigma=0.0005, gamma=1.0, p0=p0, n_agents=1000, seed=s, **NO_EXIT) for s in range(seeds)]
        runs += ps
        mean_path = np.mean([run(p)[0].prices_with_initial for p in ps], axis=0)
        f_path = np.array(_an.iterate_f(p0, 30))
        dev = float(np.max(np.abs(mean_path[:31] - f_path)))
        prod = t * np.abs(mean_path[10:101] - 0.5)
        ratio = float(prod.max() / prod.min())
        good = dev < 0.01 and ratio <= 2.0
        ok &= good
        parts.append(f"P0={p0}: max|P-f^t|={dev:.4f} (<0.01), t|P-1/2| in [{prod.min():.3f}, {prod.max():.3f}] "
                     f"ratio {ratio:.2f} (<=2)")  # fmt: skip
    return Criterion("A3", "large-bias price map", ok, "; ".join(parts), runs)


def check_a4(seeds: int = 10) -> Criterion:
    runs = [Params(alpha=0.0, sigma=1.0, gamma=1.0, cost=0.005, seed=s, **NO_EXIT) for s in range(seeds)]
    slopes, stops = [], []
    for p in runs:
        series, _ = run(p)
        slopes.append(measure_dispersion_slope(series))
        stops.append(series.activity_stop_period())
    ok = all(abs(s + 0.5) <= 0.1 for s in slopes) and all(st is not None and abs(st - 13) <= 3 for st in stops)
    detail = (f"slopes [{min(slopes):.3f}, {max(slopes):.3f}] (target -0.5+-0.1), "
              f"activity stops at {sorted(set(stops))} (13+-3; predicted {_an.stop_time(0.005, 1.0):.2f})")  # fmt: skip
    return Criterion("A4", "full-revision dispersion law", ok, detail, runs)


def check_a5(seeds: int = 5) -> Criterion:
    runs, parts, ok = [], [], True
    for gamma in (0.4, 0.6, 0.8):
        ps = [Params(alpha=0.0, sigma=1.0, gamma=gamma, seed=s, **NO_EXIT) for s in range(seeds)]
        runs += ps
        rate = -float(np.mean([measure_dispersion_slope(run(p)[0]) for p in ps]))
        lo, hi = _an.Q_FIT.envelope(gamma)
        good = lo - 0.05 <= rate <= hi + 0.05
        ok &= good
        parts.append(f"gamma={gamma}: rate {rate:.3f} vs q={_an.Q_FIT(gamma):.3f} [{lo - 0.05:.3f}, {hi + 0.05:.3f}]")
    return Criterion("A5", "partial-revision dispersion exponent", ok, "; ".join(parts), runs)


def check_a6() -> Criterion:
    runs = [Params(alpha=0.0, sigma=s, gamma=g, seed=7, **NO_EXIT) for s in (0.05, 0.3, 1.0) for g in (0.2, 0.5, 0.8, 1.0)]
    worst = 0.0
    for p in runs:
        series, _ = run(p)
        start = init_market(p, _rng.RandomStream(p.seed)).expectations.mean()
        means = np.concatenate([[start], series.mean_expectation])
        worst = max(worst, float(np.max(np.abs(np.diff(means)))))
    ok = worst <= 1e-12
    return Criterion("A6", "mean expectation conserved at alpha=0", ok,
                     f"{len(runs)} runs, max per-period change {worst:.2e} (<=1e-12)", runs)  # fmt: skip


# ---------------------------------------------------------------- A7


def random_population(rng: np.random.Generator, n: int) -> np.ndarray:
    kind = rng.integers(5)
    if kind == 0:
        return rng.random(n)
    if kind == 1:
        return np.round(rng.random(n), 2)
    if kind == 2:
        return np.clip(rng.uniform(0.2, 0.8) + 0.01 * rng.standard_normal(n), 0.0, 1.0)
    if kind == 3:
        return np.where(rng.random(n) < 0.6, np.round(rng.random(), 3), rng.random(n))
    return rng.choice(np.array([0.0, 1.0, 0.005, 0.995, 0.5, 0.01, 0.3]), n)


def random_small_params(rng: np.random.Generator) -> Params:
    w0 = float(rng.uniform(0.2, 2.0))
    return Params(
        n_agents=int(rng.integers(1, 51)),
        alpha=float(rng.choice([0.0, 1.0, rng.random()])),
        sigma=float(rng.choice([0.0, 1.0, rng.random()])),
        gamma=float(rng.choice([0.0, 1.0, rng.random()])),
        cost=float(rng.choice([0.005, rng.uniform(0.001, 0.2)])),
        p0=float(rng.random()),
        w0=w0,
        l0=float(rng.uniform(0.05, 1.0) * w0),
        seed=int(rng.integers(2**63)),
        pairing=str(rng.choice(["revisers", "anyone"])),
    )


def replay_mismatch(p: Params, periods: int = 20) -> str | None:
    """Run ``periods`` production steps and replay each through the naive step."""
    stream = _rng.RandomStream(p.seed)
    state = init_market(p, stream)
    for t in range(periods):
        stream.start_recording()
        fast, _ = step(state, p, stream)
        replay = _rng.ReplayStream(stream.stop_recording())
        try:
            slow = naive_step(state, p, replay)
        except _rng.TranscriptExhausted as exc:
            return f"period {t + 1}: {exc}"
        if replay.unused():
            return f"period {t + 1}: unused draws {replay.unused()}"
        if not fast.same_as(slow):
            return f"period {t + 1}: states differ"
        state = fast
    return None


def check_a7(n_clearing: int = 1000, n_steps: int = 200, seed: int = 20240607) -> Criterion:
    rng = np.random.default_rng(seed)
    clearing_bad = 0
    for _ in range(n_clearing):
        e = random_population(rng, int(rng.integers(1, 201)))
        c = float(rng.choice([0.005, 0.01, rng.uniform(0.0005, 0.5)]))
        if clearing_price(e, c) != brute_clearing(e, c):
            clearing_bad += 1
    step_bad = []
    for _ in range(n_steps):
        p = random_small_params(rng)
        why = replay_mismatch(p)
        if why:
            step_bad.append(f"{p}: {why}")
    ok = clearing_bad == 0 and not step_bad
    detail = (f"clearing {n_clearing - clearing_bad}/{n_clearing} identical; "
              f"step {n_steps - len(step_bad)}/{n_steps} instances identical over 20 periods")  # fmt: skip
    if step_bad:
        detail += f"; first mismatch {step_bad[0]}"
    return Criterion("A7", "oracle equivalence", ok, detail)


# ---------------------------------------------------------------- A8


def wealth_residual(p: Params) -> tuple[float, int]:
    """Largest per-period gap in the aggregate wealth identity, and total exits seen."""
    stream = _rng.RandomStream(p.seed)
    state = init_market(p, stream)
    worst, exits = 0.0, 0
    for _ in range(p.max_steps):
        new, rec = step(state, p, stream)
        change = math.fsum(new.wealth - state.wealth)
        expected = -p.cost * rec.order_placers + rec.exits * p.w0 - rec.exited_wealth
        worst = max(worst, abs(change - expected))
        exits += rec.exits
        state = new
    return worst, exits


def check_a8(runs: list[Params]) -> Criterion:
    # the analytic runs never exit, so add default-endowment runs to exercise respawns
    extra = [Params(alpha=a, sigma=s, gamma=g, seed=3) for a, s, g in ((0.0, 0.0, 0.2), (0.3, 0.6, 0.5), (0.05, 1.0, 0.8))]
    unique = list(dict.fromkeys(runs + extra))
    worst, exits = 0.0, 0
    for p in unique:
        w, x = wealth_residual(p)
        worst, exits = max(worst, w), exits + x
    ok = worst <= 1e-10
    return Criterion("A8", "wealth accounting", ok,
                     f"{len(unique)} runs, {exits} exits, max residual {worst:.2e} (<=1e-10)")  # fmt: skip


# ---------------------------------------------------------------- A9


def default_sweep_spec() -> SweepSpec:
    return SweepSpec(base_params=Params(p0=0.9))


def check_a9(grid=None, progress: Callable[[int, int], None] | None = None) -> Criterion:
    if grid is None:
        grid = run_sweep(default_sweep_spec(), progress=progress)
    rep = nonmonotonicity_report(grid, delta=0.02)
    i = bool(rep.alpha_dip_sigmas.get(0.2))
    ii = rep.extent_non_increasing
    iii = all(rep.sigma_dip.get(g, (None, None))[1] is not None for g in HIGHLIGHT_ALPHA)
    iv = rep.opposite_slopes
    flags = f"(i) {i}, (ii) {ii}, (iii) {iii}, (iv) {iv}"
    return Criterion("A9", "qualitative surfaces", i and ii and iii and iv, flags + " | " + " | ".join(rep.lines()[1:]))


# ---------------------------------------------------------------- A10


def check_a10() -> Criterion:
    from .cli import main

    problems = []
    old = os.environ.get("BIASMARKET_WORKERS")
    try:
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            jobs = [
                ("simulate", ["--set", "alpha=0.3", "--set", "seed=11"], ["timeseries.csv", "summary.csv"]),
                ("analytic", ["--set", "gamma=0.6"], ["analytic.csv"]),
                ("sweep", ["--set", "step=0.5", "--set", "replications=2", "--set", "n_agents=60",
                           "--set", "max_steps=30", "--set", "gammas=0.2,0.8"],
                 ["sweep_long.csv", "sweep_aggregate.csv", "patterns.txt"]),
            ]  # fmt: skip
            for cmd, flags, files in jobs:
                os.environ["BIASMARKET_WORKERS"] = "1"
                first = tmp / f"{cmd}-a"
                if main([cmd, *flags, "--out", str(first)]) != 0:
                    problems.append(f"{cmd} failed")
                    continue
                for workers in ("1", "2"):
                    os.environ["BIASMARKET_WORKERS"] = workers
                    again = tmp / f"{cmd}-w{workers}"
                    code = main([cmd, "--manifest", str(first / "manifest.json"), "--out", str(again)])
                    same = all((first / f).read_bytes() == (again / f).read_bytes() for f in files)
                    if code != 0 or not same:
                        problems.append(f"{cmd} rerun with {workers} worker(s) differs")
    finally:
        if old is None:
            os.environ.pop("BIASMARKET_WORKERS", None)
        else:
            os.environ["BIASMARKET_WORKERS"] = old
    ok = not problems
    return Criterion("A10", "determinism under manifest rerun", ok,
                     "simulate, analytic, sweep reruns byte-identical at 1 and 2 workers" if ok else "; ".join(problems))  # fmt: skip


# ---------------------------------------------------------------- driver

ORDER = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10")


def run_all(skip=frozenset(), only=None, echo: Callable[[str], None] | None = None) -> list[Criterion]:
    selected = [c for c in ORDER if c not in skip and (only is None or c in only)]
    results: list[Criterion] = []
    runs: list[Params] = []
    checks = {
        "A1": check_a1, "A2": check_a2, "A3": check_a3, "A4": check_a4, "A5": check_a5, "A6": check_a6,
        "A7": check_a7,
        "A8": lambda: check_a8(runs or _series_runs()),
        "A9": lambda: check_a9(progress=_stderr_progress),
        "A10": check_a10,
    }  # fmt: skip
    for ident in selected:
        res = checks[ident]()
        runs += res.runs
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results


def _series_runs() -> list[Params]:
    out: list[Params] = []
    for check in (check_a1, check_a2, check_a3, check_a4, check_a5, check_a6):
        out += check().runs
    return out


def _stderr_progress(done: int, total: int) -> None:
    print(f"\rA9 sweep: {done}/{total} rows", end="" if done < total else "\n", file=sys.stderr, flush=True)
