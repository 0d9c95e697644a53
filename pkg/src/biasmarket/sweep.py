"""(alpha, sigma) grid sweeps with replications, and pattern detection on the surfaces."""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .engine import run_summary
from .params import ConfigError, Params

WORKERS_ENV = "BIASMARKET_WORKERS"
DEFAULT_GAMMAS = (0.2, 0.5, 0.8)
# alpha whose sigma-profile is inspected for each revision fraction
HIGHLIGHT_ALPHA = {0.2: 0.25, 0.5: 0.1, 0.8: 0.05}

LONG_HEADER = ("gamma", "alpha", "sigma", "rep", "inefficiency", "volatility", "exits")
AGG_HEADER = ("gamma", "alpha", "sigma", "mean_inefficiency", "mean_volatility", "mean_exits")


def unit_grid(step: float) -> tuple[float, ...]:
    """Inclusive grid 0, step, ..., 1 with values rounded to kill float drift."""
    if not 0.0 < step <= 1.0:
        raise ConfigError("parameter out of range: step ∈ (0,1]")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ConfigError(f"step {step} does not divide [0,1]")
    return tuple(round(i / n, 12) for i in range(n + 1))


@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple[float, ...] = field(default_factory=lambda: unit_grid(0.01))
    sigmas: tuple[float, ...] = field(default_factory=lambda: unit_grid(0.01))
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    replications: int = 10
    base_params: Params = field(default_factory=lambda: Params(p0=0.9))
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError("parameter out of range: replications ≥ 1")
        for name in ("alphas", "sigmas", "gammas"):
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"{name} must be non-empty")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise ConfigError(f"parameter out of range: {name} ⊂ [0,1]")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("parameter out of range: master_seed ∈ [0, 2^64)")

    @classmethod
    def with_step(cls, step: float, **kwargs) -> "SweepSpec":
        grid = unit_grid(step)
        return cls(alphas=grid, sigmas=grid, **kwargs)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return len(self.gammas), len(self.alphas), len(self.sigmas), self.replications

    @property
    def n_runs(self) -> int:
        return math.prod(self.shape)


def child_seed(master_seed: int, gamma: float, alpha: float, sigma: float, rep: int) -> int:
    """Stable 64-bit seed for one replication of one cell."""
    key = f"{master_seed}|{gamma!r}|{alpha!r}|{sigma!r}|{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class GridCell:
    gamma: float
    alpha: float
    sigma: float
    inefficiency: np.ndarray
    volatility: np.ndarray
    exits: np.ndarray

    @property
    def mean_inefficiency(self) -> float:
        return float(np.mean(self.inefficiency))

    @property
    def mean_volatility(self) -> float:
        return float(np.mean(self.volatility))

    @property
    def mean_exits(self) -> float:
        return float(np.mean(self.exits))


@dataclass
class GridResult:
    """Per-replication metrics on a (gamma, alpha, sigma, rep) array."""

    spec: SweepSpec
    inefficiency: np.ndarray
    volatility: np.ndarray
    exits: np.ndarray

    def mean(self, metric: str = "inefficiency") -> np.ndarray:
        """Replication mean, shape (gamma, alpha, sigma)."""
        return getattr(self, metric).mean(axis=3)

    def surface(self, gamma: float, metric: str = "inefficiency") -> np.ndarray:
        """Mean surface for one gamma, indexed [alpha, sigma]."""
        return self.mean(metric)[self.spec.gammas.index(gamma)]

    def cell(self, gamma: float, alpha: float, sigma: float) -> GridCell:
        g = self.spec.gammas.index(gamma)
        a = self.spec.alphas.index(alpha)
        s = self.spec.sigmas.index(sigma)
        return GridCell(
            gamma, alpha, sigma, self.inefficiency[g, a, s], self.volatility[g, a, s], self.exits[g, a, s]
        )

    def cells(self) -> Iterator[GridCell]:
        """All cells, gamma-major, then alpha, then sigma."""
        for g in self.spec.gammas:
            for a in self.spec.alphas:
                for s in self.spec.sigmas:
                    yield self.cell(g, a, s)

    def write_long_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LONG_HEADER)
            for c in self.cells():
                for r in range(self.spec.replications):
                    w.writerow(
                        [_fmt(c.gamma), _fmt(c.alpha), _fmt(c.sigma), r,
                         _fmt(c.inefficiency[r]), _fmt(c.volatility[r]), int(c.exits[r])]
                    )  # fmt: skip

    def write_aggregate_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGG_HEADER)
            for c in self.cells():
                w.writerow(
                    [_fmt(c.gamma), _fmt(c.alpha), _fmt(c.sigma),
                     _fmt(c.mean_inefficiency), _fmt(c.mean_volatility), _fmt(c.mean_exits)]
                )  # fmt: skip


def _fmt(x: float) -> str:
    return "%.9g" % x


# ---------------------------------------------------------------- execution


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _run_row(task: tuple[SweepSpec, int, int]) -> tuple[int, int, np.ndarray]:
    """All sigmas and replications for one (gamma, alpha); returns (g, a, metrics[S, R, 3])."""
    spec, g, a = task
    gamma, alpha = spec.gammas[g], spec.alphas[a]
    out = np.empty((len(spec.sigmas), spec.replications, 3))
    base = spec.base_params
    for s, sigma in enumerate(spec.sigmas):
        for r in range(spec.replications):
            seed = child_seed(spec.master_seed, gamma, alpha, sigma, r)
            summary = run_summary(base.with_(gamma=gamma, alpha=alpha, sigma=sigma, seed=seed))
            out[s, r] = summary.inefficiency, summary.volatility, summary.exits_total
    return g, a, out


def run_sweep(
    spec: SweepSpec,
    workers: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> GridResult:
    """Run every replication of every cell; results do not depend on ``workers``."""
    workers = worker_count() if workers is None else workers
    n_g, n_a, n_s, n_r = spec.shape
    metrics = np.empty((n_g, n_a, n_s, n_r, 3))
    tasks = [(spec, g, a) for g in range(n_g) for a in range(n_a)]
    done = 0

    def collect(result):
        nonlocal done
        g, a, out = result
        metrics[g, a] = out
        done += 1
        if progress is not None:
            progress(done, len(tasks))

    if workers <= 1:
        for t in tasks:
            collect(_run_row(t))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_run_row, tasks):
                collect(result)
    return GridResult(spec, metrics[..., 0].copy(), metrics[..., 1].copy(), metrics[..., 2].copy())


# ---------------------------------------------------------------- patterns


def interior_minimum(profile, delta: float) -> int | None:
    """Index of the interior minimum if it sits at least ``delta`` below both ends."""
    y = np.asarray(profile, dtype=float)
    if y.size < 3:
        return None
    i = 1 + int(np.argmin(y[1:-1]))
    if y[i] <= y[0] - delta and y[i] <= y[-1] - delta:
        return i
    return None


def _slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


@dataclass
class PatternReport:
    delta: float
    # gamma -> sigmas whose alpha-profile has an interior minimum
    alpha_dip_sigmas: dict[float, list[float]]
    # gamma -> sigma-length covered by those rows
    alpha_dip_extent: dict[float, float]
    extent_non_increasing: bool
    # gamma -> (highlighted alpha, sigma at the interior minimum or None)
    sigma_dip: dict[float, tuple[float, float | None]]
    # (gamma, low alpha, high alpha, slope at low, slope at high) or None if not on the grid
    slope_contrast: tuple[float, float, float, float, float] | None

    @property
    def alpha_nonmonotone(self) -> dict[float, bool]:
        return {g: bool(s) for g, s in self.alpha_dip_sigmas.items()}

    @property
    def opposite_slopes(self) -> bool:
        if self.slope_contrast is None:
            return False
        _, _, _, lo, hi = self.slope_contrast
        return lo * hi < 0

    def lines(self) -> list[str]:
        out = [f"delta = {self.delta}"]
        for g, sig in self.alpha_dip_sigmas.items():
            span = f"sigma in [{min(sig):g}, {max(sig):g}]" if sig else "none"
            out.append(f"gamma={g:g}: interior minimum over alpha in {len(sig)} sigma rows ({span}); "
                       f"extent {self.alpha_dip_extent[g]:.3g}")  # fmt: skip
        out.append(f"alpha-dip extent non-increasing in gamma: {self.extent_non_increasing}")
        for g, (a, s) in self.sigma_dip.items():
            where = f"at sigma={s:g}" if s is not None else "not found"
            out.append(f"gamma={g:g}, alpha={a:g}: interior minimum over sigma {where}")
        if self.slope_contrast is not None:
            g, a_lo, a_hi, lo, hi = self.slope_contrast
            out.append(f"gamma={g:g}: inefficiency-sigma slope {lo:+.4f} at alpha={a_lo:g}, "
                       f"{hi:+.4f} at alpha={a_hi:g}; opposite signs: {self.opposite_slopes}")  # fmt: skip
        return out


def nonmonotonicity_report(
    grid: GridResult,
    delta: float = 0.02,
    highlight: dict[float, float] | None = None,
    slope_gamma: float = 0.2,
    slope_alphas: tuple[float, float] = (0.1, 0.3),
) -> PatternReport:
    """Scan the mean inefficiency surfaces for the qualitative shapes of interest."""
    spec = grid.spec
    highlight = HIGHLIGHT_ALPHA if highlight is None else highlight
    step = spec.sigmas[1] - spec.sigmas[0] if len(spec.sigmas) > 1 else 1.0

    dips: dict[float, list[float]] = {}
    extent: dict[float, float] = {}
    for g in spec.gammas:
        surf = grid.surface(g)
        rows = [s for j, s in enumerate(spec.sigmas) if interior_minimum(surf[:, j], delta) is not None]
        dips[g] = rows
        extent[g] = len(rows) * step
    ordered = [extent[g] for g in sorted(spec.gammas)]
    non_increasing = all(a >= b for a, b in zip(ordered, ordered[1:]))

    sigma_dip: dict[float, tuple[float, float | None]] = {}
    for g in spec.gammas:
        a = highlight.get(g)
        if a is None or a not in spec.alphas:
            continue
        i = interior_minimum(grid.surface(g)[spec.alphas.index(a)], delta)
        sigma_dip[g] = (a, spec.sigmas[i] if i is not None else None)

    contrast = None
    if slope_gamma in spec.gammas and all(a in spec.alphas for a in slope_alphas):
        surf = grid.surface(slope_gamma)
        lo_a, hi_a = slope_alphas
        contrast = (
            slope_gamma, lo_a, hi_a,
            _slope(spec.sigmas, surf[spec.alphas.index(lo_a)]),
            _slope(spec.sigmas, surf[spec.alphas.index(hi_a)]),
        )  # fmt: skip
    return PatternReport(delta, dips, extent, non_increasing, sigma_dip, contrast)
