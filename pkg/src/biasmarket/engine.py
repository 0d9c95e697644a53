"""Per-period loop, steady-state detection and run metrics.

Period order: revision against P_t, classification against P_t, clearing
price from the revised expectations, excess demand at P_t, price update,
settlement, exits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng as _rng
from .expectations import MODES, pair_kernel, pairing_draws, revise_kernel, select_kernel
from .market import (
    MarketState,
    classify_kernel,
    clearing_kernel,
    exits_kernel,
    price_step_kernel,
    settle_kernel,
)
from .params import Params

COLUMNS = (
    "period",
    "price",
    "p_star",
    "beta",
    "trades",
    "dispersion",
    "exits",
    "mean_expectation",
    "buyers",
    "sellers",
    "total_wealth",
    "exited_wealth",
)
CSV_COLUMNS = COLUMNS[:8]
_INT_COLUMNS = {"period", "trades", "exits", "buyers", "sellers"}
_COL = {name: i for i, name in enumerate(COLUMNS)}


@dataclass(frozen=True)
class StepRecord:
    period: int
    price: float
    p_star: float
    beta: float
    trades: int
    dispersion: float
    exits: int
    mean_expectation: float
    buyers: int
    sellers: int
    total_wealth: float
    exited_wealth: float

    @property
    def order_placers(self) -> int:
        return self.buyers + self.sellers


@dataclass(frozen=True)
class RunSummary:
    final_price: float
    steady_period: int | None
    inefficiency: float
    volatility: float
    exits_total: int
    stopped_early: bool


class TimeSeries:
    """Column store of step records for one run."""

    def __init__(self, params: Params, table: np.ndarray, initial: MarketState) -> None:
        self.params = params
        self.table = table
        self.initial_price = initial.price
        self.initial_dispersion = float(np.ptp(initial.expectations))
        self.initial_wealth = float(initial.wealth.sum())

    def __len__(self) -> int:
        return self.table.shape[0]

    def column(self, name: str) -> np.ndarray:
        col = self.table[:, _COL[name]]
        return col.astype(np.int64) if name in _INT_COLUMNS else col

    def __getattr__(self, name: str) -> np.ndarray:
        if name in _COL:
            return self.column(name)
        raise AttributeError(name)

    @property
    def records(self) -> list[StepRecord]:
        return [_record(row) for row in self.table]

    @property
    def prices_with_initial(self) -> np.ndarray:
        return np.concatenate([[self.initial_price], self.column("price")])

    def activity_stop_period(self) -> int | None:
        """First period from which no trade ever executes again."""
        trades = self.column("trades")
        active = np.flatnonzero(trades > 0)
        if active.size == 0:
            return int(self.column("period")[0]) if len(self) else None
        last = active[-1]
        return int(self.column("period")[last + 1]) if last + 1 < len(self) else None


def _record(row: np.ndarray) -> StepRecord:
    vals = {name: (int(row[i]) if name in _INT_COLUMNS else float(row[i])) for i, name in enumerate(COLUMNS)}
    return StepRecord(**vals)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def step_kernel(
    e, w, l, price, k, mode, alpha, sigma, cost, w0, l0,
    sel, sel_pos, pair, pair_pos, rat, rat_pos, resp, resp_pos,
    rec, mask, order, partner_of, roles, matched,
):  # fmt: skip
    n = e.size
    sel_pos = select_kernel(n, k, sel, sel_pos, mask)
    pair_pos, _ = pair_kernel(mask, k, mode, pair, pair_pos, order, partner_of)
    revise_kernel(e, mask, partner_of, price, alpha, sigma)

    nb, ns = classify_kernel(e, price, cost, roles)
    p_star = clearing_kernel(e, cost)
    beta = abs(nb - ns) / n
    new_price = price_step_kernel(price, p_star, beta)

    lo = e[0]
    hi = e[0]
    tot = 0.0
    for i in range(n):
        v = e[i]
        lo = min(lo, v)
        hi = max(hi, v)
        tot += v

    trades, rat_pos = settle_kernel(roles, nb, ns, price, new_price, cost, w, l, matched, rat, rat_pos)
    exits, lost, resp_pos = exits_kernel(e, w, l, w0, l0, resp, resp_pos)

    rec[1] = new_price
    rec[2] = p_star
    rec[3] = beta
    rec[4] = trades
    rec[5] = hi - lo
    rec[6] = exits
    rec[7] = tot / n
    rec[8] = nb
    rec[9] = ns
    rec[10] = w.sum()
    rec[11] = lost
    return new_price, sel_pos, pair_pos, rat_pos, resp_pos


@njit(cache=True)
def run_kernel(
    e, w, l, price, period, t_end, k, mode, alpha, sigma, cost, w0, l0,
    sel, sel_pos, pair, pair_pos, rat, rat_pos, resp, resp_pos, need_pair, table, row,
):  # fmt: skip
    """Advance until t_end or until a draw buffer might not cover a full period."""
    n = e.size
    mask = np.empty(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    partner_of = np.empty(n, dtype=np.int64)
    roles = np.empty(n, dtype=np.int8)
    matched = np.empty(n, dtype=np.bool_)
    while period < t_end:
        if (
            sel.size - sel_pos < k
            or pair.size - pair_pos < need_pair
            or rat.size - rat_pos < n // 2
            or resp.size - resp_pos < n
        ):
            break
        rec = table[row]
        price, sel_pos, pair_pos, rat_pos, resp_pos = step_kernel(
            e, w, l, price, k, mode, alpha, sigma, cost, w0, l0,
            sel, sel_pos, pair, pair_pos, rat, rat_pos, resp, resp_pos,
            rec, mask, order, partner_of, roles, matched,
        )  # fmt: skip
        period += 1
        rec[0] = period
        row += 1
    return price, period, row, sel_pos, pair_pos, rat_pos, resp_pos


# ---------------------------------------------------------------- public API


def init_market(params: Params, rng: _rng.RandomStream) -> MarketState:
    n = params.n_agents
    e = rng.uniforms(_rng.INITIAL, n)
    return MarketState(e, np.full(n, params.w0), np.full(n, params.l0), float(params.p0))


def _advance(state: MarketState, params: Params, rng: _rng.RandomStream, steps: int, table: np.ndarray) -> None:
    """Run ``steps`` periods in place, filling ``table`` rows."""
    n, k = params.n_agents, params.n_revisers
    mode = MODES[params.pairing]
    need_pair = pairing_draws(n, k, params.pairing)
    t_end = state.period + steps
    row = 0
    while state.period < t_end:
        left = t_end - state.period
        rng.reserve(_rng.REVISER_SELECTION, k * left)
        rng.reserve(_rng.PAIRING, need_pair * left)
        rng.reserve(_rng.RATIONING, n // 2 + _rng.CHUNK)
        rng.reserve(_rng.RESPAWN, n + _rng.CHUNK)
        bufs = [rng.buffer(lab) for lab in _rng.STEP_LABELS]
        exits_before = int(table[:row, _COL["exits"]].sum())
        price, period, row, *cursors = run_kernel(
            state.expectations, state.wealth, state.liquidity, state.price, state.period, t_end,
            k, mode, params.alpha, params.sigma, params.cost, params.w0, params.l0,
            bufs[0][0], bufs[0][1], bufs[1][0], bufs[1][1], bufs[2][0], bufs[2][1], bufs[3][0], bufs[3][1],
            need_pair, table, row,
        )  # fmt: skip
        for lab, cur in zip(_rng.STEP_LABELS, cursors):
            rng.advance(lab, int(cur))
        state.price = float(price)
        state.period = int(period)
        state.exits_total += int(table[:row, _COL["exits"]].sum()) - exits_before


def step(state: MarketState, params: Params, rng: _rng.RandomStream) -> tuple[MarketState, StepRecord]:
    """One period on a copy of ``state``."""
    new = state.copy()
    table = np.zeros((1, len(COLUMNS)))
    _advance(new, params, rng, 1, table)
    return new, _record(table[0])


def volatility_window(max_steps: int) -> int:
    """Number of trailing recorded prices covering the last 90% of the run."""
    return -(-9 * max_steps // 10)


def _summary(params: Params, prices: np.ndarray, table: np.ndarray) -> RunSummary:
    final = float(prices[-1])
    jumps = np.abs(np.diff(prices))
    steady = np.flatnonzero(jumps < params.steady_tol)
    window = volatility_window(params.max_steps)
    tail = prices[1:][-window:]
    last = table[-1]
    return RunSummary(
        final_price=final,
        steady_period=int(steady[0]) if steady.size else None,
        inefficiency=abs(final - params.fundamental),
        # shifting by the first value keeps a constant window at exactly 0
        volatility=float(np.std(tail - tail[0])),
        exits_total=int(table[:, _COL["exits"]].sum()),
        stopped_early=bool(last[_COL["buyers"]] + last[_COL["sellers"]] == 0),
    )


def run(params: Params) -> tuple[TimeSeries, RunSummary]:
    rng = _rng.RandomStream(params.seed)
    state = init_market(params, rng)
    initial = state.copy()
    table = np.zeros((params.max_steps, len(COLUMNS)))
    _advance(state, params, rng, params.max_steps, table)
    series = TimeSeries(params, table, initial)
    return series, _summary(params, series.prices_with_initial, table)


def run_summary(params: Params) -> RunSummary:
    return run(params)[1]


def measure_dispersion_slope(series: TimeSeries, floor: float | None = None) -> float:
    """Least-squares slope of log2(dispersion) against period.

    The window starts at the initial population and ends before the first
    period whose dispersion drops below ``floor`` (default 2 * cost, where
    trading stops).
    """
    floor = 2.0 * series.params.cost if floor is None else floor
    if series.initial_dispersion < floor:
        raise ValueError("dispersion already below the trading band at t=0")
    t = np.concatenate([[0], series.column("period")])
    d = np.concatenate([[series.initial_dispersion], series.column("dispersion")])
    below = np.flatnonzero(d < floor)
    end = below[0] if below.size else d.size
    if end < 5 or np.any(d[:end] <= 0.0):
        raise ValueError("need at least 5 periods of positive dispersion above the floor")
    slope, _ = np.polyfit(t[:end], np.log2(d[:end]), 1)
    return float(slope)

