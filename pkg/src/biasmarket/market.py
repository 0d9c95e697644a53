"""Market mechanism: participation, clearing, price adjustment, settlement, exits.

The compiled kernels here are shared by the public functions and by the
engine's per-period kernel, so there is exactly one production code path.

Participation uses the breakpoint forms ``e - cost > price`` (buyer) and
``e + cost < price`` (seller). These are the same comparisons the clearing
price search is built on, so a role and the step function that locates the
clearing price never disagree at a tie.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng as _rng
from .params import Params

BUYER = np.int8(1)
SELLER = np.int8(-1)
ABSTAIN = np.int8(0)


class Role(enum.IntEnum):
    SELLER = -1
    ABSTAIN = 0
    BUYER = 1


@dataclass
class Agent:
    expectation: float
    wealth: float
    liquidity: float


@dataclass
class MarketState:
    """Population stored column-wise; ``agents`` gives the per-agent view."""

    expectations: np.ndarray
    wealth: np.ndarray
    liquidity: np.ndarray
    price: float
    period: int = 0
    exits_total: int = 0

    @property
    def n_agents(self) -> int:
        return self.expectations.size

    @property
    def agents(self) -> list[Agent]:
        return [Agent(float(e), float(w), float(l)) for e, w, l in zip(self.expectations, self.wealth, self.liquidity)]

    def copy(self) -> "MarketState":
        return MarketState(
            self.expectations.copy(), self.wealth.copy(), self.liquidity.copy(), self.price, self.period, self.exits_total
        )

    def same_as(self, other: "MarketState") -> bool:
        """Bitwise equality of every field."""
        return (
            self.price == other.price
            and self.period == other.period
            and self.exits_total == other.exits_total
            and np.array_equal(self.expectations, other.expectations)
            and np.array_equal(self.wealth, other.wealth)
            and np.array_equal(self.liquidity, other.liquidity)
        )


@dataclass
class Settlement:
    d_wealth: np.ndarray
    d_liquidity: np.ndarray
    trades: int
    matched: np.ndarray = field(repr=False)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def classify_kernel(e, price, cost, roles):
    nb = 0
    ns = 0
    for i in range(e.size):
        if e[i] - cost > price:
            roles[i] = 1
            nb += 1
        elif e[i] + cost < price:
            roles[i] = -1
            ns += 1
        else:
            roles[i] = 0
    return nb, ns


@njit(cache=True)
def _kth_smallest(a, k):
    """Hoare-partition quickselect on scratch array ``a``.

    On return a[k] holds the k-th smallest value and everything right of
    index k is >= it.
    """
    lo = 0
    hi = a.size - 1
    while hi > lo:
        mid = (lo + hi) >> 1
        if a[mid] < a[lo]:
            a[mid], a[lo] = a[lo], a[mid]
        if a[hi] < a[lo]:
            a[hi], a[lo] = a[lo], a[hi]
        if a[hi] < a[mid]:
            a[hi], a[mid] = a[mid], a[hi]
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                a[i], a[j] = a[j], a[i]
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return a[k]


@njit(cache=True)
def clearing_kernel(e, cost):
    """Clearing price of a population.

    Excess demand n_B(x) - n_S(x) equals n far left and drops by exactly one
    at every buy breakpoint ``e - cost`` and every sell breakpoint
    ``e + cost``. Its zero set is therefore the gap between the n-th and
    (n+1)-th smallest of the 2n merged breakpoints, clipped to [0, 1]; the
    clearing price is the midpoint of that gap. With cost > 0 and every
    expectation in [0, 1] excess demand is >= 0 at 0 and <= 0 at 1, so the
    gap always meets the unit interval.
    """
    n = e.size
    pts = np.empty(2 * n)
    for i in range(n):
        pts[i] = e[i] - cost
        pts[n + i] = e[i] + cost
    lo = _kth_smallest(pts, n - 1)
    hi = pts[n]
    for i in range(n + 1, 2 * n):
        if pts[i] < hi:
            hi = pts[i]
    return 0.5 * (max(lo, 0.0) + min(hi, 1.0))


@njit(cache=True)
def price_step_kernel(price, p_star, beta):
    return beta * p_star + (1.0 - beta) * price


@njit(cache=True)
def settle_kernel(roles, nb, ns, price_now, price_next, cost, wealth, liquidity, matched, buf, pos):
    """Apply one period's trades in place. Returns (trades, new buffer cursor).

    The surplus side is rationed by a partial Fisher-Yates pass over its
    members in ascending index order, one ``rationing`` uniform per trade.
    """
    n = roles.size
    m = min(nb, ns)
    surplus_role = 1 if nb > ns else -1
    s = max(nb, ns)
    for i in range(n):
        matched[i] = roles[i] != 0 and roles[i] != surplus_role
    if s > m:
        members = np.empty(s, dtype=np.int64)
        j = 0
        for i in range(n):
            if roles[i] == surplus_role:
                members[j] = i
                j += 1
        for j in range(m):
            span = s - j
            r = int(buf[pos] * span)
            if r >= span:
                r = span - 1
            r += j
            pos += 1
            tmp = members[j]
            members[j] = members[r]
            members[r] = tmp
            matched[members[j]] = True
    else:
        for i in range(n):
            if roles[i] != 0:
                matched[i] = True

    seller_dw = (price_now - price_next) - cost
    seller_dl = price_now - cost
    buyer_dw = (price_next - price_now) - cost
    buyer_dl = -price_now - cost
    for i in range(n):
        r = roles[i]
        if r == 0:
            continue
        if not matched[i]:
            wealth[i] -= cost
            liquidity[i] -= cost
        elif r == 1:
            wealth[i] += buyer_dw
            liquidity[i] += buyer_dl
        else:
            wealth[i] += seller_dw
            liquidity[i] += seller_dl
    return m, pos


@njit(cache=True)
def exits_kernel(e, wealth, liquidity, w0, l0, buf, pos):
    """Replace every agent whose liquidity is exhausted. Returns (exits, exited wealth, cursor)."""
    exits = 0
    lost = 0.0
    for i in range(e.size):
        if liquidity[i] <= 0.0:
            lost += wealth[i]
            e[i] = buf[pos]
            pos += 1
            wealth[i] = w0
            liquidity[i] = l0
            exits += 1
    return exits, lost, pos


# ---------------------------------------------------------------- public API


def _as_expectations(expectations) -> np.ndarray:
    e = np.asarray(expectations, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise ValueError("expectations must be a non-empty 1-D sequence")
    if np.any((e < 0.0) | (e > 1.0)) or not np.all(np.isfinite(e)):
        raise ValueError("expectations must lie in [0,1]")
    return e


def classify(expectation: float, price: float, cost: float) -> Role:
    if expectation - cost > price:
        return Role.BUYER
    if expectation + cost < price:
        return Role.SELLER
    return Role.ABSTAIN


def classify_all(expectations, price: float, cost: float) -> tuple[np.ndarray, int, int]:
    e = np.asarray(expectations, dtype=np.float64)
    roles = np.empty(e.size, dtype=np.int8)
    nb, ns = classify_kernel(e, float(price), float(cost), roles)
    return roles, int(nb), int(ns)


def clearing_price(expectations, cost: float) -> float:
    """Price at which buy and sell orders balance.

    Zero intervals of the excess-demand step function contribute their
    midpoint, a jump across zero contributes the jump location. If excess
    demand keeps one sign over all of [0, 1] the price saturates at 1 (demand)
    or 0 (supply).
    """
    return float(clearing_kernel(_as_expectations(expectations), float(cost)))


def excess_fraction(expectations, price: float, cost: float) -> float:
    e = _as_expectations(expectations)
    _, nb, ns = classify_all(e, price, cost)
    return abs(nb - ns) / e.size


def price_step(price: float, p_star: float, beta: float) -> float:
    return float(price_step_kernel(float(price), float(p_star), float(beta)))


def settle_trades(roles, price_now: float, price_next: float, cost: float, rng) -> Settlement:
    roles = np.asarray(roles, dtype=np.int8)
    nb = int(np.count_nonzero(roles == BUYER))
    ns = int(np.count_nonzero(roles == SELLER))
    w = np.zeros(roles.size)
    l = np.zeros(roles.size)
    matched = np.zeros(roles.size, dtype=np.bool_)
    need = min(nb, ns) if nb != ns else 0
    if isinstance(rng, _rng.RandomStream):
        rng.reserve(_rng.RATIONING, need)
        buf, pos = rng.buffer(_rng.RATIONING)
    else:
        buf, pos = np.asarray(rng.uniforms(_rng.RATIONING, need), dtype=float), 0
    trades, new_pos = settle_kernel(roles, nb, ns, float(price_now), float(price_next), float(cost), w, l, matched, buf, pos)
    if isinstance(rng, _rng.RandomStream):
        rng.advance(_rng.RATIONING, new_pos)
    return Settlement(w, l, int(trades), matched)


def apply_exits(state: MarketState, params: Params, rng: _rng.RandomStream) -> tuple[MarketState, int]:
    """Replace exhausted agents in place; returns the state and this period's exit count."""
    rng.reserve(_rng.RESPAWN, state.n_agents)
    buf, pos = rng.buffer(_rng.RESPAWN)
    exits, _, new_pos = exits_kernel(state.expectations, state.wealth, state.liquidity, params.w0, params.l0, buf, pos)
    rng.advance(_rng.RESPAWN, new_pos)
    state.exits_total += int(exits)
    return state, int(exits)
