"""Slow reference implementations used to cross-check the compiled kernels.

Nothing here is shared with the production path except the parameter type,
the draw-to-choice convention (:func:`biasmarket.rng.pick`) and the state
container.
"""

from __future__ import annotations

import numpy as np

from . import rng as _rng
from .market import MarketState
from .params import Params, round_half_up


def _excess(buy_points, sell_points, x):
    n_b = 0
    for b in buy_points:
        if b > x:
            n_b += 1
    n_s = 0
    for s in sell_points:
        if s < x:
            n_s += 1
    return n_b - n_s


def brute_clearing(expectations, cost: float) -> float:
    """Clearing price by direct evaluation on every breakpoint and interval midpoint."""
    e = [float(v) for v in expectations]
    if not e:
        raise ValueError("expectations must be non-empty")
    buy_points = [v - cost for v in e]
    sell_points = [v + cost for v in e]
    grid = {0.0, 1.0}
    for b in buy_points + sell_points:
        if 0.0 < b < 1.0:
            grid.add(b)
    grid = sorted(grid)

    # (lo, hi, value) for every point and every open interval, left to right
    pieces = []
    for i, p in enumerate(grid):
        pieces.append((p, p, _excess(buy_points, sell_points, p)))
        if i + 1 < len(grid):
            q = grid[i + 1]
            mid = 0.5 * (p + q)
            if p < mid < q:
                value = _excess(buy_points, sell_points, mid)
            else:
                # no double strictly between p and q; count as for any x in (p, q)
                value = sum(1 for b in buy_points if b >= q) - sum(1 for s in sell_points if s <= p)
            pieces.append((p, q, value))

    solutions = []
    i = 0
    while i < len(pieces):
        if pieces[i][2] == 0:
            j = i
            while j + 1 < len(pieces) and pieces[j + 1][2] == 0:
                j += 1
            solutions.append(0.5 * (pieces[i][0] + pieces[j][1]))
            i = j + 1
            continue
        if i + 1 < len(pieces):
            a, b = pieces[i][2], pieces[i + 1][2]
            if (a > 0 and b < 0) or (a < 0 and b > 0):
                solutions.append(pieces[i + 1][0])
        i += 1

    if solutions:
        return sum(solutions) / len(solutions)
    if all(piece[2] > 0 for piece in pieces):
        return 1.0
    return 0.0


def _draw(stream, label: str, n: int) -> int:
    u = stream.uniform(label)
    return _rng.pick(u, n)


def _clip(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def naive_step(state: MarketState, params: Params, stream) -> MarketState:
    """One period, written out plainly, consuming draws from a replay stream."""
    n = state.n_agents
    price = state.price
    cost = params.cost
    alpha = params.alpha
    sigma = params.sigma
    e = [float(v) for v in state.expectations]
    w = [float(v) for v in state.wealth]
    liq = [float(v) for v in state.liquidity]

    # who revises
    k = round_half_up(params.gamma * n)
    idx = list(range(n))
    for j in range(k):
        r = j + _draw(stream, _rng.REVISER_SELECTION, n - j)
        idx[j], idx[r] = idx[r], idx[j]
    revisers = sorted(idx[:k])
    is_reviser = [False] * n
    for i in revisers:
        is_reviser[i] = True

    # whom they meet
    partner = {}
    if params.pairing == "anyone":
        if n > 1:
            for i in revisers:
                r = _draw(stream, _rng.PAIRING, n - 1)
                partner[i] = r + 1 if r >= i else r
    else:
        order = list(revisers)
        for j in range(k):
            r = j + _draw(stream, _rng.PAIRING, k - j)
            order[j], order[r] = order[r], order[j]
        for j in range(0, k - 1, 2):
            partner[order[j]] = order[j + 1]
            partner[order[j + 1]] = order[j]
        if k % 2 == 1:
            left = order[k - 1]
            outsiders = [i for i in range(n) if not is_reviser[i]]
            if outsiders:
                partner[left] = outsiders[_draw(stream, _rng.PAIRING, len(outsiders))]
            elif k > 1:
                partner[left] = order[_draw(stream, _rng.PAIRING, k - 1)]

    old = list(e)
    for i in revisers:
        if i in partner:
            mine, theirs = old[i], old[partner[i]]
            if abs(mine - theirs) >= sigma:
                base = mine
            else:
                base = 0.5 * (mine + theirs)
        else:
            base = old[i]
        e[i] = _clip(alpha * price + (1.0 - alpha) * base)

    # orders
    buyers = [i for i in range(n) if e[i] - cost > price]
    sellers = [i for i in range(n) if e[i] + cost < price]
    p_star = brute_clearing(e, cost)
    beta = abs(len(buyers) - len(sellers)) / n
    new_price = beta * p_star + (1.0 - beta) * price

    # settlement
    m = min(len(buyers), len(sellers))
    if len(buyers) > len(sellers):
        surplus, short = list(buyers), sellers
    else:
        surplus, short = list(sellers), buyers
    matched = set(short)
    if len(surplus) > m:
        for j in range(m):
            r = j + _draw(stream, _rng.RATIONING, len(surplus) - j)
            surplus[j], surplus[r] = surplus[r], surplus[j]
        matched.update(surplus[:m])
    else:
        matched.update(surplus)
    for i in buyers:
        if i in matched:
            w[i] = w[i] + ((new_price - price) - cost)
            liq[i] = liq[i] + (-price - cost)
        else:
            w[i] = w[i] - cost
            liq[i] = liq[i] - cost
    for i in sellers:
        if i in matched:
            w[i] = w[i] + ((price - new_price) - cost)
            liq[i] = liq[i] + (price - cost)
        else:
            w[i] = w[i] - cost
            liq[i] = liq[i] - cost

    # exits
    exits = 0
    for i in range(n):
        if liq[i] <= 0.0:
            e[i] = stream.uniform(_rng.RESPAWN)
            w[i] = params.w0
            liq[i] = params.l0
            exits += 1

    return MarketState(
        np.array(e), np.array(w), np.array(liq), float(new_price), state.period + 1, state.exits_total + exits
    )
