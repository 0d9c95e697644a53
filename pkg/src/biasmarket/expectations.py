"""Expectation revision: who revises, whom they meet, and the update itself."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng as _rng
from .params import round_half_up

MODE_REVISERS = 0
MODE_ANYONE = 1
MODES = {"revisers": MODE_REVISERS, "anyone": MODE_ANYONE}


@dataclass
class RevisionRound:
    reviser_indices: np.ndarray
    pairs: np.ndarray  # shape (n_pairs, 2)
    leftover: int | None = None
    # read-only partner of the leftover (or of every reviser in "anyone" mode)
    partner: int | None = None
    partners: np.ndarray | None = field(default=None, repr=False)


@njit(cache=True)
def revise_pair(e_i, e_j, price, alpha, sigma):
    """Update a met pair. Both sides move toward each other only inside the confidence bound."""
    if abs(e_i - e_j) >= sigma:
        bi = e_i
        bj = e_j
    else:
        bi = 0.5 * (e_i + e_j)
        bj = bi
    ni = alpha * price + (1.0 - alpha) * bi
    nj = alpha * price + (1.0 - alpha) * bj
    return min(max(ni, 0.0), 1.0), min(max(nj, 0.0), 1.0)


@njit(cache=True)
def select_kernel(n, k, buf, pos, mask):
    """Partial Fisher-Yates over 0..n-1, one uniform per selected index."""
    idx = np.arange(n)
    for j in range(k):
        span = n - j
        r = int(buf[pos] * span)
        if r >= span:
            r = span - 1
        r += j
        pos += 1
        tmp = idx[j]
        idx[j] = idx[r]
        idx[r] = tmp
    for i in range(n):
        mask[i] = False
    for j in range(k):
        mask[idx[j]] = True
    return pos


@njit(cache=True)
def pair_kernel(mask, k, mode, buf, pos, order, partner_of):
    """Match revisers and fill ``partner_of`` (-1: no partner).

    ``order`` receives the shuffled revisers; consecutive entries are pairs.
    Returns (cursor, leftover or -1).
    """
    n = mask.size
    for i in range(n):
        partner_of[i] = -1
    j = 0
    for i in range(n):
        if mask[i]:
            order[j] = i
            j += 1
    if mode == 1:
        if n == 1:
            return pos, -1
        for j in range(k):
            i = order[j]
            r = int(buf[pos] * (n - 1))
            if r >= n - 1:
                r = n - 2
            pos += 1
            partner_of[i] = r + 1 if r >= i else r
        return pos, -1

    for j in range(k):
        span = k - j
        r = int(buf[pos] * span)
        if r >= span:
            r = span - 1
        r += j
        pos += 1
        tmp = order[j]
        order[j] = order[r]
        order[r] = tmp
    for j in range(0, k - 1, 2):
        partner_of[order[j]] = order[j + 1]
        partner_of[order[j + 1]] = order[j]
    leftover = -1
    if k % 2 == 1:
        leftover = order[k - 1]
        if n - k > 0:
            span = n - k
            r = int(buf[pos] * span)
            if r >= span:
                r = span - 1
            pos += 1
            c = -1
            for i in range(n):
                if not mask[i]:
                    c += 1
                    if c == r:
                        partner_of[leftover] = i
                        break
        elif k > 1:
            # everyone revises: meet one of the other revisers, read-only
            span = k - 1
            r = int(buf[pos] * span)
            if r >= span:
                r = span - 1
            pos += 1
            partner_of[leftover] = order[r]
    return pos, leftover


@njit(cache=True)
def revise_kernel(e, mask, partner_of, price, alpha, sigma):
    """Simultaneous update of every reviser from pre-revision values."""
    old = e.copy()
    for i in range(e.size):
        if not mask[i]:
            continue
        p = partner_of[i]
        if p < 0:
            e[i] = min(max(alpha * price + (1.0 - alpha) * old[i], 0.0), 1.0)
        else:
            e[i] = revise_pair(old[i], old[p], price, alpha, sigma)[0]


def pairing_draws(n_agents: int, k: int, mode: str = "revisers") -> int:
    if MODES[mode] == MODE_ANYONE:
        return k if n_agents > 1 else 0
    extra = 1 if k % 2 == 1 and (n_agents > k or k > 1) else 0
    return k + extra


def _buffer(rng, label: str, n: int):
    if isinstance(rng, _rng.RandomStream):
        rng.reserve(label, n)
        return rng.buffer(label)
    return np.asarray(rng.uniforms(label, n), dtype=float), 0


def _advance(rng, label: str, pos: int) -> None:
    if isinstance(rng, _rng.RandomStream):
        rng.advance(label, pos)


def select_revisers(n_agents: int, gamma: float, rng) -> np.ndarray:
    """Sorted indices of the round(gamma * n) agents revising this period."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma ∈ [0,1]")
    k = round_half_up(gamma * n_agents)
    buf, pos = _buffer(rng, _rng.REVISER_SELECTION, k)
    mask = np.empty(n_agents, dtype=np.bool_)
    _advance(rng, _rng.REVISER_SELECTION, select_kernel(n_agents, k, buf, pos, mask))
    return np.flatnonzero(mask)


def pair_revisers(indices, n_agents: int, rng, mode: str = "revisers") -> RevisionRound:
    indices = np.asarray(indices, dtype=np.int64)
    mask = np.zeros(n_agents, dtype=np.bool_)
    mask[indices] = True
    k = int(mask.sum())
    buf, pos = _buffer(rng, _rng.PAIRING, pairing_draws(n_agents, k, mode))
    order = np.empty(n_agents, dtype=np.int64)
    partner_of = np.empty(n_agents, dtype=np.int64)
    new_pos, leftover = pair_kernel(mask, k, MODES[mode], buf, pos, order, partner_of)
    _advance(rng, _rng.PAIRING, new_pos)
    revisers = np.flatnonzero(mask)
    if MODES[mode] == MODE_ANYONE:
        return RevisionRound(revisers, np.empty((0, 2), dtype=np.int64), partners=partner_of[revisers])
    n_pairs = k // 2
    pairs = order[: 2 * n_pairs].reshape(n_pairs, 2).copy()
    if leftover < 0:
        return RevisionRound(revisers, pairs)
    partner = int(partner_of[leftover])
    return RevisionRound(revisers, pairs, int(leftover), partner if partner >= 0 else None)


def apply_round(expectations, rnd: RevisionRound, price: float, alpha: float, sigma: float) -> np.ndarray:
    """Return revised expectations for a drawn round (input left untouched)."""
    e = np.array(expectations, dtype=np.float64)
    n = e.size
    mask = np.zeros(n, dtype=np.bool_)
    mask[rnd.reviser_indices] = True
    partner_of = np.full(n, -1, dtype=np.int64)
    if rnd.partners is not None:
        partner_of[rnd.reviser_indices] = rnd.partners
    else:
        partner_of[rnd.pairs[:, 0]] = rnd.pairs[:, 1]
        partner_of[rnd.pairs[:, 1]] = rnd.pairs[:, 0]
        if rnd.leftover is not None and rnd.partner is not None:
            partner_of[rnd.leftover] = rnd.partner
    revise_kernel(e, mask, partner_of, float(price), float(alpha), float(sigma))
    return e
