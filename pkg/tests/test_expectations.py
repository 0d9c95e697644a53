import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biasmarket.expectations import apply_round, pair_revisers, revise_pair, select_revisers
from biasmarket.rng import RandomStream

unit = st.floats(0.0, 1.0)


def _round(e, gamma, seed, mode="revisers"):
    rng = RandomStream(seed)
    idx = select_revisers(len(e), gamma, rng)
    return idx, pair_revisers(idx, len(e), rng, mode)


def test_revise_pair_examples():
    # far apart: each keeps its own view before anchoring
    a, b = revise_pair(0.2, 0.8, 0.5, 0.5, 0.3)
    assert (a, b) == pytest.approx((0.35, 0.65))
    # close: both use the average
    a, b = revise_pair(0.4, 0.5, 0.9, 0.5, 0.3)
    assert a == b == pytest.approx(0.675)
    # gap exactly at the bound counts as far
    assert revise_pair(0.25, 0.75, 0.0, 0.0, 0.5) == (0.25, 0.75)


@given(unit, unit, unit, unit, unit)
def test_revise_pair_stays_in_unit_interval(ei, ej, p, a, s):
    ni, nj = revise_pair(ei, ej, p, a, s)
    assert 0.0 <= ni <= 1.0 and 0.0 <= nj <= 1.0


@pytest.mark.parametrize("n, gamma, k", [(1000, 0.5, 500), (5, 0.5, 3), (7, 0.0, 0), (7, 1.0, 7), (10, 0.25, 3)])
def test_reviser_count(n, gamma, k):
    idx = select_revisers(n, gamma, RandomStream(2))
    assert idx.size == k and len(set(idx.tolist())) == k
    assert np.all(np.diff(idx) > 0)


def test_pairs_cover_revisers_once():
    idx, rnd = _round(np.zeros(101), 0.5, 4)
    assert idx.size == 51
    flat = rnd.pairs.ravel().tolist()
    assert len(flat) == 50 and len(set(flat)) == 50
    assert rnd.leftover is not None and rnd.leftover not in flat
    assert rnd.partner is not None and rnd.partner not in idx


@given(st.lists(unit, min_size=2, max_size=80).filter(lambda v: len(v) % 2 == 0), st.integers(0, 10**9))
def test_sigma_one_alpha_zero_conserves_mean_for_even_counts(values, seed):
    e = np.array(values)
    idx, rnd = _round(e, 1.0, seed)
    out = apply_round(e, rnd, 0.3, 0.0, 1.0 + 1e-12)
    assert math.fsum(out) == pytest.approx(math.fsum(e), abs=1e-12)


@given(st.lists(unit, min_size=1, max_size=80), unit, unit, st.integers(0, 10**9))
def test_revised_values_stay_in_unit_interval(values, price, alpha, seed):
    e = np.array(values)
    _, rnd = _round(e, 0.5, seed)
    out = apply_round(e, rnd, price, alpha, 0.4)
    assert np.all((0.0 <= out) & (out <= 1.0))


def test_sigma_zero_keeps_own_value():
    e = np.random.default_rng(0).random(40)
    idx, rnd = _round(e, 0.5, 1)
    out = apply_round(e, rnd, 0.7, 0.3, 0.0)
    expected = e.copy()
    expected[idx] = 0.3 * 0.7 + 0.7 * e[idx]
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)


def test_alpha_one_jumps_to_price():
    e = np.random.default_rng(1).random(40)
    idx, rnd = _round(e, 0.5, 2)
    out = apply_round(e, rnd, 0.42, 1.0, 0.5)
    assert np.all(out[idx] == 0.42)
    others = np.setdiff1d(np.arange(40), idx)
    np.testing.assert_array_equal(out[others], e[others])


def test_odd_leftover_changes_only_itself():
    e = np.linspace(0.1, 0.9, 9)
    idx, rnd = _round(e, 1 / 3, 5)
    assert idx.size == 3 and rnd.leftover is not None
    out = apply_round(e, rnd, 0.5, 0.0, 1.0)
    left, partner = rnd.leftover, rnd.partner
    assert out[left] == pytest.approx(0.5 * (e[left] + e[partner]))
    assert out[partner] == e[partner]


def test_anyone_mode_partners_are_read_only():
    e = np.random.default_rng(3).random(30)
    idx, rnd = _round(e, 0.3, 6, mode="anyone")
    assert rnd.partners is not None and np.all(rnd.partners != idx)
    out = apply_round(e, rnd, 0.5, 0.0, 1.0)
    untouched = np.setdiff1d(np.arange(30), idx)
    np.testing.assert_array_equal(out[untouched], e[untouched])


def test_input_not_mutated():
    e = np.random.default_rng(4).random(10)
    copy = e.copy()
    _, rnd = _round(e, 1.0, 0)
    apply_round(e, rnd, 0.5, 0.5, 0.5)
    np.testing.assert_array_equal(e, copy)
