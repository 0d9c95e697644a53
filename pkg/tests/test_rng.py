import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biasmarket import rng as R


def test_pick_bounds():
    assert R.pick(0.0, 5) == 0
    assert R.pick(0.9999999999, 5) == 4
    assert R.pick(1.0, 5) == 4


@given(st.integers(0, 2**63), st.lists(st.integers(1, 5000), min_size=1, max_size=8))
def test_chunking_does_not_change_values(seed, sizes):
    a = R.RandomStream(seed)
    b = R.RandomStream(seed)
    pieces = np.concatenate([a.uniforms(R.PAIRING, n) for n in sizes])
    whole = b.uniforms(R.PAIRING, sum(sizes))
    np.testing.assert_array_equal(pieces, whole)


def test_labels_are_independent():
    a = R.RandomStream(9)
    b = R.RandomStream(9)
    b.uniforms(R.RATIONING, 10_000)
    np.testing.assert_array_equal(a.uniforms(R.PAIRING, 50), b.uniforms(R.PAIRING, 50))
    assert not np.array_equal(R.RandomStream(9).uniforms(R.PAIRING, 5), R.RandomStream(9).uniforms(R.RATIONING, 5))


def test_values_in_unit_interval():
    u = R.RandomStream(1).uniforms(R.RESPAWN, 20_000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_replay_reproduces_recording_in_any_label_order():
    s = R.RandomStream(3)
    s.start_recording()
    a = s.uniforms(R.PAIRING, 7)
    b = s.uniforms(R.RATIONING, 3)
    c = s.uniforms(R.PAIRING, 2)
    transcript = s.stop_recording()
    rep = R.ReplayStream(transcript)
    np.testing.assert_array_equal(rep.uniforms(R.RATIONING, 3), b)
    np.testing.assert_array_equal(rep.uniforms(R.PAIRING, 9), np.concatenate([a, c]))
    assert rep.unused() == {}


def test_replay_exhaustion():
    rep = R.ReplayStream([(R.PAIRING, np.array([0.1, 0.2]))])
    assert rep.uniform(R.PAIRING) == 0.1
    assert rep.unused() == {R.PAIRING: 1}
    with pytest.raises(R.TranscriptExhausted):
        rep.uniforms(R.PAIRING, 2)
    with pytest.raises(R.TranscriptExhausted):
        rep.uniform(R.RESPAWN)


def test_invalid_cursor_move():
    s = R.RandomStream(0)
    s.reserve(R.PAIRING, 4)
    with pytest.raises(ValueError):
        s.advance(R.PAIRING, -1)
