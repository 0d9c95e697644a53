import numpy as np
import pytest

from biasmarket.acceptance import random_population, random_small_params, replay_mismatch
from biasmarket.market import clearing_price
from biasmarket.oracle import brute_clearing, naive_step
from biasmarket.engine import init_market, step
from biasmarket.params import Params
from biasmarket import rng as R


@pytest.mark.parametrize(
    "e, c, expected",
    [
        ([0.2, 0.5, 0.8], 0.005, 0.5),
        ([0.7], 0.01, 0.7),
        ([0.0], 0.01, 0.005),
        ([1.0, 1.0], 0.1, 0.95),
        ([0.3, 0.7], 0.05, 0.5),
    ],
)
def test_brute_clearing_examples(e, c, expected):
    assert brute_clearing(e, c) == pytest.approx(expected, abs=1e-15)


def test_brute_clearing_rejects_empty():
    with pytest.raises(ValueError):
        brute_clearing([], 0.01)


def test_fast_and_brute_agree_on_mixed_populations():
    rng = np.random.default_rng(0)
    for _ in range(200):
        e = random_population(rng, int(rng.integers(1, 120)))
        c = float(rng.uniform(0.001, 0.3))
        assert clearing_price(e, c) == brute_clearing(e, c)


@pytest.mark.parametrize("seed", range(30))
def test_step_replays_through_naive_step(seed):
    p = random_small_params(np.random.default_rng(seed))
    assert replay_mismatch(p, periods=10) is None


def test_naive_step_detects_missing_draws():
    p = Params(n_agents=10, gamma=0.5, seed=1)
    stream = R.RandomStream(p.seed)
    state = init_market(p, stream)
    stream.start_recording()
    step(state, p, stream)
    transcript = [(lab, v) for lab, v in stream.stop_recording() if lab != R.PAIRING]
    with pytest.raises(R.TranscriptExhausted):
        naive_step(state, p, R.ReplayStream(transcript))
