import numpy as np
import pytest
from scipy.stats import norm

from spectra_auction.channel import BscChannel, Role, feedback, flip_matrix, stream


def test_noiseless_channel():
    ch = BscChannel(0.0, seed=1, user=0)
    assert all(ch.transmit(1, t) == 1 for t in range(1, 100))
    assert all(ch.transmit(0, t) == 0 for t in range(1, 100))


def test_deterministic_per_key():
    a = BscChannel(0.1, seed=7, user=3)
    b = BscChannel(0.1, seed=7, user=3)
    outs = {a.transmit(1, 12) for _ in range(5)}
    assert len(outs) == 1
    # order of access does not matter
    assert b.transmit(1, 12) == a.transmit(1, 12)
    assert np.array_equal(a.flips(500), b.flips(500))


def test_streams_differ_by_user_role_and_sub():
    base = BscChannel(0.3, 5, 0).flips(2000)
    assert not np.array_equal(base, BscChannel(0.3, 5, 1).flips(2000))
    assert not np.array_equal(base, BscChannel(0.3, 5, 0, sub=1).flips(2000))
    assert not np.array_equal(stream(5, 0, Role.BID).random(5), stream(5, 0, Role.DRIFT).random(5))


def test_flip_rate_within_three_sigma():
    p = 0.5 - 1e-3
    flips = BscChannel(p, 11, 2).flips(10**6)
    sigma = np.sqrt(p * (1 - p) / flips.size)
    assert abs(flips.mean() - p) < 3 * sigma


def test_runs_test_independence():
    flips = BscChannel(0.1, 3, 4).flips(10**5).astype(int)
    n1 = flips.sum()
    n0 = flips.size - n1
    runs = 1 + np.count_nonzero(np.diff(flips))
    mu = 2 * n1 * n0 / flips.size + 1
    var = (mu - 1) * (mu - 2) / (flips.size - 1)
    z = (runs - mu) / np.sqrt(var)
    assert 2 * norm.sf(abs(z)) > 0.01


def test_invalid_inputs():
    with pytest.raises(ValueError):
        BscChannel(0.5, 0, 0)
    with pytest.raises(ValueError):
        BscChannel(0.1, 0, 0).transmit(1, 0)


def test_feedback_identity():
    assert feedback((1, 0, 1)) == (1, 0, 1)
    assert feedback(()) == ()
    v = np.array([0, 1, 1, 0])
    assert np.array_equal(feedback(v), v)


def test_flip_matrix_shape():
    chans = [BscChannel(0.2, 1, u) for u in range(3)]
    m = flip_matrix(chans, 10)
    assert m.shape == (3, 10)
    assert np.array_equal(m[1], chans[1].flips(10))
