import numpy as np
import pytest

from spectra_auction.accounting import Ledger, LedgerMismatch, acceptance_sequence, settle


def test_user_acceptance_sequence():
    winners = [3, 4, 4, 4, 4, 5]
    assert acceptance_sequence(winners, [3, 5], 4) == (0, 1, 0, 1)
    asks = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    led = Ledger(6, strategic=False)
    for t, w in enumerate(winners, start=1):
        ok = w == 4 and t in (3, 5)
        led.record(t, {0: w}, {w: asks[t - 1]}, {w: ok}, asks[t - 1] if ok else 0.0)
    rep = settle(led)
    assert rep.payments[4] == pytest.approx(0.3 + 0.5)
    assert acceptance_sequence(winners, led.usage_logs[4], 4) == (0, 1, 0, 1)


def test_empty_ledger():
    rep = settle(Ledger(3, strategic=True))
    assert rep.total == 0 and np.all(rep.payments == 0)


def test_strategic_winner_pays_ask():
    led = Ledger(2, strategic=True)
    for t in range(1, 5):
        w = t % 2
        led.record(t, {0: w}, {w: 0.1 * t}, {w: True}, 0.1 * t)
    rep = settle(led)
    assert rep.payments.tolist() == pytest.approx([0.2 + 0.4, 0.1 + 0.3])


def test_mismatch_is_fatal():
    led = Ledger(2, strategic=True)
    led.record(1, {0: 0}, {0: 0.5}, {0: True}, 0.4)
    with pytest.raises(LedgerMismatch):
        settle(led)
