"""Payment bookkeeping kept separately by the clearing authority and users.

The CA stores who won each round; users store which of their wins they
accepted.  Settlement rebuilds every user's bill from those logs and checks
it against the revenue booked round by round.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LedgerMismatch(AssertionError):
    """Settled payments disagree with booked revenue."""


@dataclass
class Ledger:
    n_users: int
    strategic: bool
    winner_log: list = field(default_factory=list)     # per round: {unit: user}
    ask_log: list = field(default_factory=list)        # per round: {user: amount}
    usage_logs: dict = field(default_factory=dict)     # user -> [(t, amount)]
    revenue: list = field(default_factory=list)        # booked per round

    def record(self, t: int, winners: dict, asks: dict, accepted: dict, revenue: float):
        self.winner_log.append(dict(winners))
        self.ask_log.append(dict(asks))
        for user, ok in accepted.items():
            if ok:
                self.usage_logs.setdefault(user, []).append((t, asks[user]))
        self.revenue.append(revenue)


@dataclass(frozen=True)
class SettlementReport:
    payments: np.ndarray
    total: float
    booked: float


def settle(ledger: Ledger, tol: float = 1e-9) -> SettlementReport:
    pay = np.zeros(ledger.n_users)
    if ledger.strategic:
        for winners, asks in zip(ledger.winner_log, ledger.ask_log):
            for user in set(winners.values()):
                pay[user] += asks[user]
    else:
        for user, log in ledger.usage_logs.items():
            pay[user] += sum(amount for _, amount in log)
    total, booked = float(pay.sum()), float(sum(ledger.revenue))
    if abs(total - booked) > tol * max(1.0, abs(booked)):
        raise LedgerMismatch(f"settled {total!r} but booked {booked!r}")
    return SettlementReport(pay, total, booked)


def acceptance_sequence(winner_log, usage_log, user: int) -> tuple:
    """The user's view of its own wins: 1 where it accepted, 0 where not.

    ``winner_log`` lists the winning user per round (round 1 first);
    ``usage_log`` holds the rounds (or ``(round, amount)`` pairs) the user
    accepted.
    """
    accepted = {e[0] if isinstance(e, tuple) else e for e in usage_log}
    return tuple(int(t in accepted)
                 for t, w in enumerate(winner_log, start=1) if w == user)
