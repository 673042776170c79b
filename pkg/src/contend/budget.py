"""Phase-wise budget planning: decide whether an application enters an auction."""

from __future__ import annotations

import math
from enum import Enum
from typing import Mapping

from .auction import partial_bid
from .model import ApplicationAgent, AuctionState


class Decision(str, Enum):
    PARTICIPATE = "participate"
    QUIT = "quit"


def estimate_future_bids(
    app: ApplicationAgent,
    t: float,
    state: AuctionState,
    epsilon: float | None = None,
    baseline: float = 0.0,
    price_rule: str = "entry",
) -> dict[int, float]:
    """Bid the application expects to place at the start of each later phase.

    Prices and holders are frozen at ``state``; each later phase's profiled
    valuations go through the same best/second-best margin rule used in the
    live auction. Phases starting at or before ``t`` are excluded: what was
    already paid is tracked as spend.
    """
    eps = state.epsilon if epsilon is None else epsilon
    out: dict[int, float] = {}
    for ph in app.phases:
        if ph.start <= t:
            continue
        scored = []
        for idx, (rid, v) in enumerate(ph.valuations.items()):
            price = state.entry_price(rid) if price_rule == "entry" else state.prices[rid]
            scored.append((-(v - baseline - price), idx, rid, price))
        scored.sort()
        first = -scored[0][0]
        if first < 0:
            out[ph.start] = 0.0
            continue
        second = max(-scored[1][0], 0.0) if len(scored) > 1 else 0.0
        out[ph.start] = partial_bid(first, second, scored[0][3], eps)
    return out


def investment(budget: float, past_spend: float, estimates: Mapping[int, float]) -> float:
    """Headroom left for the current auction after past and planned spending."""
    return budget - past_spend - math.fsum(estimates.values())


def plan(
    app: ApplicationAgent,
    t: float,
    current_bid: float,
    estimates: Mapping[int, float],
    past_spend: float | None = None,
    mode: str = "literal",
) -> Decision:
    """Participate-or-quit decision for the bid ``current_bid`` at time ``t``.

    ``literal`` checks ``budget >= past + future`` and leaves the current bid
    out. ``inclusive`` also counts the current bid, which is the same as
    requiring the remaining investment to cover it. A quitting application
    records a zero observation; the caller does that.
    """
    past = app.spend if past_spend is None else past_spend
    if math.isinf(app.budget):
        return Decision.PARTICIPATE
    future = math.fsum(v for k, v in estimates.items() if k != t)
    if mode == "literal":
        ok = app.budget >= past + future
    elif mode == "inclusive":
        ok = app.budget >= past + current_bid + future
    else:
        raise ValueError(f"unknown budget mode {mode!r}")
    return Decision.PARTICIPATE if ok else Decision.QUIT
