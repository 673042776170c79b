"""Parallel ascending auction with epsilon increments.

Each round every unassigned application bids on its best resource at the
current prices. The bid covers the price plus the application's margin
between its best and second-best options plus ``epsilon``. Each resource
keeps its ``slots`` highest bidders. Displaced holders bid again in the
next round. The loop stops once nobody is left to bid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .model import (
    EMPTY,
    ApplicationAgent,
    Assignment,
    AuctionState,
    Bid,
    ResourceKind,
    ResourceVector,
    Scenario,
)
from .valuation import BeliefTable, differential_valuation


class AuctionError(RuntimeError):
    pass


class AuctionNonTermination(AuctionError):
    """The auction hit ``max_rounds``; carries the last state reached."""

    def __init__(self, message: str, state: AuctionState, rounds: int) -> None:
        super().__init__(message)
        self.state = state
        self.rounds = rounds


class QuitBidderError(AuctionError):
    pass


class QuitRecord(NamedTuple):
    reason: str
    resource: str | None


class Bottleneck(NamedTuple):
    resource: str | None
    surplus: float


def _price_seen(state: AuctionState, resource: str, price_rule: str) -> float:
    if price_rule == "entry":
        return state.entry_price(resource)
    if price_rule == "literal":
        return state.prices[resource]
    raise ValueError(f"unknown price rule {price_rule!r}")


def find_bottlenecks(
    app: ApplicationAgent | str,
    t: float,
    state: AuctionState,
    beliefs: BeliefTable,
    current: ResourceVector = EMPTY,
    price_rule: str = "entry",
) -> tuple[Bottleneck, Bottleneck]:
    """Best and second-best resources by believed gain minus price.

    Ties go to the resource listed first in ``beliefs.resource_ids``. With a
    single resource the second bottleneck is ``Bottleneck(None, 0.0)``.
    """
    scored = []
    for idx, rid in enumerate(beliefs.resource_ids):
        gain = differential_valuation(app, t, current, rid, beliefs)
        scored.append((-(gain - _price_seen(state, rid, price_rule)), idx, rid))
    scored.sort()
    first = Bottleneck(scored[0][2], -scored[0][0])
    if len(scored) < 2:
        return first, Bottleneck(None, 0.0)
    return first, Bottleneck(scored[1][2], -scored[1][0])


def partial_bid(
    first_surplus: float, second_surplus: float, price_first: float, epsilon: float
) -> float:
    return first_surplus - second_surplus + price_first + epsilon


def settle_round(
    state: AuctionState,
    bids: Sequence[Bid],
    resources: Iterable[ResourceKind] | None = None,
    quit: Iterable[str] = (),
    app_order: Mapping[str, int] | None = None,
) -> AuctionState:
    """Award each resource to its ``slots`` highest bidders.

    Previous holders compete with their standing bids. A newcomer has to bid
    strictly more than a holder to push it out, and equal bids go to the
    lower application index. Resources that got no bids stay as they were.
    """
    quit = set(quit)
    slots = dict(state.slots)
    if resources is not None:
        slots.update({r.id: r.slots for r in resources})
    if app_order is None:
        app_order = {}
    order = lambda a: app_order.get(a, math.inf)  # noqa: E731

    by_resource: dict[str, list[Bid]] = {}
    for b in bids:
        if b.bidder in quit:
            raise QuitBidderError(f"application {b.bidder} has quit and cannot bid")
        if b.resource not in slots:
            raise KeyError(f"bid for unknown resource {b.resource!r}")
        if not (math.isfinite(b.amount) and b.amount >= 0):
            raise ValueError(f"bid amount must be finite and >= 0, got {b.amount}")
        by_resource.setdefault(b.resource, []).append(b)

    winners = {rid: dict(held) for rid, held in state.winners.items()}
    prices = dict(state.prices)
    min_bids = dict(state.min_bids)
    # A bidder that lands a bid elsewhere gives up its old holding.
    movers = {b.bidder for b in bids}
    for rid in winners:
        for aid in list(winners[rid]):
            if aid in movers:
                del winners[rid][aid]

    for rid, new in by_resource.items():
        pool = [(-amt, 0, order(aid), aid) for aid, amt in winners[rid].items()]
        pool += [(-b.amount, 1, order(b.bidder), b.bidder) for b in new]
        pool.sort()
        kept = pool[: slots[rid]]
        winners[rid] = {aid: -neg for neg, _, _, aid in kept}
        standing = list(winners[rid].values())
        prices[rid] = max(prices[rid], max(standing))
        min_bids[rid] = min(standing)

    return replace(
        state,
        slots=slots,
        prices=prices,
        min_bids=min_bids,
        winners=winners,
        round=state.round + 1,
    )


@dataclass(frozen=True)
class AuctionOutcome:
    assignment: Assignment
    state: AuctionState
    rounds: int
    bids: tuple[Bid, ...] = ()
    total_bids: Mapping[str, float] = field(default_factory=dict)
    quits: Mapping[str, QuitRecord] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.assignment, self.state, self.rounds))


# Called as planner(app_id, bid_amount, state) -> True to participate.
Planner = Callable[[str, float, AuctionState], bool]


def run_auction(
    scenario: Scenario,
    t: float,
    beliefs: BeliefTable,
    epsilon: float | None = None,
    max_rounds: int = 100_000,
    *,
    participants: Sequence[str] | None = None,
    planner: Planner | None = None,
    bid_scale: Mapping[str, float] | None = None,
    price_rule: str | None = None,
) -> AuctionOutcome:
    """Run bid/settle rounds until every participant holds a resource or quit.

    An application quits this auction when no resource leaves it a
    non-negative surplus, when ``planner`` vetoes its bid (budget), or when
    its bid cannot beat the cheapest holder of a full resource. Only the
    final standing bids are paid; displaced bids are refunded.

    ``bid_scale`` multiplies the named applications' bids. It exists for
    truthfulness probes and should stay ``None`` in ordinary runs.
    """
    eps = scenario.default_epsilon() if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    rule = price_rule or scenario.auction.price_rule
    if participants is None:
        participants = [a.id for a in scenario.applications if a.is_active(t)]
    participants = list(participants)
    app_order = {aid: k for k, aid in enumerate(scenario.app_ids)}
    bid_scale = bid_scale or {}

    state = AuctionState.initial(scenario.resources, eps)
    quits: dict[str, QuitRecord] = {}
    placed: list[Bid] = []
    totals = {aid: 0.0 for aid in participants}
    rounds = 0

    while True:
        holding = {aid for held in state.winners.values() for aid in held}
        bidders = [a for a in participants if a not in holding and a not in quits]
        if not bidders:
            break
        if rounds >= max_rounds:
            raise AuctionNonTermination(
                f"auction did not settle within {max_rounds} rounds", state, rounds
            )
        round_bids = []
        for aid in bidders:
            first, second = find_bottlenecks(aid, t, state, beliefs, EMPTY, rule)
            if first.surplus < 0:
                quits[aid] = QuitRecord("no_surplus", first.resource)
                continue
            # Staying out is always an option worth zero surplus.
            runner_up = max(second.surplus, 0.0)
            price = _price_seen(state, first.resource, rule)
            amount = partial_bid(first.surplus, runner_up, price, eps)
            amount *= bid_scale.get(aid, 1.0)
            if planner is not None and not planner(aid, amount, state):
                quits[aid] = QuitRecord("budget", first.resource)
                continue
            if state.is_full(first.resource) and amount <= state.min_bids[first.resource]:
                quits[aid] = QuitRecord("outbid", first.resource)
                continue
            round_bids.append(Bid(aid, first.resource, amount, rounds + 1))
        if not round_bids:
            break
        state = settle_round(state, round_bids, app_order=app_order)
        rounds += 1
        placed.extend(round_bids)
        for b in round_bids:
            totals[b.bidder] += b.amount

    holdings: dict[str, ResourceVector | None] = {aid: None for aid in participants}
    payments = {aid: 0.0 for aid in participants}
    for rid, held in state.winners.items():
        for aid, amt in held.items():
            holdings[aid] = ResourceVector.single(rid)
            payments[aid] = amt
    return AuctionOutcome(
        assignment=Assignment.build(holdings, payments),
        state=state,
        rounds=rounds,
        bids=tuple(placed),
        total_bids=totals,
        quits=quits,
    )
