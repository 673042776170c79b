"""Auction-based contention management for shared hardware resources."""

from .auction import find_bottlenecks, partial_bid, run_auction, settle_round
from .model import (
    ApplicationAgent,
    Assignment,
    AuctionConfig,
    AuctionState,
    Bid,
    Phase,
    ResourceKind,
    ResourceVector,
    Scenario,
    ValuationHistory,
    validate_scenario,
)
from .valuation import BeliefTable, DiscountPolicy, belief_update, discount_factor

__all__ = [
    "ApplicationAgent",
    "Assignment",
    "AuctionConfig",
    "AuctionState",
    "BeliefTable",
    "Bid",
    "DiscountPolicy",
    "Phase",
    "ResourceKind",
    "ResourceVector",
    "Scenario",
    "ValuationHistory",
    "belief_update",
    "discount_factor",
    "find_bottlenecks",
    "partial_bid",
    "run_auction",
    "settle_round",
    "validate_scenario",
]
