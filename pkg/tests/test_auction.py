import pytest

from contend.auction import (
    AuctionNonTermination,
    QuitBidderError,
    find_bottlenecks,
    partial_bid,
    run_auction,
    settle_round,
)
from contend.model import (
    EMPTY,
    ApplicationAgent,
    AuctionConfig,
    AuctionState,
    Bid,
    Phase,
    ResourceKind,
    Scenario,
)
from contend.valuation import BeliefTable

from .conftest import MATRIX_M

EPS = 1.9e-3


def one_phase(valuations, slots, **auction):
    resources = tuple(ResourceKind(rid, rid, s) for rid, s in slots.items())
    apps = tuple(ApplicationAgent(a, (Phase(0, 1, row),)) for a, row in valuations.items())
    return Scenario("t", resources, apps, AuctionConfig(**auction))


class TestBottlenecks:
    def test_app1(self, matrix_m, matrix_beliefs):
        state = AuctionState.initial(matrix_m.resources, EPS)
        first, second = find_bottlenecks("App1", 0, state, matrix_beliefs)
        assert (first.resource, second.resource) == ("R1", "R2")
        assert (first.surplus, second.surplus) == (1.9, 1.7)

    def test_app5(self, matrix_m, matrix_beliefs):
        state = AuctionState.initial(matrix_m.resources, EPS)
        first, second = find_bottlenecks("App5", 0, state, matrix_beliefs)
        assert (first.resource, first.surplus) == ("R5", 1.7)
        assert (second.resource, second.surplus) == ("R4", 1.4)

    def test_ties_go_to_lowest_index(self):
        beliefs = BeliefTable.from_matrix({"a": {"x": 1.0, "y": 1.0, "z": 1.0}}, ["x", "y", "z"])
        state = AuctionState.initial([ResourceKind(r) for r in "xyz"], 0.01)
        first, second = find_bottlenecks("a", 0, state, beliefs)
        assert (first.resource, second.resource) == ("x", "y")

    def test_single_resource_sentinel(self):
        beliefs = BeliefTable.from_matrix({"a": {"x": 1.0}}, ["x"])
        state = AuctionState.initial([ResourceKind("x")], 0.01)
        _, second = find_bottlenecks("a", 0, state, beliefs)
        assert second.resource is None and second.surplus == 0.0


class TestPartialBid:
    def test_round_one_bids(self):
        assert partial_bid(1.9, 1.7, 0.0, EPS) == pytest.approx(0.2 + EPS, abs=1e-12)
        assert partial_bid(1.4, 1.0, 0.0, EPS) == pytest.approx(0.4 + EPS, abs=1e-12)

    def test_indifferent_bids_epsilon(self):
        assert partial_bid(0.7, 0.7, 0.0, EPS) == EPS


class TestSettleRound:
    def start(self, matrix_m):
        return AuctionState.initial(matrix_m.resources, EPS)

    def test_multi_slot_keeps_both(self, matrix_m):
        bids = [Bid("App4", "R5", 0.2 + EPS, 1), Bid("App5", "R5", 0.3 + EPS, 1)]
        state = settle_round(self.start(matrix_m), bids)
        assert set(state.winners["R5"]) == {"App4", "App5"}
        assert sum(state.winners["R5"].values()) == pytest.approx(0.5 + 2 * EPS, abs=1e-12)

    def test_single_slot_goes_to_highest(self, matrix_m):
        bids = [Bid(a, "R1", x + EPS, 1) for a, x in (("App1", 0.2), ("App2", 0.3), ("App3", 0.4))]
        state = settle_round(self.start(matrix_m), bids)
        assert list(state.winners["R1"]) == ["App3"]
        assert state.prices["R1"] == pytest.approx(0.4 + EPS, abs=1e-12)
        assert state.min_bids["R1"] == state.prices["R1"]

    def test_untouched_resource_unchanged(self, matrix_m):
        before = self.start(matrix_m)
        after = settle_round(before, [Bid("App1", "R1", 0.5, 1)])
        for rid in ("R2", "R3", "R4", "R5"):
            assert after.winners[rid] == before.winners[rid]
            assert after.prices[rid] == before.prices[rid]
            assert after.min_bids[rid] == before.min_bids[rid]

    def test_equal_bid_does_not_displace_holder(self, matrix_m):
        state = settle_round(self.start(matrix_m), [Bid("App2", "R1", 0.3, 1)])
        state = settle_round(state, [Bid("App1", "R1", 0.3, 2)], app_order={"App1": 0, "App2": 1})
        assert list(state.winners["R1"]) == ["App2"]

    def test_equal_new_bids_go_to_lower_app_index(self, matrix_m):
        bids = [Bid("App2", "R1", 0.3, 1), Bid("App1", "R1", 0.3, 1)]
        state = settle_round(self.start(matrix_m), bids, app_order={"App1": 0, "App2": 1})
        assert list(state.winners["R1"]) == ["App1"]

    def test_rejects_quit_unknown_and_bad_amounts(self, matrix_m):
        st = self.start(matrix_m)
        with pytest.raises(QuitBidderError):
            settle_round(st, [Bid("App1", "R1", 0.1, 1)], quit={"App1"})
        with pytest.raises(KeyError):
            settle_round(st, [Bid("App1", "R9", 0.1, 1)])
        with pytest.raises(ValueError):
            settle_round(st, [Bid("App1", "R1", float("nan"), 1)])


class TestRunAuction:
    def test_matrix_m(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs)
        got = {a: out.assignment.resource_of(a) for a in MATRIX_M}
        assert got == {"App1": "R2", "App2": "R2", "App3": "R1", "App4": "R5", "App5": "R5"}
        assert out.assignment.total_valuation(MATRIX_M) == pytest.approx(7.5, abs=1e-12)
        assert out.rounds <= 3

    def test_round_one_bids(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs)
        first = {b.bidder: (b.resource, b.amount) for b in out.bids if b.round == 1}
        expected = {"App1": ("R1", 0.2), "App2": ("R1", 0.3), "App3": ("R1", 0.4),
                    "App4": ("R5", 0.2), "App5": ("R5", 0.3)}
        for aid, (rid, x) in expected.items():
            assert first[aid][0] == rid
            assert first[aid][1] == pytest.approx(x + EPS, abs=1e-9)

    def test_payments_are_standing_bids(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs)
        for rid, held in out.state.winners.items():
            for aid, amount in held.items():
                assert out.assignment.payments[aid] == amount
        assert out.assignment.revenue == pytest.approx(sum(out.assignment.payments.values()), abs=0)

    def test_total_bids_sum_partial_bids(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs)
        assert out.total_bids["App1"] == pytest.approx(
            sum(b.amount for b in out.bids if b.bidder == "App1"), abs=1e-15
        )

    def test_uncontested_single_resource(self):
        # The runner-up is the zero sentinel, so the lone bidder bids v + epsilon.
        scenario = one_phase({"a": {"x": 0.8}}, {"x": 1}, epsilon=0.01)
        beliefs = BeliefTable.from_matrix({"a": {"x": 0.8}}, ["x"])
        out = run_auction(scenario, 0, beliefs)
        assert out.assignment.resource_of("a") == "x"
        assert out.assignment.payments["a"] == pytest.approx(0.81)
        assert out.rounds == 1

    def test_excess_demand_quits(self):
        vals = {"a": {"x": 1.0}, "b": {"x": 0.5}}
        scenario = one_phase(vals, {"x": 1}, epsilon=0.01)
        out = run_auction(scenario, 0, BeliefTable.from_matrix(vals, ["x"]))
        assert out.assignment.resource_of("a") == "x"
        assert out.assignment.resource_of("b") is None
        assert out.assignment.payments["b"] == 0.0
        assert "b" in out.quits

    def test_planner_veto(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs, planner=lambda a, amt, st: a != "App3")
        assert out.quits["App3"].reason == "budget"
        assert out.assignment.resource_of("App3") is None

    def test_non_termination(self, matrix_m, matrix_beliefs):
        with pytest.raises(AuctionNonTermination) as info:
            run_auction(matrix_m, 0, matrix_beliefs, max_rounds=1)
        assert info.value.rounds == 1
        assert info.value.state.round == 1

    def test_epsilon_must_be_positive(self, matrix_m, matrix_beliefs):
        with pytest.raises(ValueError):
            run_auction(matrix_m, 0, matrix_beliefs, epsilon=0.0)

    def test_literal_price_rule_still_valid(self, matrix_m, matrix_beliefs):
        out = run_auction(matrix_m, 0, matrix_beliefs, price_rule="literal")
        for rid, held in out.state.winners.items():
            assert len(held) <= matrix_m.resource(rid).slots
