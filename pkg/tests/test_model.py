import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from contend.model import (
    EMPTY,
    ApplicationAgent,
    Assignment,
    AuctionConfig,
    AuctionState,
    Phase,
    ResourceKind,
    ResourceVector,
    Scenario,
    validate_scenario,
)

entries = st.lists(st.tuples(st.sampled_from("ABCDE"), st.integers(1, 4)), max_size=6)


def tiny(slots=1, start=0, end=3, **auction):
    return Scenario(
        name="tiny",
        resources=(ResourceKind("R", "r", slots),),
        applications=(ApplicationAgent("A", (Phase(start, end, {"R": 1.0}),)),),
        auction=AuctionConfig(**auction),
    )


class TestResourceVector:
    @given(entries, st.randoms())
    def test_permutation_invariant(self, items, rnd):
        shuffled = list(items)
        rnd.shuffle(shuffled)
        assert ResourceVector(items) == ResourceVector(shuffled)
        assert hash(ResourceVector(items)) == hash(ResourceVector(shuffled))

    @given(entries)
    def test_duplicates_merge(self, items):
        vec = ResourceVector(items)
        assert len(set(vec.resources)) == len(vec.resources)
        assert sum(q for _, q in vec) == sum(q for _, q in items)

    def test_swap_single(self):
        assert EMPTY.swap_to("R1") == ResourceVector.single("R1")
        assert ResourceVector.single("R2").swap_to("R1") == ResourceVector.single("R1")
        same = ResourceVector.single("R1")
        assert same.swap_to("R1") is same

    def test_swap_multi_replaces_coordinate(self):
        vec = ResourceVector([("cpu", 1), ("llc", 3)])
        assert vec.swap_to("llc") == ResourceVector([("cpu", 1), ("llc", 1)])
        assert vec.swap_to("bw") == ResourceVector([("bw", 1), ("cpu", 1), ("llc", 3)])

    def test_str(self):
        assert str(EMPTY) == "-"
        assert str(ResourceVector([("b", 2), ("a", 1)])) == "a+bx2"


class TestAgent:
    def test_phase_lookup(self):
        app = ApplicationAgent("A", (Phase(0, 2, {}), Phase(2, 5, {})), arrival=0)
        assert app.finish == 5
        assert [app.phase_index(t) for t in range(6)] == [0, 0, 1, 1, 1, None]
        assert app.is_active(4) and not app.is_active(5)


class TestAuctionState:
    def test_entry_price_follows_fullness(self):
        st0 = AuctionState.initial([ResourceKind("R", slots=2)], 0.01)
        held = replace(st0, winners={"R": {"a": 0.5}}, prices={"R": 0.5}, min_bids={"R": 0.5})
        assert held.entry_price("R") == 0.0
        full = replace(held, winners={"R": {"a": 0.5, "b": 0.3}}, min_bids={"R": 0.3})
        assert full.is_full("R")
        assert full.entry_price("R") == 0.3
        assert full.standing("b") == ("R", 0.3)
        assert full.standing("c") is None


class TestAssignment:
    def test_revenue_is_sum_of_payments(self):
        a = Assignment.build(
            {"x": ResourceVector.single("R1"), "y": None}, {"x": 0.1, "y": 0.0}
        )
        assert a.revenue == math.fsum([0.1, 0.0])
        assert a.resource_of("y") is None
        assert a.holders("R1") == ["x"]
        assert a.total_valuation({"x": {"R1": 2.0}, "y": {"R1": 5.0}}) == 2.0


class TestValidate:
    def test_matrix_m_is_valid(self, matrix_m):
        assert validate_scenario(matrix_m) == []

    def test_zero_slots(self):
        problems = validate_scenario(tiny(slots=0))
        assert len(problems) == 1
        assert "slots >= 1" in problems[0]

    def test_phase_end_before_start(self):
        problems = validate_scenario(tiny(start=3, end=3))
        assert len(problems) == 1
        assert "start < end" in problems[0]

    def test_bad_modes_and_discount(self):
        problems = validate_scenario(tiny(budget_mode="loose", discount=1.5))
        assert any("budget_mode" in p for p in problems)
        assert any("discount" in p for p in problems)

    def test_default_epsilon(self, matrix_m):
        assert matrix_m.default_epsilon() == pytest.approx(1.9e-3)
