"""Domain records shared by the valuation, auction, budget and simulation code.

Every record here is an immutable value. Operations that "change" a record
return a new one (``dataclasses.replace`` is used throughout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping


@dataclass(frozen=True)
class ResourceKind:
    """A shareable resource admitting at most ``slots`` concurrent holders."""

    id: str
    label: str = ""
    slots: int = 1


@dataclass(frozen=True, init=False)
class ResourceVector:
    """Bundle of (resource id, quantity) pairs in canonical (sorted) order.

    Equality is structural, so vectors built from permuted entries compare
    and hash equal.
    """

    entries: tuple[tuple[str, int], ...]

    def __init__(self, entries: Iterable[tuple[str, int]] = ()) -> None:
        merged: dict[str, int] = {}
        for rid, qty in entries:
            merged[rid] = merged.get(rid, 0) + int(qty)
        object.__setattr__(self, "entries", tuple(sorted(merged.items())))

    @classmethod
    def single(cls, resource: str) -> "ResourceVector":
        return cls(((resource, 1),))

    @classmethod
    def empty(cls) -> "ResourceVector":
        return cls(())

    @property
    def is_empty(self) -> bool:
        return not self.entries

    @property
    def resources(self) -> tuple[str, ...]:
        return tuple(rid for rid, _ in self.entries)

    def __contains__(self, resource: object) -> bool:
        return any(rid == resource for rid, _ in self.entries)

    def __iter__(self) -> Iterator[tuple[str, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def swap_to(self, resource: str) -> "ResourceVector":
        """Vector obtained by replacing the holding with one unit of ``resource``.

        Empty and single-entry vectors become ``single(resource)``. For
        multi-entry vectors only the coordinate of ``resource`` is replaced
        (set to one unit); the remaining coordinates are kept.
        """
        if len(self.entries) <= 1:
            if self.entries == ((resource, 1),):
                return self
            return ResourceVector.single(resource)
        kept = [(rid, q) for rid, q in self.entries if rid != resource]
        return ResourceVector(kept + [(resource, 1)])

    def __str__(self) -> str:
        if not self.entries:
            return "-"
        return "+".join(rid if q == 1 else f"{rid}x{q}" for rid, q in self.entries)


EMPTY = ResourceVector.empty()


@dataclass(frozen=True)
class Phase:
    """Execution phase ``[start, end)`` with its profiled per-resource utility."""

    start: int
    end: int
    valuations: Mapping[str, float]

    @property
    def duration(self) -> int:
        return self.end - self.start


class Status(str, Enum):
    UNASSIGNED = "unassigned"
    ASSIGNED = "assigned"
    QUIT = "quit"


@dataclass(frozen=True)
class ApplicationAgent:
    id: str
    phases: tuple[Phase, ...]
    budget: float = math.inf
    spend: float = 0.0
    status: Status = Status.UNASSIGNED
    holding: ResourceVector = EMPTY
    arrival: int = 0

    @property
    def finish(self) -> int:
        """Time the last phase ends (the application's ``T_i``)."""
        return self.phases[-1].end

    def phase_index(self, t: float) -> int | None:
        for k, ph in enumerate(self.phases):
            if ph.start <= t < ph.end:
                return k
        return None

    def is_active(self, t: float) -> bool:
        return self.arrival <= t < self.finish


@dataclass(frozen=True)
class ValuationHistory:
    """Time-ordered observations of one application's value for one vector."""

    key: tuple[str, ResourceVector]
    samples: tuple[tuple[float, float], ...] = ()

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.samples)

    @property
    def last_time(self) -> float | None:
        return self.samples[-1][0] if self.samples else None

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Bid:
    bidder: str
    resource: str
    amount: float
    round: int


@dataclass(frozen=True)
class AuctionState:
    """Auctioneer state for one auction.

    ``winners`` maps each resource to its standing winners and their standing
    bids. ``prices`` holds the highest standing bid per resource and
    ``min_bids`` the lowest one.
    """

    slots: Mapping[str, int]
    prices: Mapping[str, float]
    min_bids: Mapping[str, float]
    winners: Mapping[str, Mapping[str, float]]
    epsilon: float
    round: int = 0

    @classmethod
    def initial(cls, resources: Iterable[ResourceKind], epsilon: float) -> "AuctionState":
        resources = list(resources)
        return cls(
            slots={r.id: r.slots for r in resources},
            prices={r.id: 0.0 for r in resources},
            min_bids={r.id: 0.0 for r in resources},
            winners={r.id: {} for r in resources},
            epsilon=epsilon,
        )

    def is_full(self, resource: str) -> bool:
        return len(self.winners[resource]) >= self.slots[resource]

    def entry_price(self, resource: str) -> float:
        """Cheapest standing bid a newcomer has to beat to obtain ``resource``."""
        return self.min_bids[resource] if self.is_full(resource) else 0.0

    def standing(self, app_id: str) -> tuple[str, float] | None:
        for rid, held in self.winners.items():
            if app_id in held:
                return rid, held[app_id]
        return None


@dataclass(frozen=True)
class Assignment:
    """Outcome of an auction: who holds what and who pays how much.

    ``revenue`` is always recomputed from ``payments``; build instances through
    :meth:`build` to keep the two consistent.
    """

    holdings: Mapping[str, ResourceVector | None]
    payments: Mapping[str, float]
    revenue: float = 0.0

    @classmethod
    def build(
        cls, holdings: Mapping[str, ResourceVector | None], payments: Mapping[str, float]
    ) -> "Assignment":
        payments = {a: float(p) for a, p in payments.items()}
        return cls(dict(holdings), payments, math.fsum(payments.values()))

    def resource_of(self, app_id: str) -> str | None:
        vec = self.holdings.get(app_id)
        if vec is None or vec.is_empty:
            return None
        return vec.resources[0]

    def holders(self, resource: str) -> list[str]:
        return [a for a, v in self.holdings.items() if v is not None and resource in v]

    def total_valuation(self, valuations: Mapping[str, Mapping[str, float]]) -> float:
        return math.fsum(
            valuations[a][r]
            for a in self.holdings
            if (r := self.resource_of(a)) is not None
        )


BUDGET_MODES = ("literal", "inclusive")
BASELINE_MODES = ("zero", "mean")
PRICE_RULES = ("entry", "literal")
REAUCTION_POLICIES = ("period", "events")


@dataclass(frozen=True)
class AuctionConfig:
    epsilon: float | None = None
    budget_mode: str = "literal"
    baseline_mode: str = "zero"
    price_rule: str = "entry"
    reauction: str = "period"
    # Weight on past observations: None means adaptive, a number in [0, 1] fixes it.
    discount: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    resources: tuple[ResourceKind, ...]
    applications: tuple[ApplicationAgent, ...]
    auction: AuctionConfig = field(default_factory=AuctionConfig)
    congestion_curves: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    shared_resource: str | None = None
    private_resource: str | None = None
    description: str = ""

    @property
    def resource_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.resources)

    @property
    def app_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.applications)

    def resource(self, rid: str) -> ResourceKind:
        for r in self.resources:
            if r.id == rid:
                return r
        raise KeyError(f"unknown resource {rid!r}")

    def application(self, aid: str) -> ApplicationAgent:
        for a in self.applications:
            if a.id == aid:
                return a
        raise KeyError(f"unknown application {aid!r}")

    def max_valuation(self) -> float:
        return max(
            (v for a in self.applications for ph in a.phases for v in ph.valuations.values()),
            default=0.0,
        )

    def default_epsilon(self) -> float:
        """Configured epsilon, else 1e-3 of the largest valuation (floor 1e-9)."""
        if self.auction.epsilon is not None:
            return self.auction.epsilon
        return max(1e-3 * self.max_valuation(), 1e-9)

    @property
    def horizon(self) -> int:
        return max((a.finish for a in self.applications), default=0)

    def valuation_matrix(self, t: float = 0) -> dict[str, dict[str, float]]:
        """Profiled per-resource valuations of every application active at ``t``."""
        out: dict[str, dict[str, float]] = {}
        for a in self.applications:
            k = a.phase_index(t)
            if k is not None:
                out[a.id] = dict(a.phases[k].valuations)
        return out


def validate_scenario(scenario: Scenario) -> list[str]:
    """List every violated type invariant; an empty list means valid."""
    problems: list[str] = []
    seen: set[str] = set()
    for r in scenario.resources:
        if r.id in seen:
            problems.append(f"resource {r.id}: ids unique within a scenario")
        seen.add(r.id)
        if not isinstance(r.slots, int) or r.slots < 1:
            problems.append(f"resource {r.id}: slots >= 1 (got {r.slots})")
    if not scenario.resources:
        problems.append("scenario: at least one resource")

    seen_apps: set[str] = set()
    for a in scenario.applications:
        if a.id in seen_apps:
            problems.append(f"application {a.id}: ids unique within a scenario")
        seen_apps.add(a.id)
        if not a.budget >= 0:
            problems.append(f"application {a.id}: budget >= 0")
        if a.spend < 0 or a.spend > a.budget:
            problems.append(f"application {a.id}: 0 <= spend <= budget")
        if a.arrival < 0:
            problems.append(f"application {a.id}: arrival >= 0")
        if not a.phases:
            problems.append(f"application {a.id}: at least one phase")
        prev_end = None
        for k, ph in enumerate(a.phases):
            where = f"application {a.id} phase {k}"
            if not ph.start < ph.end:
                problems.append(f"{where}: start < end")
            if prev_end is not None and ph.start != prev_end:
                problems.append(f"{where}: phases contiguous and non-overlapping")
            prev_end = ph.end
            for rid, v in ph.valuations.items():
                if rid not in seen:
                    problems.append(f"{where}: valuation for unknown resource {rid}")
                if not (math.isfinite(v) and v >= 0):
                    problems.append(f"{where}: valuation of {rid} finite and >= 0")
            missing = [r.id for r in scenario.resources if r.id not in ph.valuations]
            if missing:
                problems.append(f"{where}: missing valuations for {', '.join(missing)}")

    cfg = scenario.auction
    if cfg.epsilon is not None and not cfg.epsilon > 0:
        problems.append("auction: epsilon > 0")
    for name, value, allowed in (
        ("budget_mode", cfg.budget_mode, BUDGET_MODES),
        ("baseline_mode", cfg.baseline_mode, BASELINE_MODES),
        ("price_rule", cfg.price_rule, PRICE_RULES),
        ("reauction", cfg.reauction, REAUCTION_POLICIES),
    ):
        if value not in allowed:
            problems.append(f"auction: {name} one of {'|'.join(allowed)} (got {value})")
    if cfg.discount is not None and not 0.0 <= cfg.discount <= 1.0:
        problems.append(f"auction: discount in [0, 1] (got {cfg.discount})")

    for rid, curve in scenario.congestion_curves.items():
        if rid not in seen:
            problems.append(f"congestion_curves: unknown resource {rid}")
            continue
        if len(curve) != scenario.resource(rid).slots:
            problems.append(f"congestion_curves {rid}: one value per holder count 1..slots")
        if any(not (math.isfinite(c) and c >= 0) for c in curve):
            problems.append(f"congestion_curves {rid}: values finite and >= 0")
    for label, rid in (("shared_resource", scenario.shared_resource),
                       ("private_resource", scenario.private_resource)):
        if rid is not None and rid not in seen:
            problems.append(f"{label}: unknown resource {rid}")
    return problems
