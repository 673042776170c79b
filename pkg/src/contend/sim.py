"""Repeated auction game over discrete periods.

Each period: apply arrivals, departures and phase changes, refresh every
application's beliefs from its observation history, run one auction,
then let each application observe what it actually got. Observations for
the period starting at ``t`` are stamped ``t + 1`` (the auction period is
one time unit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .auction import AuctionOutcome, QuitRecord, run_auction
from .budget import Decision, estimate_future_bids, plan
from .model import (
    EMPTY,
    ApplicationAgent,
    Assignment,
    AuctionState,
    Bid,
    ResourceVector,
    Scenario,
    Status,
    ValuationHistory,
)
from .oracle import ScenarioConfigError, congested_optimal, optimal_assignment
from .valuation import (
    BeliefTable,
    DiscountPolicy,
    baseline_value,
    belief_update,
    discount_factor,
    record_observation,
    seed_histories,
)

PERIOD = 1

HistoryKey = tuple[str, ResourceVector]


@dataclass(frozen=True)
class Event:
    time: int
    kind: str  # arrival | departure | phase_change
    app: str


@dataclass(frozen=True)
class PeriodRecord:
    time: int
    bids: tuple[Bid, ...]
    state: AuctionState | None
    assignment: Assignment
    payoffs: Mapping[str, float]
    performance: Mapping[str, float]
    total_bids: Mapping[str, float]
    rounds: int
    quits: Mapping[str, QuitRecord] = field(default_factory=dict)
    auctioned: bool = True
    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class GameTrace:
    scenario: str
    seed: int
    periods: tuple[PeriodRecord, ...] = ()
    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class World:
    scenario: Scenario
    agents: Mapping[str, ApplicationAgent]
    histories: Mapping[HistoryKey, ValuationHistory]
    active: tuple[str, ...] = ()
    phase: Mapping[str, int] = field(default_factory=dict)
    last: Assignment | None = None
    discount: DiscountPolicy = field(default_factory=DiscountPolicy)
    seed: int = 0
    noise: float = 0.0
    max_rounds: int = 100_000


def _scenario_discount(scenario: Scenario) -> DiscountPolicy:
    delta = scenario.auction.discount
    return DiscountPolicy() if delta is None else DiscountPolicy.fixed(delta)


def init_world(
    scenario: Scenario,
    seed: int = 0,
    discount: DiscountPolicy | None = None,
    noise: float = 0.0,
    max_rounds: int = 100_000,
) -> World:
    return World(
        scenario=scenario,
        agents={a.id: a for a in scenario.applications},
        histories={},
        discount=discount or _scenario_discount(scenario),
        seed=seed,
        noise=noise,
        max_rounds=max_rounds,
    )


def _drop_histories(histories: dict, app_id: str) -> None:
    for key in [k for k in histories if k[0] == app_id]:
        del histories[key]


def _apply_events(world: World, t: int):
    agents = dict(world.agents)
    histories = dict(world.histories)
    phase = dict(world.phase)
    events = []
    active = []
    for app in world.scenario.applications:
        agent = agents[app.id]
        was = app.id in world.active
        now = agent.is_active(t)
        if was and not now:
            events.append(Event(t, "departure", app.id))
            _drop_histories(histories, app.id)
            phase.pop(app.id, None)
            agents[app.id] = replace(agent, status=Status.UNASSIGNED, holding=EMPTY)
            continue
        if not now:
            continue
        k = agent.phase_index(t)
        if not was:
            events.append(Event(t, "arrival", app.id))
            histories.update(seed_histories(agent, t))
        elif phase.get(app.id) != k:
            # Profiles describe one phase; start the new phase from its profile.
            events.append(Event(t, "phase_change", app.id))
            _drop_histories(histories, app.id)
            histories.update(seed_histories(agent, t))
        phase[app.id] = k
        active.append(app.id)
    return agents, histories, phase, tuple(active), events


def beliefs_at(world: World, t: int, active: Sequence[str], histories) -> BeliefTable:
    scenario = world.scenario
    values = {}
    baseline = {}
    for aid in active:
        agent = world.agents[aid]
        baseline[aid] = baseline_value(agent, t, scenario.auction.baseline_mode)
        for rid in scenario.resource_ids:
            key = (aid, ResourceVector.single(rid))
            h = histories[key]
            values[key] = belief_update(h, t, discount_factor(h, world.discount), PERIOD)
    return BeliefTable(scenario.resource_ids, values, baseline)


def realized_value(scenario: Scenario, agent: ApplicationAgent, t: int, rid: str, holders: int) -> float:
    """Performance actually delivered by ``rid`` when shared by ``holders`` apps."""
    base = agent.phases[agent.phase_index(t)].valuations[rid]
    curve = scenario.congestion_curves.get(rid)
    if curve:
        base *= curve[min(holders, len(curve)) - 1]
    return base


def _make_planner(world: World, t: int, beliefs: BeliefTable, eps: float):
    scenario = world.scenario
    cache: dict[str, dict[int, float]] = {}

    def planner(aid: str, amount: float, state: AuctionState) -> bool:
        agent = world.agents[aid]
        if math.isinf(agent.budget):
            return True
        if aid not in cache:
            cache[aid] = estimate_future_bids(
                agent, t, state, eps, beliefs.baseline.get(aid, 0.0), scenario.auction.price_rule
            )
        decision = plan(agent, t, amount, cache[aid], agent.spend, scenario.auction.budget_mode)
        return decision is Decision.PARTICIPATE

    return planner


def step(world: World, t: int) -> tuple[World, PeriodRecord]:
    """Advance the game by one period starting at ``t``."""
    scenario = world.scenario
    agents, histories, phase, active, events = _apply_events(world, t)
    world = replace(world, agents=agents, histories=histories, phase=phase, active=active)
    eps = scenario.default_epsilon()

    beliefs = beliefs_at(world, t, active, histories)
    rerun = (
        scenario.auction.reauction == "period"
        or events
        or world.last is None
    )
    if rerun:
        outcome = run_auction(
            scenario, t, beliefs, eps, world.max_rounds,
            participants=active, planner=_make_planner(world, t, beliefs, eps),
        )
    else:
        kept = {aid: world.last.holdings.get(aid) for aid in active}
        outcome = AuctionOutcome(
            assignment=Assignment.build(kept, {aid: 0.0 for aid in active}),
            state=None,
            rounds=0,
            total_bids={aid: 0.0 for aid in active},
        )
    assignment = outcome.assignment

    holders: dict[str, int] = {}
    for aid in active:
        rid = assignment.resource_of(aid)
        if rid is not None:
            holders[rid] = holders.get(rid, 0) + 1
    rng = np.random.default_rng([world.seed, t]) if world.noise > 0 else None

    performance: dict[str, float] = {}
    payoffs: dict[str, float] = {}
    for aid in active:
        agent = agents[aid]
        rid = assignment.resource_of(aid)
        pay = assignment.payments.get(aid, 0.0)
        if rid is None:
            performance[aid] = 0.0
            payoffs[aid] = 0.0
            quit = outcome.quits.get(aid)
            if quit is not None and quit.resource is not None:
                key = (aid, ResourceVector.single(quit.resource))
                histories[key] = record_observation(histories[key], t + PERIOD, 0.0, PERIOD)
            agents[aid] = replace(agent, status=Status.QUIT if quit else Status.UNASSIGNED,
                                  holding=EMPTY)
            continue
        value = realized_value(scenario, agent, t, rid, holders[rid])
        if rng is not None:
            value = max(0.0, value * (1.0 + world.noise * rng.standard_normal()))
        performance[aid] = value
        payoffs[aid] = value - pay
        key = (aid, ResourceVector.single(rid))
        histories[key] = record_observation(histories[key], t + PERIOD, value, PERIOD)
        agents[aid] = replace(
            agent,
            spend=agent.spend + pay,
            status=Status.ASSIGNED,
            holding=ResourceVector.single(rid),
        )

    record = PeriodRecord(
        time=t,
        bids=outcome.bids,
        state=outcome.state,
        assignment=assignment,
        payoffs=payoffs,
        performance=performance,
        total_bids=dict(outcome.total_bids),
        rounds=outcome.rounds,
        quits=dict(outcome.quits),
        auctioned=bool(rerun),
        events=tuple(events),
    )
    world = replace(world, agents=agents, histories=histories, last=assignment)
    return world, record


def run(
    scenario: Scenario,
    horizon: int | None = None,
    seed: int = 0,
    *,
    discount: DiscountPolicy | None = None,
    noise: float = 0.0,
    stop_on_convergence: bool = False,
    window: int = 3,
    tol: float = 1e-6,
    grace: int = 0,
    max_rounds: int = 100_000,
) -> GameTrace:
    """Play ``horizon`` periods (default: until every application finished).

    With ``stop_on_convergence`` the run ends ``grace`` periods after the
    trace has been stable for ``window`` periods.
    """
    if horizon is None:
        horizon = scenario.horizon
    world = init_world(scenario, seed, discount, noise, max_rounds)
    periods: list[PeriodRecord] = []
    events: list[Event] = []
    for t in range(horizon):
        world, record = step(world, t)
        periods.append(record)
        events.extend(record.events)
        if stop_on_convergence:
            partial = GameTrace(scenario.name, seed, tuple(periods), tuple(events))
            at = detect_convergence(partial, window, tol)
            if at is not None and len(periods) - at >= window + grace:
                break
    return GameTrace(scenario.name, seed, tuple(periods), tuple(events))


def _holdings_key(record: PeriodRecord) -> tuple:
    return tuple(sorted((a, record.assignment.resource_of(a)) for a in record.assignment.holdings))


def detect_convergence(trace: GameTrace, window: int = 3, tol: float = 1e-6) -> int | None:
    """Earliest period from which the game is settled, or ``None``.

    Settled means the assignment never changes again and every payoff moves
    by less than ``tol`` between consecutive periods, over at least
    ``window`` trailing periods.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    periods = trace.periods
    n = len(periods)
    if n < window:
        return None
    start = n - 1
    last_key = _holdings_key(periods[-1])
    while start > 0:
        prev, cur = periods[start - 1], periods[start]
        if _holdings_key(prev) != last_key:
            break
        if set(prev.payoffs) != set(cur.payoffs):
            break
        if any(abs(cur.payoffs[a] - prev.payoffs[a]) >= tol for a in cur.payoffs):
            break
        start -= 1
    if n - start < window:
        return None
    return start


def _performance_of(scenario: Scenario, t: int, choice: Mapping[str, str | None]) -> dict[str, float]:
    counts: dict[str, int] = {}
    for rid in choice.values():
        if rid is not None:
            counts[rid] = counts.get(rid, 0) + 1
    return {
        aid: 0.0 if rid is None else realized_value(scenario, scenario.application(aid), t, rid, counts[rid])
        for aid, rid in choice.items()
    }


def baseline_performance(
    scenario: Scenario, horizon: int | None = None
) -> dict[str, list[dict[str, float]]]:
    """Per-period performance of the comparison allocators.

    ``shared`` and ``private`` put every application on the designated
    configuration regardless of slot limits. ``static`` keeps the exact
    optimum of the first profiled valuations for the whole run; ``optimal``
    re-solves the exact optimum each period. Congestion curves apply to all
    of them.
    """
    if horizon is None:
        horizon = scenario.horizon
    first_t = min((a.arrival for a in scenario.applications), default=0)
    static_choice = _best_choice(scenario, first_t)
    out: dict[str, list[dict[str, float]]] = {}
    fixed = [(n, r) for n, r in (("shared", scenario.shared_resource), ("private", scenario.private_resource)) if r]
    for name, _ in fixed:
        out[name] = []
    out["static"] = []
    out["optimal"] = []
    for t in range(horizon):
        active = [a.id for a in scenario.applications if a.is_active(t)]
        for name, rid in fixed:
            out[name].append(_performance_of(scenario, t, {a: rid for a in active}))
        out["static"].append(_performance_of(scenario, t, {a: static_choice.get(a) for a in active}))
        out["optimal"].append(_performance_of(scenario, t, _best_choice(scenario, t)))
    return out


def _best_choice(scenario: Scenario, t: int) -> dict[str, str | None]:
    matrix = scenario.valuation_matrix(t)
    if not matrix:
        return {}
    if scenario.congestion_curves:
        choice, _ = congested_optimal(matrix, scenario.resources, scenario.congestion_curves)
        return choice
    best, _ = optimal_assignment(matrix, scenario.resources)
    return {a: best.resource_of(a) for a in matrix}


@dataclass(frozen=True)
class MetricsReport:
    normalized_throughput: float
    totals: Mapping[str, float]
    normalized: Mapping[str, float]
    gain_points: Mapping[str, float]
    per_app_improvement_pct: Mapping[str, float]
    improvement_over_static: float
    mean_rounds: float
    max_rounds: int
    revenue: float
    convergence_period: int | None


def metrics(
    trace: GameTrace,
    baselines: Mapping[str, Sequence[Mapping[str, float]]],
    window: int = 3,
    tol: float = 1e-6,
) -> MetricsReport:
    """Summarise a trace against baseline allocators on the same scenario.

    ``gain_points`` sums, over periods and applications, the relative gain
    ``perf / shared - 1``; it is the unit in which per-phase IPC gains are
    usually quoted.
    """
    if "shared" not in baselines:
        raise ScenarioConfigError("metrics need a 'shared' baseline")
    shared = baselines["shared"]
    ours = [dict(p.performance) for p in trace.periods]
    series = {"auction": ours, **{k: list(v) for k, v in baselines.items()}}
    totals = {name: math.fsum(v for per in s for v in per.values()) for name, s in series.items()}
    if totals["shared"] == 0:
        raise ScenarioConfigError("shared baseline has zero total performance")

    def gain(s):
        pts = []
        for per, ref in zip(s, shared):
            for aid, v in per.items():
                if ref.get(aid, 0.0) == 0:
                    raise ScenarioConfigError(f"shared baseline of {aid} is zero")
                pts.append(v / ref[aid] - 1.0)
        return math.fsum(pts)

    gains = {name: gain(s) for name, s in series.items()}
    per_app = {}
    for aid in {a for per in shared for a in per}:
        own = math.fsum(per.get(aid, 0.0) for per in ours)
        ref = math.fsum(per.get(aid, 0.0) for per in shared)
        per_app[aid] = (own / ref - 1.0) * 100.0 if ref else math.nan
    auctions = [p.rounds for p in trace.periods if p.auctioned and p.assignment.holdings]
    return MetricsReport(
        normalized_throughput=totals["auction"] / totals["shared"],
        totals=totals,
        normalized={k: v / totals["shared"] for k, v in totals.items()},
        gain_points=gains,
        per_app_improvement_pct=dict(sorted(per_app.items())),
        improvement_over_static=gains["auction"] - gains.get("static", math.nan),
        mean_rounds=(sum(auctions) / len(auctions)) if auctions else 0.0,
        max_rounds=max(auctions, default=0),
        revenue=math.fsum(p.assignment.revenue for p in trace.periods),
        convergence_period=detect_convergence(trace, window, tol),
    )


def with_budgets(scenario: Scenario, budgets: Mapping[str, float]) -> Scenario:
    apps = tuple(replace(a, budget=budgets.get(a.id, a.budget)) for a in scenario.applications)
    return replace(scenario, applications=apps)


def budget_sweep(
    scenario: Scenario,
    fractions: Sequence[float],
    horizon: int | None = None,
    seed: int = 0,
    budget_mode: str = "inclusive",
) -> list[tuple[float, float]]:
    """Normalized throughput as every budget is scaled from the unconstrained spend.

    The reference budget of an application is what it paid over the run with
    unlimited budgets; each sweep point gives it ``fraction`` of that.
    """
    if scenario.shared_resource is None:
        raise ScenarioConfigError("budget sweep needs a shared_resource baseline")
    unlimited = with_budgets(scenario, {a.id: math.inf for a in scenario.applications})
    unlimited = replace(unlimited, auction=replace(unlimited.auction, budget_mode=budget_mode))
    ref_trace = run(unlimited, horizon, seed)
    spent = {a.id: 0.0 for a in scenario.applications}
    for p in ref_trace.periods:
        for aid, pay in p.assignment.payments.items():
            spent[aid] += pay
    shared = baseline_performance(scenario, horizon or scenario.horizon)["shared"]
    shared_total = math.fsum(v for per in shared for v in per.values())
    out = []
    for frac in fractions:
        constrained = with_budgets(unlimited, {aid: frac * s for aid, s in spent.items()})
        trace = run(constrained, horizon, seed)
        total = math.fsum(v for p in trace.periods for v in p.performance.values())
        out.append((float(frac), total / shared_total))
    return out
