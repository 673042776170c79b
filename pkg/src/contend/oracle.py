"""Ground-truth and baseline allocators the auction is compared against."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import Assignment, ResourceKind, ResourceVector, Scenario

MAX_ENUMERATION = 10**7
_TIE_TOL = 1e-12


class InstanceTooLarge(ValueError):
    pass


class ScenarioConfigError(ValueError):
    pass


def _feasible_choices(n: int, width: int, slots: Sequence[int]) -> np.ndarray:
    """Every capacity-respecting choice tuple, in lexicographic order.

    Choice ``k`` for an application means resource ``k``; ``len(slots)``
    means it gets nothing.
    """
    _check_size(n, width)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    flat = np.arange(width**n)
    choices = np.stack(np.unravel_index(flat, (width,) * n), axis=1).astype(np.int8)
    feasible = np.ones(len(choices), dtype=bool)
    for j, cap in enumerate(slots):
        feasible &= (choices == j).sum(axis=1) <= cap
    return choices[feasible]


def _all_totals(values: np.ndarray, slots: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Totals of every capacity-respecting assignment, in lexicographic order.

    Going without a resource is only enumerated when capacity is short.
    Valuations are non-negative, so otherwise some optimum assigns everyone.
    """
    n, k = values.shape
    width = k + 1 if sum(slots) < n else k
    choices = _feasible_choices(n, width, slots)
    padded = np.concatenate([values, np.zeros((n, 1))], axis=1)
    totals = padded[np.arange(n)[None, :], choices].sum(axis=1) if n else np.zeros(1)
    return choices, totals


def _as_array(valuations: Mapping[str, Mapping[str, float]], resources: Sequence[ResourceKind]):
    apps = list(valuations)
    values = np.array([[valuations[a][r.id] for r in resources] for a in apps], dtype=float)
    return apps, values.reshape(len(apps), len(resources))


def _check_size(n: int, k: int) -> None:
    if k**n > MAX_ENUMERATION:
        raise InstanceTooLarge(f"{k}^{n} assignments exceed the enumeration limit")


def brute_force_optimal(
    valuations: Mapping[str, Mapping[str, float]], resources: Sequence[ResourceKind]
) -> tuple[Assignment, float]:
    """Welfare-maximal assignment of at most one resource per application.

    Among equal totals, the lexicographically first choice tuple wins
    (applications in mapping order, resources in table order).
    """
    resources = list(resources)
    apps, values = _as_array(valuations, resources)
    choices, totals = _all_totals(values, [r.slots for r in resources])
    best = float(totals.max())
    pick = int(np.flatnonzero(totals >= best - _TIE_TOL)[0])
    holdings: dict[str, ResourceVector | None] = {}
    for a, c in zip(apps, choices[pick]):
        holdings[a] = ResourceVector.single(resources[c].id) if c < len(resources) else None
    assignment = Assignment.build(holdings, {a: 0.0 for a in apps})
    return assignment, assignment.total_valuation(valuations)


def optimum_gap(
    valuations: Mapping[str, Mapping[str, float]], resources: Sequence[ResourceKind]
) -> float:
    """Distance between the best and the second-best assignment totals."""
    resources = list(resources)
    apps, values = _as_array(valuations, resources)
    _, totals = _all_totals(values, [r.slots for r in resources])
    if len(totals) < 2:
        return math.inf
    top = np.partition(totals, -2)[-2:]
    return float(top[1] - top[0])


def linear_assignment_optimal(
    valuations: Mapping[str, Mapping[str, float]], resources: Sequence[ResourceKind]
) -> tuple[Assignment, float]:
    """Exact optimum via a rectangular assignment over expanded slots.

    Each resource contributes ``min(slots, n)`` identical columns. This
    scales to instances far past the enumeration limit, but tie-breaking
    between equal optima is whatever the solver returns.
    """
    resources = list(resources)
    apps, values = _as_array(valuations, resources)
    n = len(apps)
    owner = [j for j, r in enumerate(resources) for _ in range(min(r.slots, n))]
    holdings: dict[str, ResourceVector | None] = {a: None for a in apps}
    if n and owner:
        cost = values[:, owner]
        rows, cols = linear_sum_assignment(cost, maximize=True)
        for i, c in zip(rows, cols):
            holdings[apps[i]] = ResourceVector.single(resources[owner[c]].id)
    assignment = Assignment.build(holdings, {a: 0.0 for a in apps})
    return assignment, assignment.total_valuation(valuations)


def optimal_assignment(
    valuations: Mapping[str, Mapping[str, float]], resources: Sequence[ResourceKind]
) -> tuple[Assignment, float]:
    """Enumerate when small enough, otherwise fall back to the assignment solver."""
    try:
        return brute_force_optimal(valuations, resources)
    except InstanceTooLarge:
        return linear_assignment_optimal(valuations, resources)


def congested_optimal(
    valuations: Mapping[str, Mapping[str, float]],
    resources: Sequence[ResourceKind],
    curves: Mapping[str, Sequence[float]],
) -> tuple[dict[str, str | None], float]:
    """Best assignment when a resource's value is scaled by its holder count.

    ``curves[r][h - 1]`` multiplies every holder's value of ``r`` when ``h``
    applications share it; resources without a curve are not scaled. The
    objective is no longer separable, so this always enumerates.
    """
    resources = list(resources)
    apps, values = _as_array(valuations, resources)
    n, k = values.shape
    choices = _feasible_choices(n, k + 1, [r.slots for r in resources])
    padded = np.concatenate([values, np.zeros((n, 1))], axis=1)
    per_app = padded[np.arange(n)[None, :], choices] if n else np.zeros((1, 0))
    for j, r in enumerate(resources):
        curve = curves.get(r.id)
        if not curve:
            continue
        factors = np.concatenate([[1.0], np.asarray(curve, dtype=float)])
        counts = (choices == j).sum(axis=1)
        scale = factors[np.minimum(counts, len(curve))]
        per_app = np.where(choices == j, per_app * scale[:, None], per_app)
    totals = per_app.sum(axis=1)
    pick = int(np.flatnonzero(totals >= totals.max() - _TIE_TOL)[0])
    choice = {a: (resources[c].id if c < k else None) for a, c in zip(apps, choices[pick])}
    return choice, float(totals[pick])


def _phase_valuation(scenario: Scenario, app_id: str, t: float, resource: str) -> float:
    app = scenario.application(app_id)
    return app.phases[app.phase_index(t)].valuations[resource]


def shared_baseline(scenario: Scenario, t: float = 0) -> dict[str, float]:
    """Performance when every application runs on the shared configuration."""
    if scenario.shared_resource is None:
        raise ScenarioConfigError(f"scenario {scenario.name} names no shared_resource")
    return fixed_config_baseline(scenario, scenario.shared_resource, t)


def private_baseline(scenario: Scenario, t: float = 0) -> dict[str, float]:
    """Performance when every application gets its own private partition."""
    if scenario.private_resource is None:
        raise ScenarioConfigError(f"scenario {scenario.name} names no private_resource")
    return fixed_config_baseline(scenario, scenario.private_resource, t)


def fixed_config_baseline(scenario: Scenario, resource: str, t: float = 0) -> dict[str, float]:
    return {
        a.id: a.phases[a.phase_index(t)].valuations[resource]
        for a in scenario.applications
        if a.is_active(t)
    }


def phase_times(scenario: Scenario) -> list[int]:
    return sorted({ph.start for a in scenario.applications for ph in a.phases})


def static_schedule_baseline(scenario: Scenario) -> dict[str, list[float]]:
    """Solve once with the first-phase valuations and keep that assignment.

    Returns, per application, its performance at each distinct phase start.
    An application left without a resource scores 0.
    """
    times = phase_times(scenario)
    first = scenario.valuation_matrix(times[0])
    assignment, _ = optimal_assignment(first, scenario.resources)
    out: dict[str, list[float]] = {a.id: [] for a in scenario.applications}
    for t in times:
        for a in scenario.applications:
            if not a.is_active(t):
                continue
            rid = assignment.resource_of(a.id)
            out[a.id].append(0.0 if rid is None else _phase_valuation(scenario, a.id, t, rid))
    return out


def dynamic_optimal_baseline(scenario: Scenario) -> dict[str, list[float]]:
    """Re-solve the exact optimum at every phase start (perfect hindsight)."""
    out: dict[str, list[float]] = {a.id: [] for a in scenario.applications}
    for t in phase_times(scenario):
        matrix = scenario.valuation_matrix(t)
        assignment, _ = optimal_assignment(matrix, scenario.resources)
        for aid in matrix:
            rid = assignment.resource_of(aid)
            out[aid].append(0.0 if rid is None else matrix[aid][rid])
    return out
