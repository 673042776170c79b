"""Synthetic scenario generators for randomized checks and sweeps."""

from __future__ import annotations

import numpy as np

from .model import ApplicationAgent, AuctionConfig, Phase, ResourceKind, Scenario
from .oracle import optimum_gap

CACHE_LEVELS = (
    ("R1", "128kB / 1 way", 1),
    ("R2", "256kB / 2 ways", 2),
    ("R3", "512kB / 4 ways", 4),
    ("R4", "1MB / 8 ways", 8),
    ("R5", "2MB / 16 ways", 16),
)


def random_assignment_scenario(
    rng: np.random.Generator,
    n_apps: int,
    n_resources: int,
    epsilon_ratio: float = 1e-3,
) -> Scenario:
    """Single-phase scenario with i.i.d. uniform valuations.

    Each resource admits between 1 and ``n_apps`` holders. Random resources
    get extra slots until everybody fits, so nobody is priced out for lack
    of capacity.
    """
    values = rng.uniform(0.0, 1.0, (n_apps, n_resources))
    slots = rng.integers(1, n_apps + 1, n_resources)
    while slots.sum() < n_apps:
        slots[rng.integers(n_resources)] += 1
    resources = tuple(
        ResourceKind(f"R{j + 1}", f"R{j + 1}", int(slots[j])) for j in range(n_resources)
    )
    apps = tuple(
        ApplicationAgent(
            f"A{i + 1}",
            (Phase(0, 1, {r.id: float(values[i, j]) for j, r in enumerate(resources)}),),
        )
        for i in range(n_apps)
    )
    eps = epsilon_ratio * float(values.max())
    return Scenario(
        name=f"random-{n_apps}x{n_resources}",
        resources=resources,
        applications=apps,
        auction=AuctionConfig(epsilon=eps),
    )


def random_unique_instances(
    seed: int,
    count: int,
    apps: tuple[int, int] = (2, 6),
    resources: tuple[int, int] = (2, 5),
    min_gap: float = 1e-12,
):
    """Yield ``count`` random scenarios whose exact optimum is unique."""
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        n = int(rng.integers(apps[0], apps[1] + 1))
        k = int(rng.integers(resources[0], resources[1] + 1))
        scenario = random_assignment_scenario(rng, n, k)
        if optimum_gap(scenario.valuation_matrix(0), scenario.resources) <= min_gap:
            continue
        made += 1
        yield scenario


def _utility_curve(rng: np.random.Generator, kind: str) -> np.ndarray:
    ways = np.array([1, 2, 4, 8, 16], dtype=float)
    if kind == "friendly":
        # Saturating gain with cache size, as for high-reuse workloads.
        knee = rng.uniform(1.5, 6.0)
        gain = rng.uniform(0.3, 1.0)
        return 1.0 + gain * (1.0 - np.exp(-ways / knee))
    if kind == "streaming":
        # Low-locality workloads lose ground in larger, busier levels.
        slope = rng.uniform(0.02, 0.06)
        return 1.2 - slope * np.log2(ways) * rng.uniform(0.8, 1.2)
    flat = rng.uniform(0.9, 1.1)
    return flat + rng.normal(0.0, 0.01, size=ways.size)


def synthetic_mix(
    n_apps: int = 16, seed: int = 0, phases: int = 2, periods_per_phase: int = 5
) -> Scenario:
    """Random multiprogrammed cache-level game.

    The five shared levels admit 1, 2, 4, 8 and 16 co-runners. Each
    application draws one utility curve per phase from the families in
    ``_utility_curve``. The values are illustrative and not measured.
    """
    rng = np.random.default_rng(seed)
    resources = tuple(ResourceKind(rid, label, slots) for rid, label, slots in CACHE_LEVELS)
    kinds = ("friendly", "friendly", "streaming", "flat")
    apps = []
    for i in range(n_apps):
        ph = []
        for p in range(phases):
            curve = _utility_curve(rng, kinds[int(rng.integers(len(kinds)))])
            vals = {r.id: round(float(max(c, 0.05)), 4) for r, c in zip(resources, curve)}
            ph.append(Phase(p * periods_per_phase, (p + 1) * periods_per_phase, vals))
        apps.append(ApplicationAgent(f"app{i + 1:02d}", tuple(ph)))
    return Scenario(
        name=f"mix{n_apps}",
        resources=resources,
        applications=tuple(apps),
        auction=AuctionConfig(budget_mode="inclusive"),
        shared_resource="R5",
        private_resource="R1",
        description="Synthetic utility curves; illustrative, not measured data.",
    )
