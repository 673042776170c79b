"""Equilibrium bid shading for multi-unit first-price auctions, and probes.

The candidate symmetric equilibrium for ``n`` bidders with uniform private
values competing for ``m`` identical slots shades each value by
``(n-m)/(n-m+1)``. :func:`best_response_search` tests it numerically: every
opponent plays the candidate strategy and the deviating player's expected
utility is grid-searched. The candidate holds for a single slot. For
``m >= 2`` the true best response bids lower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .auction import run_auction
from .model import Scenario
from .valuation import BeliefTable


def equilibrium_bid(n: int, m: int, v: float) -> float:
    if n <= m:
        raise ValueError(f"need more bidders than slots (n={n}, m={m})")
    if m < 1:
        raise ValueError("m must be at least 1")
    if not 0.0 <= v <= 1.0:
        raise ValueError("v must lie in [0, 1]")
    k = n - m
    return k / (k + 1) * v


def closed_form_utility(n: int, m: int, v: float, b: np.ndarray | float) -> np.ndarray:
    """Expected utility ``((k+1)/k * b) ** k * (v - b)`` with ``k = n - m``.

    Only meaningful while ``(k+1)/k * b <= 1``, i.e. while winning is not yet
    certain.
    """
    k = n - m
    b = np.asarray(b, dtype=float)
    return ((k + 1) / k * b) ** k * (v - b)


@dataclass(frozen=True)
class BestResponse:
    argmax: float
    bids: np.ndarray
    utility: np.ndarray
    stderr: np.ndarray
    samples: int


def _win_thresholds(n: int, m: int, samples: int, rng: np.random.Generator, win_rule: str):
    k = n - m
    shade = k / (k + 1)
    if win_rule == "rank":
        # n - 1 opponents; a bid wins a slot if it beats the m-th highest of them.
        opp = shade * rng.random((samples, n - 1))
        opp.sort(axis=1)
        return opp[:, (n - 1) - m]
    if win_rule == "single_prize":
        # Beat n - m rivals outright; this is the event the closed form integrates.
        return (shade * rng.random((samples, k))).max(axis=1)
    raise ValueError(f"unknown win rule {win_rule!r}")


def best_response_search(
    n: int,
    m: int,
    v: float,
    grid_step: float = 0.01,
    samples: int = 100_000,
    seed: int = 0,
    win_rule: str = "rank",
) -> BestResponse:
    """Monte Carlo expected utility of bidding ``b`` on the grid ``[0, v]``.

    Opponent values are i.i.d. uniform on [0, 1] and opponents bid the
    equilibrium shade of their value. The deviating player is paid
    ``v - b`` on a win and 0 otherwise. ``win_rule="rank"`` awards the
    ``m`` slots to the ``m`` highest of the ``n`` bids. ``"single_prize"``
    makes the player beat ``n - m`` rivals for a single prize, which is the
    event behind :func:`closed_form_utility`.
    """
    if n <= m or m < 1:
        raise ValueError(f"need n > m >= 1 (n={n}, m={m})")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    rng = np.random.default_rng(seed)
    thresholds = np.sort(_win_thresholds(n, m, samples, rng, win_rule))
    bids = np.round(np.arange(0.0, v + grid_step / 2, grid_step), 12)
    bids = bids[bids <= v + 1e-12]
    p_win = np.searchsorted(thresholds, bids, side="left") / samples
    utility = p_win * (v - bids)
    stderr = np.abs(v - bids) * np.sqrt(p_win * (1.0 - p_win) / samples)
    best = int(np.argmax(utility))
    return BestResponse(float(bids[best]), bids, utility, stderr, samples)


def _utility(outcome, app: str, valuations) -> float:
    rid = outcome.assignment.resource_of(app)
    if rid is None:
        return 0.0
    return valuations[app][rid] - outcome.assignment.payments[app]


def paired_utilities(
    scenario: Scenario,
    app: str,
    multiplier: float,
    valuations: dict[str, dict[str, float]] | None = None,
    epsilon: float | None = None,
) -> tuple[float, float]:
    """Utility of ``app`` when bidding as prescribed and with scaled bids.

    Utility is the true valuation of the resource won minus the payment,
    or 0 when the application ends up without a resource.
    """
    if valuations is None:
        valuations = scenario.valuation_matrix(0)
    beliefs = BeliefTable.from_matrix(valuations, scenario.resource_ids)
    truthful = run_auction(scenario, 0, beliefs, epsilon, participants=list(valuations))
    if multiplier == 1.0:
        return _utility(truthful, app, valuations), _utility(truthful, app, valuations)
    scaled = run_auction(
        scenario, 0, beliefs, epsilon, participants=list(valuations),
        bid_scale={app: multiplier},
    )
    return _utility(truthful, app, valuations), _utility(scaled, app, valuations)


def truthfulness_probe(
    scenario: Scenario,
    app: str,
    multiplier: float,
    trials: int = 1,
    seed: int = 0,
    noise: float = 0.0,
    epsilon: float | None = None,
) -> float:
    """Mean utility gain of ``app`` from scaling its bids by ``multiplier``.

    Each trial perturbs the profiled valuations by a relative uniform
    ``noise`` drawn from a generator seeded with ``(seed, trial)``; both
    runs of a pair see the same draw. With ``noise=0`` all trials coincide.
    """
    if not multiplier > 0:
        raise ValueError("multiplier must be positive")
    base = scenario.valuation_matrix(0)
    deltas = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        vals = {
            a: {r: v * (1.0 + noise * rng.uniform(-1.0, 1.0)) for r, v in row.items()}
            for a, row in base.items()
        }
        truthful, scaled = paired_utilities(scenario, app, multiplier, vals, epsilon)
        deltas.append(scaled - truthful)
    return math.fsum(deltas) / len(deltas)


@dataclass(frozen=True)
class ShadingCheck:
    n: int
    m: int
    v: float
    argmax: float
    target: float
    grid_step: float
    max_z: float
    interior_points: int

    @property
    def argmax_ok(self) -> bool:
        return abs(self.argmax - self.target) <= 2 * self.grid_step + 1e-12

    @property
    def curve_ok(self) -> bool:
        return self.max_z <= 3.0

    @property
    def passed(self) -> bool:
        return self.argmax_ok and self.curve_ok


def shading_check(
    n: int,
    m: int,
    v: float,
    samples: int = 100_000,
    grid_step: float = 0.01,
    seed: int = 0,
    win_rule: str = "rank",
) -> ShadingCheck:
    """Compare the simulated best response with the equilibrium shade.

    The curve comparison only uses bids where the closed-form win
    probability lies strictly inside (0, 1). Deviations are measured in
    standard errors of the closed-form probability, so bids with a tiny
    predicted win chance do not divide by zero.
    """
    br = best_response_search(n, m, v, grid_step, samples, seed, win_rule)
    k = n - m
    p0 = np.clip(((k + 1) / k * br.bids) ** k, 0.0, 1.0)
    interior = (p0 > 0) & (p0 < 1)
    se0 = np.abs(v - br.bids) * np.sqrt(p0 * (1 - p0) / samples)
    diff = np.abs(br.utility - closed_form_utility(n, m, v, br.bids))
    mask = interior & (se0 > 0)
    z = diff[mask] / se0[mask]
    return ShadingCheck(
        n, m, v, br.argmax, equilibrium_bid(n, m, v), grid_step,
        float(z.max()) if z.size else 0.0, int(mask.sum()),
    )
