"""Beliefs about resource utility: discounted history averaging and lookups."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .model import ApplicationAgent, ResourceVector, ValuationHistory

_TIME_TOL = 1e-9


class ObservationOrderError(ValueError):
    """Observation time not after the last sample, or off the auction grid."""


class ApplicationFinished(Exception):
    """Raised when a valuation is requested at or after the last phase end."""


@dataclass(frozen=True)
class DiscountPolicy:
    """How the weight on past observations is chosen.

    ``mode="adaptive"`` derives it from the sample statistics (squared mean
    over population variance), clamped to ``[clamp_min, clamp_max]``.
    ``mode="fixed"`` always returns ``delta``.
    """

    mode: str = "adaptive"
    delta: float = 1.0
    clamp_min: float = 0.0
    clamp_max: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown discount mode {self.mode!r}")
        if not 0.0 <= self.clamp_min <= self.clamp_max <= 1.0:
            raise ValueError("need 0 <= clamp_min <= clamp_max <= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("fixed delta must lie in [0, 1]")

    @classmethod
    def fixed(cls, delta: float) -> "DiscountPolicy":
        return cls(mode="fixed", delta=delta)


def _on_grid(t: float, period: float) -> bool:
    k = t / period
    return abs(k - round(k)) <= _TIME_TOL


def record_observation(
    history: ValuationHistory, t: float, value: float, period: float = 1.0
) -> ValuationHistory:
    """Return ``history`` extended with the sample ``(t, value)``."""
    if not _on_grid(t, period):
        raise ObservationOrderError(f"time {t} is not a multiple of the period {period}")
    last = history.last_time
    if last is not None and t <= last + _TIME_TOL:
        raise ObservationOrderError(f"time {t} does not follow last sample time {last}")
    if not math.isfinite(value):
        raise ValueError("observed value must be finite")
    return replace(history, samples=history.samples + ((float(t), float(value)),))


def belief_update(
    history: ValuationHistory, W: float, delta: float, period: float = 1.0
) -> float:
    """Discount-weighted average of the samples up to time ``W``.

    The sample at ``nT`` gets weight ``delta ** (W/T - n)``; grid points with
    no sample are left out of both sums. ``0 ** 0`` is taken as 1, so the
    latest sample always carries weight.
    """
    if not history.samples:
        raise ValueError("belief_update needs at least one sample")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if W + _TIME_TOL < history.samples[-1][0]:
        raise ValueError("W precedes the latest sample")
    num = []
    den = []
    for t, v in history.samples:
        lag = round((W - t) / period)
        w = delta ** lag
        num.append(w * v)
        den.append(w)
    total = math.fsum(den)
    if total == 0.0:
        # delta == 0 and no sample exactly at W: only the newest one counts.
        return history.samples[-1][1]
    belief = math.fsum(num) / total
    lo, hi = min(history.values), max(history.values)
    return min(max(belief, lo), hi)


def discount_factor(history: ValuationHistory, policy: DiscountPolicy) -> float:
    if policy.mode == "fixed":
        return policy.delta
    values = np.asarray(history.values, dtype=float)
    if values.size == 0:
        raise ValueError("discount_factor needs at least one sample")
    var = float(np.var(values))
    if var <= 1e-15 * max(1.0, float(np.mean(values)) ** 2):
        return policy.clamp_max
    ratio = float(np.mean(values)) ** 2 / var
    return min(max(ratio, policy.clamp_min), policy.clamp_max)


@dataclass(frozen=True)
class BeliefTable:
    """Point beliefs ``v_i(t, m)`` of each application for resource vectors.

    ``baseline`` gives the value of holding nothing; it defaults to 0.
    """

    resource_ids: tuple[str, ...]
    values: Mapping[tuple[str, ResourceVector], float]
    baseline: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_matrix(
        cls,
        matrix: Mapping[str, Mapping[str, float]],
        resource_ids: Iterable[str],
        baseline: Mapping[str, float] | None = None,
    ) -> "BeliefTable":
        values = {
            (aid, ResourceVector.single(rid)): float(v)
            for aid, row in matrix.items()
            for rid, v in row.items()
        }
        return cls(tuple(resource_ids), values, dict(baseline or {}))

    def value(self, app_id: str, vector: ResourceVector) -> float:
        if vector.is_empty:
            return self.baseline.get(app_id, 0.0)
        try:
            return self.values[(app_id, vector)]
        except KeyError:
            raise KeyError(f"no belief for application {app_id} on {vector}") from None

    def row(self, app_id: str) -> dict[str, float]:
        return {rid: self.value(app_id, ResourceVector.single(rid)) for rid in self.resource_ids}

    def scaled(self, app_id: str, factor: float) -> "BeliefTable":
        values = {k: (v * factor if k[0] == app_id else v) for k, v in self.values.items()}
        return replace(self, values=values)


def differential_valuation(
    app: ApplicationAgent | str,
    t: float,
    current: ResourceVector,
    resource: str,
    beliefs: BeliefTable,
) -> float:
    """Gain in believed value from moving ``current`` onto ``resource``."""
    if resource not in beliefs.resource_ids:
        raise KeyError(f"unknown resource {resource!r}")
    app_id = app if isinstance(app, str) else app.id
    target = current.swap_to(resource)
    if target == current:
        return 0.0
    return beliefs.value(app_id, target) - beliefs.value(app_id, current)


def phase_valuation(app: ApplicationAgent, t: float, resource: str) -> float:
    """Profiled utility of ``resource`` in the phase that contains ``t``."""
    if t >= app.finish:
        raise ApplicationFinished(f"application {app.id} finished at {app.finish}")
    k = app.phase_index(t)
    if k is None:
        raise ValueError(f"time {t} precedes the first phase of {app.id}")
    try:
        return app.phases[k].valuations[resource]
    except KeyError:
        raise KeyError(f"unknown resource {resource!r}") from None


def baseline_value(app: ApplicationAgent, t: float, mode: str) -> float:
    """Value of holding nothing: 0, or the mean profiled utility of the phase."""
    if mode == "zero":
        return 0.0
    if mode == "mean":
        vals = list(app.phases[app.phase_index(t)].valuations.values())
        return math.fsum(vals) / len(vals) if vals else 0.0
    raise ValueError(f"unknown baseline mode {mode!r}")


def seed_histories(
    app: ApplicationAgent, t: float
) -> dict[tuple[str, ResourceVector], ValuationHistory]:
    """Fresh per-resource histories holding the profiled phase values at ``t``."""
    k = app.phase_index(t)
    if k is None:
        raise ApplicationFinished(f"application {app.id} is not running at {t}")
    out = {}
    for rid, v in app.phases[k].valuations.items():
        key = (app.id, ResourceVector.single(rid))
        out[key] = ValuationHistory(key, ((float(t), float(v)),))
    return out
