"""Scenario files, trace export and report formatting.

Scenarios are JSON documents::

    {
      "name": "matrix_m",
      "resources": [{"id": "R1", "label": "128kB", "slots": 1}, ...],
      "applications": [
        {"id": "App1", "budget": 2.0, "arrival": 0,
         "phases": [{"periods": 10, "valuations": {"R1": 1.9, ...}}]}
      ],
      "auction": {"epsilon": 0.0019, "budget_mode": "literal",
                  "baseline_mode": "zero", "price_rule": "entry",
                  "reauction": "period", "discount": null},
      "congestion_curves": {"xeon": [1.0, 0.8, ...]},
      "shared_resource": "R5",
      "private_resource": "R2"
    }

An absent ``budget`` means unlimited. A null ``discount`` picks the weight\non past observations adaptively. Unknown keys are rejected.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import asdict, fields
from importlib import resources as _resources
from pathlib import Path
from typing import Any, Mapping

from .auction import QuitRecord
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
    validate_scenario,
)
from .sim import Event, GameTrace, PeriodRecord, detect_convergence

OUTPUT_DIR_ENV = "CONTEND_OUTPUT_DIR"
BUNDLED = ("matrix_m", "hmmer_mcf", "xeon_phi", "mix16")


class ScenarioParseError(ValueError):
    pass


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[str]) -> None:
        super().__init__("invalid scenario:\n  " + "\n  ".join(violations))
        self.violations = violations


def fmt(x: float) -> str:
    """Six significant digits, the format of every printed number."""
    return f"{x:.6g}"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- scenarios ---------------------------------------------------------------

_TOP = {"name", "description", "resources", "applications", "auction",
        "congestion_curves", "shared_resource", "private_resource"}
_RESOURCE = {"id", "label", "slots"}
_APP = {"id", "budget", "arrival", "phases"}
_PHASE = {"periods", "valuations"}
_AUCTION = {f.name for f in fields(AuctionConfig)}


def _check_keys(obj: Any, allowed: set[str], where: str, required: set[str] = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise ScenarioParseError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ScenarioParseError(f"{where}: unknown field '{key}'")
    for key in required:
        if key not in obj:
            raise ScenarioParseError(f"{where}: missing field '{key}'")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioParseError(f"{where}: expected an integer, got {value!r}")
    return value


def scenario_from_dict(doc: Mapping[str, Any], name: str = "scenario") -> Scenario:
    _check_keys(doc, _TOP, "scenario", {"resources", "applications"})
    resources = []
    for k, r in enumerate(doc["resources"]):
        where = f"resources[{k}]"
        _check_keys(r, _RESOURCE, where, {"id", "slots"})
        resources.append(ResourceKind(str(r["id"]), str(r.get("label", r["id"])),
                                      _integer(r["slots"], f"{where}.slots")))
    apps = []
    for k, a in enumerate(doc["applications"]):
        where = f"applications[{k}]"
        _check_keys(a, _APP, where, {"id", "phases"})
        arrival = _integer(a.get("arrival", 0), f"{where}.arrival")
        budget = a.get("budget")
        budget = math.inf if budget is None else _number(budget, f"{where}.budget")
        phases = []
        start = arrival
        for j, ph in enumerate(a["phases"]):
            pw = f"{where}.phases[{j}]"
            _check_keys(ph, _PHASE, pw, {"periods", "valuations"})
            length = _integer(ph["periods"], f"{pw}.periods")
            if not isinstance(ph["valuations"], dict):
                raise ScenarioParseError(f"{pw}.valuations: expected an object")
            vals = {str(rid): _number(v, f"{pw}.valuations.{rid}") for rid, v in ph["valuations"].items()}
            phases.append(Phase(start, start + length, vals))
            start += length
        apps.append(ApplicationAgent(str(a["id"]), tuple(phases), budget=budget, arrival=arrival))
    auction_doc = doc.get("auction", {})
    _check_keys(auction_doc, _AUCTION, "auction")
    numeric = {}
    for key in ("epsilon", "discount"):
        value = auction_doc.get(key)
        numeric[key] = None if value is None else _number(value, f"auction.{key}")
    auction = AuctionConfig(
        **numeric,
        **{k: str(v) for k, v in auction_doc.items() if k not in numeric},
    )
    curves_doc = doc.get("congestion_curves", {})
    if not isinstance(curves_doc, dict):
        raise ScenarioParseError("congestion_curves: expected an object")
    curves = {
        str(rid): tuple(_number(v, f"congestion_curves.{rid}[{i}]") for i, v in enumerate(vals))
        for rid, vals in curves_doc.items()
    }
    return Scenario(
        name=str(doc.get("name", name)),
        resources=tuple(resources),
        applications=tuple(apps),
        auction=auction,
        congestion_curves=curves,
        shared_resource=doc.get("shared_resource"),
        private_resource=doc.get("private_resource"),
        description=str(doc.get("description", "")),
    )


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    apps = []
    for a in scenario.applications:
        entry: dict[str, Any] = {"id": a.id}
        if not math.isinf(a.budget):
            entry["budget"] = a.budget
        if a.arrival:
            entry["arrival"] = a.arrival
        entry["phases"] = [{"periods": ph.duration, "valuations": dict(ph.valuations)} for ph in a.phases]
        apps.append(entry)
    doc: dict[str, Any] = {"name": scenario.name}
    if scenario.description:
        doc["description"] = scenario.description
    doc["resources"] = [{"id": r.id, "label": r.label, "slots": r.slots} for r in scenario.resources]
    doc["applications"] = apps
    doc["auction"] = asdict(scenario.auction)
    if scenario.congestion_curves:
        doc["congestion_curves"] = {k: list(v) for k, v in scenario.congestion_curves.items()}
    for key in ("shared_resource", "private_resource"):
        if getattr(scenario, key) is not None:
            doc[key] = getattr(scenario, key)
    return doc


def resolve_scenario_path(ref: str | os.PathLike) -> Path | None:
    """Map a bundled scenario name to its file; plain paths pass through."""
    path = Path(ref)
    if path.exists():
        return path
    if str(ref) in BUNDLED:
        return Path(str(_resources.files("contend") / "scenarios" / f"{ref}.json"))
    return None


def load_scenario(ref: str | os.PathLike) -> Scenario:
    """Parse and validate a scenario file (or a bundled scenario by name)."""
    path = resolve_scenario_path(ref)
    if path is None:
        raise FileNotFoundError(f"no scenario file or bundled scenario named {str(ref)!r}")
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    scenario = scenario_from_dict(doc, name=Path(path).stem)
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioValidationError(problems)
    return scenario


def save_scenario(scenario: Scenario, path: str | os.PathLike) -> None:
    _atomic_write(Path(path), json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


# -- traces ------------------------------------------------------------------

TABLE_HEADER = ("period", "app", "resource", "bid", "price", "payment", "payoff", "converged")


def trace_table(trace: GameTrace, window: int = 3, tol: float = 1e-6) -> str:
    conv = detect_convergence(trace, window, tol)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for p in trace.periods:
        for aid in p.assignment.holdings:
            rid = p.assignment.resource_of(aid)
            price = p.state.prices[rid] if (rid is not None and p.state is not None) else None
            writer.writerow([
                p.time,
                aid,
                rid or "",
                fmt(p.total_bids.get(aid, 0.0)),
                "" if price is None else fmt(price),
                fmt(p.assignment.payments.get(aid, 0.0)),
                fmt(p.payoffs.get(aid, 0.0)),
                int(conv is not None and p.time >= trace.periods[conv].time),
            ])
    return buf.getvalue()


def _vector_doc(vec: ResourceVector | None):
    return None if vec is None else [list(e) for e in vec.entries]


def _state_doc(state: AuctionState | None):
    if state is None:
        return None
    return {
        "slots": dict(state.slots),
        "prices": dict(state.prices),
        "min_bids": dict(state.min_bids),
        "winners": {k: dict(v) for k, v in state.winners.items()},
        "epsilon": state.epsilon,
        "round": state.round,
    }


def _event_doc(e: Event):
    return {"time": e.time, "kind": e.kind, "app": e.app}


def trace_to_dict(trace: GameTrace) -> dict[str, Any]:
    return {
        "scenario": trace.scenario,
        "seed": trace.seed,
        "events": [_event_doc(e) for e in trace.events],
        "periods": [
            {
                "time": p.time,
                "bids": [[b.bidder, b.resource, b.amount, b.round] for b in p.bids],
                "state": _state_doc(p.state),
                "holdings": {a: _vector_doc(v) for a, v in p.assignment.holdings.items()},
                "payments": dict(p.assignment.payments),
                "payoffs": dict(p.payoffs),
                "performance": dict(p.performance),
                "total_bids": dict(p.total_bids),
                "rounds": p.rounds,
                "quits": {a: list(q) for a, q in p.quits.items()},
                "auctioned": p.auctioned,
                "events": [_event_doc(e) for e in p.events],
            }
            for p in trace.periods
        ],
    }


def trace_from_dict(doc: Mapping[str, Any]) -> GameTrace:
    def vector(v):
        return None if v is None else ResourceVector(tuple(e) for e in v)

    def state(s):
        if s is None:
            return None
        return AuctionState(s["slots"], s["prices"], s["min_bids"],
                            {k: dict(v) for k, v in s["winners"].items()},
                            s["epsilon"], s["round"])

    def event(e):
        return Event(e["time"], e["kind"], e["app"])

    periods = []
    for p in doc["periods"]:
        periods.append(PeriodRecord(
            time=p["time"],
            bids=tuple(Bid(b[0], b[1], b[2], b[3]) for b in p["bids"]),
            state=state(p["state"]),
            assignment=Assignment.build({a: vector(v) for a, v in p["holdings"].items()}, p["payments"]),
            payoffs=p["payoffs"],
            performance=p["performance"],
            total_bids=p["total_bids"],
            rounds=p["rounds"],
            quits={a: QuitRecord(*q) for a, q in p["quits"].items()},
            auctioned=p["auctioned"],
            events=tuple(event(e) for e in p["events"]),
        ))
    return GameTrace(doc["scenario"], doc["seed"], tuple(periods),
                     tuple(event(e) for e in doc["events"]))


def write_trace(trace: GameTrace, path: str | os.PathLike, format: str = "table") -> None:
    """Write ``trace`` atomically as a CSV table or a JSON document."""
    if format == "table":
        text = trace_table(trace)
    elif format == "document":
        text = json.dumps(trace_to_dict(trace), indent=1) + "\n"
    else:
        raise ValueError(f"unknown trace format {format!r}")
    _atomic_write(Path(path), text)


def read_trace(path: str | os.PathLike) -> GameTrace:
    return trace_from_dict(json.loads(Path(path).read_text()))
