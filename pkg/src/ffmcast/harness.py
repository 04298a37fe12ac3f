"""Scenario driver: membership scripts, replayed joins, metrics, CSV output.

A scenario is a JSON object {"source": node, "events": [{"op": ..., "arg": ...}]}
with ops join, leave (arg: node), fail, restore (arg: link "a-b"), inject
(send one packet under the current link state) and wait (accepted, ignored;
the model has no clock). Metrics are snapshotted before the first event and
after every membership change.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import TopologyError
from .failsim import DeliveryReport, depth_hopcounts, simulate_delivery
from .protection import GroupState, ProtectionConfig, protect_join, protect_leave
from .topology import Link, Network, complete_graph, geant

EVENT_OPS = ("join", "leave", "fail", "restore", "inject", "wait")


@dataclass(frozen=True)
class Event:
    op: str
    arg: str | None = None


@dataclass(frozen=True)
class Scenario:
    source: str
    events: tuple[Event, ...]


def load_scenario(source: Mapping | str | Path) -> Scenario:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    if not isinstance(data, Mapping):
        raise ValueError("scenario must be a JSON object")
    extra = set(data) - {"source", "events"}
    if extra:
        raise ValueError(f"unexpected scenario keys: {sorted(extra)}")
    src = data.get("source")
    if not isinstance(src, str) or not src:
        raise ValueError("scenario needs a non-empty 'source'")
    events = []
    for i, raw in enumerate(data.get("events", [])):
        if not isinstance(raw, Mapping) or "op" not in raw:
            raise ValueError(f"event {i} needs an 'op'")
        op = raw["op"]
        if op not in EVENT_OPS:
            raise ValueError(f"event {i}: unknown op {op!r}")
        arg = raw.get("arg")
        if op in ("join", "leave", "fail", "restore") and not isinstance(arg, str):
            raise ValueError(f"event {i}: op {op!r} needs a string 'arg'")
        events.append(Event(op, arg if isinstance(arg, str) else None))
    return Scenario(src, tuple(events))


def parse_link(net: Network, name: str) -> Link:
    """Resolve a link named 'a-b' against the topology."""
    for i, ch in enumerate(name):
        if ch != "-":
            continue
        a, b = name[:i], name[i + 1 :]
        if a and b and a in net and b in net:
            link = Link(a, b)
            if link in net.links:
                return link
    raise TopologyError(f"unknown link {name!r}")


# metrics -----------------------------------------------------------


@dataclass(frozen=True)
class MetricsSnapshot:
    index: int
    event: str
    subscribers: int
    tags: int
    flows_total: int
    groups_total: int
    join_calls: int
    flows_by_switch: tuple[tuple[str, int], ...]
    groups_by_switch: tuple[tuple[str, int], ...]


def take_snapshot(gs: GroupState, index: int, event: str) -> MetricsSnapshot:
    flows = gs.fabric.flow_counts()
    groups = gs.fabric.group_counts()
    return MetricsSnapshot(
        index=index,
        event=event,
        subscribers=len(gs.primary.terminals),
        tags=gs.tags_allocated,
        flows_total=gs.fabric.total_flows(),
        groups_total=gs.fabric.total_groups(),
        join_calls=gs.join_calls,
        flows_by_switch=tuple((n, sum(per)) for n, per in sorted(flows.items()) if sum(per)),
        groups_by_switch=tuple((n, c) for n, c in sorted(groups.items()) if c),
    )


@dataclass
class RunResult:
    gs: GroupState
    snapshots: list[MetricsSnapshot] = field(default_factory=list)
    injections: list[tuple[tuple[Link, ...], DeliveryReport]] = field(default_factory=list)
    rejected_joins: list[str] = field(default_factory=list)


def run_scenario(net: Network, scenario: Scenario, config: ProtectionConfig | None = None) -> RunResult:
    gs = GroupState(net, scenario.source, config)
    result = RunResult(gs)
    result.snapshots.append(take_snapshot(gs, 0, "init"))
    for event in scenario.events:
        if event.op == "join":
            if not protect_join(gs, event.arg):
                result.rejected_joins.append(event.arg)
            result.snapshots.append(take_snapshot(gs, len(result.snapshots), f"join:{event.arg}"))
        elif event.op == "leave":
            protect_leave(gs, event.arg)
            result.snapshots.append(take_snapshot(gs, len(result.snapshots), f"leave:{event.arg}"))
        elif event.op == "fail":
            gs.fabric.set_link_state(parse_link(net, event.arg), up=False)
        elif event.op == "restore":
            gs.fabric.set_link_state(parse_link(net, event.arg), up=True)
        elif event.op == "inject":
            down = tuple(sorted(gs.fabric.down))
            result.injections.append((down, simulate_delivery(gs, down)))
        # wait: nothing to advance
    return result


# replayed join sweeps ----------------------------------------------

PRESETS = ("complete", "geant")


@dataclass(frozen=True)
class GeoreplayResult:
    preset: str
    strategy: str
    max_failures: int
    source: str
    subscribers: int
    repetitions: int
    depths: tuple[tuple[float, ...], ...]  # per repetition, indexed by depth
    mean_depths: tuple[float, ...]
    tags: tuple[int, ...]
    flows_total: tuple[int, ...]
    groups_total: tuple[int, ...]
    max_groups_per_switch: tuple[int, ...]
    join_calls: tuple[int, ...]


def georeplay(
    preset: str,
    strategy: str,
    max_failures: int,
    seed: int = 0,
    repetitions: int = 5,
    n: int | None = None,
    source: str | None = None,
) -> GeoreplayResult:
    """Join every node in shuffled order, once per repetition, and measure.

    The complete preset defaults its source to the highest node id so tie
    breaks do not pin the source; the geant preset defaults to AT.
    """
    if preset == "complete":
        net = complete_graph(n or 30)
        src = source or max(net.nodes)
    elif preset == "geant":
        net = geant()
        src = source or "AT"
    else:
        raise ValueError(f"unknown preset {preset!r} (expected one of {PRESETS})")
    config = ProtectionConfig(strategy=strategy, max_failures=max_failures)
    others = [v for v in net.nodes if v != src]
    depths: list[tuple[float, ...]] = []
    tags: list[int] = []
    flows: list[int] = []
    groups: list[int] = []
    max_groups: list[int] = []
    calls: list[int] = []
    for rep in range(repetitions):
        order = list(others)
        random.Random(seed * 10007 + rep).shuffle(order)
        gs = GroupState(net, src, config)
        for v in order:
            protect_join(gs, v)
        depths.append(tuple(depth_hopcounts(gs)))
        tags.append(gs.tags_allocated)
        flows.append(gs.fabric.total_flows())
        groups.append(gs.fabric.total_groups())
        max_groups.append(max(gs.fabric.group_counts().values(), default=0))
        calls.append(gs.join_calls)
    mean = tuple(sum(col) / len(col) for col in zip(*depths))
    return GeoreplayResult(
        preset=preset,
        strategy=strategy,
        max_failures=max_failures,
        source=src,
        subscribers=len(others),
        repetitions=repetitions,
        depths=tuple(depths),
        mean_depths=mean,
        tags=tuple(tags),
        flows_total=tuple(flows),
        groups_total=tuple(groups),
        max_groups_per_switch=tuple(max_groups),
        join_calls=tuple(calls),
    )


@dataclass(frozen=True)
class CapacityReport:
    limit: int
    worst: int
    over: tuple[tuple[str, int], ...]

    @property
    def ok(self) -> bool:
        return not self.over


def capacity_check(gs: GroupState, limit: int = 32) -> CapacityReport:
    """Compare per-switch group usage against a hardware table limit."""
    counts = gs.fabric.group_counts()
    worst = max(counts.values(), default=0)
    over = tuple((n, c) for n, c in sorted(counts.items()) if c > limit)
    return CapacityReport(limit, worst, over)


# CSV ---------------------------------------------------------------


def write_metrics_csv(path: str | Path, snapshots: Iterable[MetricsSnapshot]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["snapshot", "event", "metric", "scope", "value"])
        for s in snapshots:
            w.writerow([s.index, s.event, "subscribers", "total", s.subscribers])
            w.writerow([s.index, s.event, "tags", "total", s.tags])
            w.writerow([s.index, s.event, "flows", "total", s.flows_total])
            w.writerow([s.index, s.event, "groups", "total", s.groups_total])
            w.writerow([s.index, s.event, "join_calls", "total", s.join_calls])
            for node, count in s.flows_by_switch:
                w.writerow([s.index, s.event, "flows", node, count])
            for node, count in s.groups_by_switch:
                w.writerow([s.index, s.event, "groups", node, count])


def delivery_rows(failed: tuple[Link, ...], report: DeliveryReport) -> list[list]:
    name = ";".join(str(l) for l in sorted(failed))
    rows = []
    for v in sorted(report.outcomes):
        o = report.outcomes[v]
        rows.append([
            name,
            v,
            1 if o.delivered else 0,
            "" if o.hops is None else o.hops,
            max(o.copies - 1, 0),
        ])
    return rows


def write_deliveries_csv(path: str | Path, rows: Iterable[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["failure_set", "subscriber", "delivered", "hopcount", "duplicates"])
        for row in rows:
            w.writerow(row)
