"""Failure injection against the compiled dataplane.

simulate_delivery pushes one packet from the source through the emulated
switches with a chosen set of links down and reports who got it.
verify_tolerance sweeps every failure set up to the configured budget and
flags subscribers that should have been reachable (per the installed backup
trees) but were not. depth_hopcounts measures path stretch per failover
depth, and the recovery models turn an outage window into lost packets.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable

from .errors import BudgetExceeded, DataplaneError
from .protection import GroupState
from .topology import Link
from .trees import MulticastTree


@dataclass(frozen=True)
class Delivery:
    subscriber: str
    delivered: bool
    hops: int | None  # switch hops of the first copy to arrive
    copies: int  # host deliveries seen; more than one means duplicates


@dataclass
class DeliveryReport:
    failed: tuple[Link, ...]
    outcomes: dict[str, Delivery]
    unmatched: int  # packets no flow entry wanted
    stray: int  # host deliveries at switches without a subscriber
    loop_guard_tripped: bool = False

    @property
    def all_delivered(self) -> bool:
        return all(o.delivered for o in self.outcomes.values())


def simulate_delivery(
    gs: GroupState,
    failed: Iterable[Link] = (),
    max_hops: int | None = None,
) -> DeliveryReport:
    """Forward one packet from the source with the given links down."""
    fabric = gs.fabric
    fail_set = frozenset(failed)
    if max_hops is None:
        # generous: one traversal of the topology per failover depth
        max_hops = (gs.config.max_failures + 1) * max(len(gs.net.links), 1) + 2
    saved = set(fabric.down)
    fabric.down = set(fail_set)
    arrived: dict[str, list[int]] = {}
    unmatched = 0
    tripped = False
    try:
        queue: deque[tuple[str, int | None, int]] = deque([(gs.source, None, 0)])
        while queue:
            switch, tag, hops = queue.popleft()
            emissions, matched = fabric.forward(switch, gs.installer.group_key, tag)
            if not matched:
                unmatched += 1
                continue
            for port, out_tag in emissions:
                if port.is_host:
                    arrived.setdefault(port.switch, []).append(hops)
                    continue
                if Link(port.switch, port.peer) in fabric.down:
                    continue  # plain outputs do not watch liveness; the wire eats it
                if hops + 1 > max_hops:
                    tripped = True
                    continue
                queue.append((port.peer, out_tag, hops + 1))
    finally:
        fabric.down = saved
    outcomes = {}
    for v in sorted(gs.primary.terminals):
        hits = arrived.pop(v, [])
        outcomes[v] = Delivery(v, bool(hits), min(hits) if hits else None, len(hits))
    stray = sum(len(hits) for hits in arrived.values())
    return DeliveryReport(tuple(sorted(fail_set)), outcomes, unmatched, stray, tripped)


# tolerance sweep ---------------------------------------------------


@dataclass(frozen=True)
class FailureCase:
    failed: tuple[str, ...]
    subscriber: str


@dataclass
class ToleranceReport:
    sets_checked: int = 0
    baseline_ok: bool = True
    unexcused: list[FailureCase] = field(default_factory=list)
    excused: int = 0
    loop_guard_tripped: bool = False

    @property
    def ok(self) -> bool:
        return self.baseline_ok and not self.unexcused and not self.loop_guard_tripped


def expected_deliverable(gs: GroupState, v: str, failed: Iterable[Link]) -> bool:
    """Whether the installed trees structurally cover v for this failure set."""
    return _covered(gs.primary, v, frozenset(failed))


def _covered(tree: MulticastTree, v: str, failed: frozenset[Link]) -> bool:
    if v not in tree.terminals:
        return False
    for x, y in tree.path_to(v):
        if Link(x, y) in failed:
            b = tree.backup.get((x, y))
            return b is not None and _covered(b, v, failed)
    return True


def verify_tolerance(
    gs: GroupState,
    max_failures: int | None = None,
    max_sets: int | None = None,
    on_case: Callable[[tuple[Link, ...], DeliveryReport], None] | None = None,
) -> ToleranceReport:
    """Exhaustively fail every link set up to the budget and check delivery.

    A miss only counts against the result when the backup trees on record
    cover that subscriber for that failure set; gaps protect_join already
    conceded are tallied as excused.
    """
    if max_failures is None:
        max_failures = gs.config.max_failures
    links = sorted(gs.net.links)
    total = sum(math.comb(len(links), k) for k in range(1, max_failures + 1))
    if max_sets is not None and total > max_sets:
        raise BudgetExceeded(f"{total} failure sets exceed the cap of {max_sets}")
    report = ToleranceReport()
    baseline = simulate_delivery(gs)
    if on_case is not None:
        on_case((), baseline)
    report.baseline_ok = baseline.all_delivered and not baseline.loop_guard_tripped
    for k in range(1, max_failures + 1):
        for combo in combinations(links, k):
            rep = simulate_delivery(gs, combo)
            report.sets_checked += 1
            if rep.loop_guard_tripped:
                report.loop_guard_tripped = True
            if on_case is not None:
                on_case(combo, rep)
            for v, outcome in rep.outcomes.items():
                if outcome.delivered:
                    continue
                if expected_deliverable(gs, v, combo):
                    report.unexcused.append(FailureCase(tuple(str(l) for l in combo), v))
                else:
                    report.excused += 1
    return report


# stretch per failover depth ----------------------------------------


def depth_hopcounts(gs: GroupState, max_depth: int | None = None) -> list[float]:
    """Mean delivery hops at each failover depth 0..max_depth.

    Depth k averages over every chain of k nested failures a subscriber is
    protected against: a link on its primary path, then a link on the backup
    path that covers it, and so on. Chains the trees do not cover are left
    out. Raises when a covered chain fails to deliver.
    """
    if max_depth is None:
        max_depth = gs.config.max_failures
    cache: dict[frozenset[Link], DeliveryReport] = {}

    def hops_for(v: str, failed: frozenset[Link]) -> int:
        rep = cache.get(failed)
        if rep is None:
            rep = cache[failed] = simulate_delivery(gs, failed)
        outcome = rep.outcomes[v]
        if not outcome.delivered:
            names = ";".join(str(l) for l in sorted(failed))
            raise DataplaneError(f"covered chain {{{names}}} did not deliver to {v}")
        return outcome.hops or 0

    def chains(tree: MulticastTree, v: str, depth: int, failed: frozenset[Link]):
        if depth == 0:
            yield failed
            return
        if v not in tree.terminals:
            return
        for x, y in tree.path_to(v):
            b = tree.backup.get((x, y))
            if b is None or v not in b.terminals:
                continue
            yield from chains(b, v, depth - 1, failed | {Link(x, y)})

    means: list[float] = []
    for depth in range(max_depth + 1):
        samples = [
            hops_for(v, chain)
            for v in sorted(gs.primary.terminals)
            for chain in chains(gs.primary, v, depth, frozenset())
        ]
        means.append(sum(samples) / len(samples) if samples else float("nan"))
    return means


# recovery time -----------------------------------------------------

RECOVERY_MODES = ("ff", "switch", "restore")


@dataclass(frozen=True)
class RecoveryModel:
    """Analytic outage window per repaired cut.

    ff: local failover, done once the switch detects the dead port.
    switch: controller retargets affected groups after one round trip.
    restore: controller recomputes and reinstalls the affected entries.
    """

    mode: str = "ff"
    detection_ms: float = 0.0
    rtt_ms: float = 0.0
    flowmod_ms: float = 1.0
    compute_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in RECOVERY_MODES:
            raise ValueError(f"unknown recovery mode {self.mode!r}")

    def outage_ms(self, affected_groups: int = 1, entries: int = 1) -> float:
        if self.mode == "ff":
            return self.detection_ms
        if self.mode == "switch":
            return self.detection_ms + self.rtt_ms + self.flowmod_ms * affected_groups
        return self.detection_ms + self.rtt_ms + self.compute_ms + self.flowmod_ms * entries


@dataclass(frozen=True)
class RecoveryReport:
    mode: str
    cuts: int
    outage_ms: float  # per cut
    packets_lost: int
    packets_sent: int | None  # None without a fixed send window


def simulate_recovery(
    model: RecoveryModel,
    cuts: int = 1,
    rate_hz: float = 120.0,
    duration_ms: float | None = None,
    affected_groups: int = 1,
    entries: int = 1,
) -> RecoveryReport:
    """Packets lost to the outage windows of `cuts` repaired link failures."""
    if cuts < 0:
        raise ValueError("cuts must be >= 0")
    outage = model.outage_ms(affected_groups=affected_groups, entries=entries)
    window = outage if duration_ms is None else min(outage, duration_ms)
    lost = cuts * math.floor(window * rate_hz / 1000.0)
    sent = None
    if duration_ms is not None:
        sent = math.floor(duration_ms * rate_hz / 1000.0)
        lost = min(lost, sent)
    return RecoveryReport(model.mode, cuts, outage, lost, sent)
