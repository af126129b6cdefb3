"""The simulation driver.

Builds clusters, links and sessions from a scenario, schedules the
workload into the event loop, runs to quiescence, then drains
stragglers until nothing moves anywhere.  The timer for lag validation
(or the plain-mode poll) is armed lazily: one pending tick event at a
time, on a grid of multiples of the tick interval, and only while some
source actually has timer-driven work.  That keeps idle stretches free
of events without changing when anything ships.

Shipped batches are tracked as lightweight records (creation, delivery,
trigger, involved containers and the post-shipment arrival counters),
which is what the structural tests inspect.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from .blocks import ClientSession
from .cluster import ClusterNode
from .metrics import MetricsCollector, Row, write_csv, write_summary
from .scenario import Scenario
from .shipping import Batch, ReplicationSource
from .simnet import SimNet
from .workload import BlockEndOp, BlockStartOp, ReadOp, WriteOp, generate

Link = tuple[int, int]


@dataclass(slots=True)
class BatchRecord:
    """Trace entry for one shipped batch."""

    batch: Batch
    delivered_ms: int = -1
    # (container, arrivals counter) for each involved container, sampled
    # immediately after the batch was cut.
    counters_after: tuple[tuple[str, int], ...] = ()

    @property
    def created_ms(self) -> int:
        return self.batch.created_ms

    @property
    def link(self) -> Link:
        return self.batch.source, self.batch.destination


@dataclass(slots=True)
class ClusterTally:
    """Per-cluster outcome counts of remote batch application."""

    applied: int = 0
    stale_discarded: int = 0
    duplicates: int = 0
    echoes: int = 0


@dataclass(slots=True)
class RunResult:
    scenario_name: str
    rows: list[Row]
    summary: dict
    batches: list[BatchRecord]
    digests: dict[int, str]
    tallies: dict[int, ClusterTally]
    final_ms: int
    ops_per_sec: float
    total_shipped_bytes: int
    total_shipped_updates: int
    csv_path: Path | None = None
    summary_path: Path | None = None


class Simulation:
    """One configured run; call run() exactly once."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.net = SimNet(scenario.window_ms, scenario.max_events)
        for (src, dst), spec in scenario.links.items():
            self.net.add_link(src, dst, spec)
        self.clusters: dict[int, ClusterNode] = {}
        for cid in scenario.clusters:
            peers = [dst for (src, dst) in scenario.links if src == cid]
            self.clusters[cid] = ClusterNode(
                cid, peers, scenario.bounds, scenario.default_bound,
                mode=scenario.mode, coalesce=scenario.coalesce,
                now_fn=lambda: self.net.now, on_ship=self._on_ship)
        self.sessions = {cid: ClientSession(node) for cid, node in self.clusters.items()}
        self.metrics = MetricsCollector(scenario.window_ms)
        self.tallies = {cid: ClusterTally() for cid in scenario.clusters}
        self.batches: list[BatchRecord] = []
        self._records: dict[int, BatchRecord] = {}
        self._tick_armed = False
        self._tick_grid = scenario.poll_interval_ms if scenario.mode == "plain" \
            else scenario.tick_ms
        # Timers only matter for the plain poll or an active lag bound;
        # otherwise skip the per-arrival arming check entirely.
        self._tick_possible = scenario.mode == "plain" \
            or scenario.default_bound.lag_ms > 0 \
            or any(b.lag_ms > 0 for b in scenario.bounds.values())
        self._client_ops = 0
        self.total_shipped_bytes = 0
        self.total_shipped_updates = 0

    # -- shipping and delivery -----------------------------------------

    def _on_ship(self, source: ReplicationSource, batch: Batch) -> None:
        involved = sorted({u.container for u in batch.updates}, key=str)
        record = BatchRecord(batch, counters_after=tuple(
            (str(cid), source.state_for(cid).arrivals) for cid in involved))
        self.batches.append(record)
        self._records[id(batch)] = record
        self.total_shipped_bytes += batch.total_bytes
        self.total_shipped_updates += len(batch.updates)
        self.net.submit(batch, lambda delivered, src=source: self._deliver(src, delivered))

    def _deliver(self, source: ReplicationSource, batch: Batch) -> None:
        now = self.net.now
        self._records[id(batch)].delivered_ms = now
        tally = self.tallies[batch.destination]
        tally.echoes += sum(1 for u in batch.updates if u.origin == batch.destination)
        report = self.clusters[batch.destination].apply_remote(batch)
        source.acknowledge(batch)
        tally.applied += report.applied
        tally.stale_discarded += report.stale_discarded
        tally.duplicates += report.duplicates
        self.metrics.note_delivery((batch.source, batch.destination), batch, now)
        self._sample_pending()
        self._arm_tick()

    # -- timers ---------------------------------------------------------

    def _arm_tick(self) -> None:
        if self._tick_armed or not self._tick_possible:
            return
        if not any(node.has_timer_work() for node in self.clusters.values()):
            return
        next_tick = (self.net.now // self._tick_grid + 1) * self._tick_grid
        self.net.schedule(next_tick, self._tick_event)
        self._tick_armed = True

    def _tick_event(self) -> None:
        self._tick_armed = False
        for cid in sorted(self.clusters):
            self.clusters[cid].tick(self.net.now)
        self._sample_pending()
        self._arm_tick()

    # -- workload -------------------------------------------------------

    def _apply_ops(self, group: list[tuple[int, object]]) -> None:
        for origin, op in group:
            session = self.sessions[origin]
            if isinstance(op, WriteOp):
                session.put(op.container, op.key, op.value)
                self._client_ops += 1
            elif isinstance(op, ReadOp):
                session.read(op.container, op.key)
                self._client_ops += 1
            elif isinstance(op, BlockStartOp):
                session.start_block(op.mode)
            elif isinstance(op, BlockEndOp):
                session.end_block()
            self._sample_pending()
        self._arm_tick()

    def _sample_pending(self) -> None:
        now = self.net.now
        for node in self.clusters.values():
            for peer, source in node.sources.items():
                self.metrics.sample_pending((node.cluster_id, peer),
                                            source.cache.total_pending_count, now)

    # -- the run --------------------------------------------------------

    def run(self) -> RunResult:
        started = time.perf_counter()
        self._schedule_workload()
        self.net.run_until_quiescent()
        # Straggler flush: sources may refill each other through relays,
        # so drain repeatedly until a full pass moves nothing.
        while True:
            shipped = 0
            for cid in sorted(self.clusters):
                shipped += self.clusters[cid].final_drain(self.net.now)
            if shipped == 0 and not self.net.events_pending:
                break
            self.net.run_until_quiescent()
        elapsed = max(time.perf_counter() - started, 1e-9)

        ops_per_sec = self._client_ops / elapsed
        digests = {cid: node.digest() for cid, node in self.clusters.items()}
        rows = self.metrics.build_rows(self.net)
        summary = self._summarize(rows, digests, ops_per_sec)
        return RunResult(
            scenario_name=self.scenario.name, rows=rows, summary=summary,
            batches=self.batches, digests=digests, tallies=self.tallies,
            final_ms=self.net.now, ops_per_sec=ops_per_sec,
            total_shipped_bytes=self.total_shipped_bytes,
            total_shipped_updates=self.total_shipped_updates,
        )

    def _schedule_workload(self) -> None:
        group: list[tuple[int, object]] = []
        group_at = None
        for at_ms, origin, op in generate(self.scenario.workload):
            if group_at is None:
                group_at = at_ms
            elif at_ms != group_at:
                self._schedule_group(group_at, group)
                group, group_at = [], at_ms
            group.append((origin, op))
        if group:
            self._schedule_group(group_at, group)

    def _schedule_group(self, at_ms: int, group: list[tuple[int, object]]) -> None:
        self.net.schedule(at_ms, lambda g=group: self._apply_ops(g))

    def _summarize(self, rows: list[Row], digests: dict[int, str],
                   ops_per_sec: float) -> dict:
        pending_peaks: dict[str, int] = {}
        for node in self.clusters.values():
            for source in node.sources.values():
                for cid, peak in source.cache.peak_pending.items():
                    name = str(cid)
                    if peak > pending_peaks.get(name, 0):
                        pending_peaks[name] = peak
        return {
            "scenario": self.scenario.name,
            "mode": self.scenario.mode,
            "seed": self.scenario.workload.seed,
            "window_ms": self.scenario.window_ms,
            "final_ms": self.net.now,
            "operations": self._client_ops,
            "workload_updates": self.scenario.workload.total_updates,
            "shipped_updates": self.total_shipped_updates,
            "total_bytes": sum(r.bytes for r in rows),
            "total_batches": sum(r.batches for r in rows),
            "peak_window_bytes": max((r.bytes for r in rows), default=0),
            "max_batch_bytes": max((r.max_batch_bytes for r in rows), default=0),
            "max_staleness_ms": self.metrics.max_staleness_ms,
            "pending_max_per_container": pending_peaks,
            "digests": {str(cid): digest for cid, digest in sorted(digests.items())},
            "applied": {str(cid): t.applied for cid, t in sorted(self.tallies.items())},
            "stale_discarded": {str(cid): t.stale_discarded
                                for cid, t in sorted(self.tallies.items())},
            "duplicates": {str(cid): t.duplicates for cid, t in sorted(self.tallies.items())},
            "echoes": {str(cid): t.echoes for cid, t in sorted(self.tallies.items())},
            "ops_per_sec": round(ops_per_sec, 2),
        }


def run_scenario(scenario: Scenario, out_dir: str | Path = ".") -> RunResult:
    """Run a scenario and write its CSV and JSON summary into out_dir."""
    result = Simulation(scenario).run()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.csv_path = out / scenario.csv_name
    result.summary_path = out / scenario.summary_name
    write_csv(result.csv_path, result.rows)
    write_summary(result.summary_path, result.summary)
    return result
