"""Deterministic discrete-event clock and network.

Events execute in (timestamp, insertion order); the clock never moves
backward.  Links have a fixed latency and a list of scheduled outage
windows.  A batch submitted while its link is down is not lost: delivery
is retried the moment the outage window closes.  Delivered bytes are
charged to the metric window containing the delivery instant, so the
per-window byte totals always sum to the bytes actually delivered.

Link capacity is not modeled: there is no queuing delay, so traffic
peaks are measured rather than shaped.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable

from .errors import LivelockError, ScenarioError
from .shipping import Batch

Link = tuple[int, int]

# Default event budget for run_until_quiescent; generous for any bundled
# scenario, small enough to abort a runaway loop in seconds.
DEFAULT_MAX_EVENTS = 10_000_000


@dataclass(frozen=True, slots=True)
class LinkSpec:
    """One directed link: fixed latency plus scheduled outage windows.

    Outages are half-open [start, end) intervals, sorted and
    non-overlapping.
    """

    latency_ms: int
    partitions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ScenarioError(f"link latency must be non-negative: {self.latency_ms}")
        prev_end = None
        for start, end in self.partitions:
            if start >= end:
                raise ScenarioError(f"empty partition interval [{start}, {end})")
            if prev_end is not None and start < prev_end:
                raise ScenarioError(f"overlapping partition intervals at {start}")
            prev_end = end

    def down_until(self, now: int) -> int | None:
        """End of the outage covering ``now``, or None if the link is up."""
        for start, end in self.partitions:
            if start <= now < end:
                return end
            if start > now:
                break
        return None


@dataclass(slots=True)
class LinkStats:
    """Per-window delivery accounting for one link."""

    bytes: dict[int, int] = field(default_factory=dict)
    batches: dict[int, int] = field(default_factory=dict)
    max_batch_bytes: dict[int, int] = field(default_factory=dict)
    total_bytes: int = 0
    total_batches: int = 0


class SimNet:
    """Single-threaded simulated network and event loop."""

    def __init__(self, window_ms: int = 1000,
                 max_events: int = DEFAULT_MAX_EVENTS) -> None:
        if window_ms <= 0:
            raise ScenarioError(f"metric window must be positive: {window_ms}")
        self.now = 0
        self.window_ms = window_ms
        self.max_events = max_events
        self.links: dict[Link, LinkSpec] = {}
        self.stats: dict[Link, LinkStats] = {}
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._order = itertools.count()
        self._events_run = 0

    def add_link(self, src: int, dst: int, spec: LinkSpec) -> None:
        self.links[(src, dst)] = spec
        self.stats[(src, dst)] = LinkStats()

    def schedule(self, at_ms: int, fn: Callable[[], None]) -> None:
        """Queue ``fn`` to run at ``at_ms``; same-instant events run in
        the order they were scheduled."""
        if at_ms < self.now:
            raise ValueError(f"cannot schedule at {at_ms}, clock is at {self.now}")
        heapq.heappush(self._queue, (at_ms, next(self._order), fn))

    def submit(self, batch: Batch, deliver: Callable[[Batch], None]) -> None:
        """Hand a batch to the network for delivery to its destination.

        Up link: delivered after the link latency.  Down link: retried
        when the current outage window ends (at-least-once from the
        sender's view; receivers apply idempotently).
        """
        link = (batch.source, batch.destination)
        spec = self.links.get(link)
        if spec is None:
            raise ScenarioError(f"no link from cluster {batch.source} to {batch.destination}")
        self._try_send(link, spec, batch, deliver)

    def _try_send(self, link: Link, spec: LinkSpec, batch: Batch,
                  deliver: Callable[[Batch], None]) -> None:
        retry_at = spec.down_until(self.now)
        if retry_at is not None:
            self.schedule(retry_at, lambda: self._try_send(link, spec, batch, deliver))
            return

        def arrive() -> None:
            self._charge(link, batch)
            deliver(batch)

        self.schedule(self.now + spec.latency_ms, arrive)

    def _charge(self, link: Link, batch: Batch) -> None:
        window = self.now // self.window_ms
        stats = self.stats[link]
        stats.bytes[window] = stats.bytes.get(window, 0) + batch.total_bytes
        stats.batches[window] = stats.batches.get(window, 0) + 1
        if batch.total_bytes > stats.max_batch_bytes.get(window, 0):
            stats.max_batch_bytes[window] = batch.total_bytes
        stats.total_bytes += batch.total_bytes
        stats.total_batches += 1

    @property
    def events_pending(self) -> bool:
        return bool(self._queue)

    def run_until_quiescent(self) -> int:
        """Run events until the queue empties; returns the final clock.

        Aborts with a diagnostic once the cumulative event count passes
        the configured budget, which catches self-perpetuating loops.
        """
        while self._queue:
            at_ms, _, fn = heapq.heappop(self._queue)
            self.now = at_ms
            self._events_run += 1
            if self._events_run > self.max_events:
                raise LivelockError(
                    f"event budget of {self.max_events} exceeded at t={self.now}ms; "
                    f"{len(self._queue)} events still queued")
            fn()
        return self.now
