"""Divergence bounds and per-container replication state.

A replicated data container is allowed to drift from its remote copies
along three independent dimensions, each with its own limit:

* ``lag_ms``   - maximum time between shipments of the container,
* ``pending``  - maximum number of locally accumulated updates,
* ``drift``    - maximum absolute difference between a key's current
  numeric value and the value last shipped for that key.

A limit of zero disables that dimension.  A bound with every dimension
disabled means the container is replicated immediately, one update at a
time.  The shipping engine evaluates the active dimensions on every
arriving update (and the lag dimension again on a periodic timer); any
single dimension tripping causes the container's whole pending queue to
be shipped as one batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Fixed per-update overhead used for byte accounting, covering the
# fixed-width fields of the wire record (see shipping.encode_batch):
# u16 key length + u32 value length + u64 wall_ms + u32 origin +
# u64 seq + u64 block id.
UPDATE_OVERHEAD_BYTES = 34


@dataclass(frozen=True, slots=True, order=True)
class ContainerId:
    """Identity of a replicated data container, written ``table:family``."""

    table: str
    family: str

    def __post_init__(self) -> None:
        if not self.table or not self.family:
            raise ValueError(f"container parts must be non-empty: {self.table!r}:{self.family!r}")
        if ":" in self.table or ":" in self.family:
            raise ValueError(f"container parts may not contain ':': {self.table!r}, {self.family!r}")

    @classmethod
    def parse(cls, text: str) -> ContainerId:
        """Parse the canonical ``table:family`` form (exactly one colon)."""
        parts = text.split(":")
        if len(parts) != 2:
            raise ValueError(f"container id must be 'table:family': {text!r}")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return f"{self.table}:{self.family}"


@dataclass(frozen=True, slots=True)
class Bound:
    """Per-container divergence limit.  Zero disables a dimension."""

    lag_ms: int = 0
    pending: int = 0
    drift: float = 0.0

    def __post_init__(self) -> None:
        if self.lag_ms < 0 or self.pending < 0 or self.drift < 0:
            raise ValueError(f"bound dimensions must be non-negative: {self}")

    @property
    def immediate(self) -> bool:
        """True when every dimension is disabled: ship on every update."""
        return self.lag_ms == 0 and self.pending == 0 and self.drift == 0.0


IMMEDIATE = Bound()


@dataclass(slots=True)
class Update:
    """One pending edit as carried through caches, batches and the wire."""

    container: ContainerId
    key: str
    value: bytes
    wall_ms: int
    origin: int
    seq: int
    block: int | None = None
    numeric: float | None = None
    size_bytes: int = 0

    def __post_init__(self) -> None:
        if self.numeric is None:
            self.numeric = parse_numeric(self.value)
        if self.size_bytes == 0:
            self.size_bytes = update_size(self.key, self.value)


def parse_numeric(value: bytes) -> float | None:
    """Float value of a payload that encodes a number, else None."""
    try:
        return float(value)
    except (ValueError, UnicodeDecodeError):
        return None


def update_size(key: str, value: bytes) -> int:
    """Accounted size of one update: key + value + fixed overhead."""
    return len(key.encode("utf-8")) + len(value) + UPDATE_OVERHEAD_BYTES


@dataclass(slots=True)
class ContainerState:
    """Live counters tracked against one container's bound.

    ``arrivals`` counts updates seen since the container last shipped and
    always stays below an active pending limit (it resets in the same
    step it reaches the limit).  ``shipped_value`` remembers, per key,
    the numeric payload most recently shipped, for drift comparisons.
    """

    arrivals: int = 0
    last_ship_ms: int = 0
    shipped_value: dict[str, float] = field(default_factory=dict)
    pending_bytes: int = 0

    def record_arrival(self, bound: Bound) -> bool:
        """Count one arriving update against the pending limit.

        Returns True when the update must be replicated: either the
        limit is disabled (no holding) or the incremented counter
        reached it, in which case the counter resets to zero.
        """
        if bound.pending == 0:
            return True
        self.arrivals += 1
        if self.arrivals >= bound.pending:
            self.arrivals = 0
            return True
        return False

    def lag_expired(self, bound: Bound, now: int, pending: int) -> bool:
        """True when updates are pending and the shipment lag limit is up.

        Inclusive at the boundary: trips exactly when the elapsed time
        reaches ``lag_ms``.  Does not mutate; the shipping path advances
        ``last_ship_ms``.
        """
        if bound.lag_ms == 0 or pending <= 0:
            return False
        return now - self.last_ship_ms >= bound.lag_ms

    def drift_exceeded(self, bound: Bound, update: Update) -> bool:
        """True when a numeric payload moved at least ``drift`` away from
        the value last shipped for the same key.

        Non-numeric payloads and keys with no shipped history never trip.
        """
        if bound.drift == 0.0 or update.numeric is None:
            return False
        last = self.shipped_value.get(update.key)
        if last is None:
            return False
        return abs(update.numeric - last) >= bound.drift

    def should_ship(self, bound: Bound, update: Update, now: int) -> bool:
        """Evaluate every active dimension for one arriving update.

        OR of the active dimensions; an all-disabled bound replicates
        immediately.  The arrival counter is advanced exactly once per
        call regardless of what the other dimensions decide.
        """
        if bound.immediate:
            return True
        hit = False
        if bound.pending > 0:
            hit = self.record_arrival(bound)
        if bound.lag_ms > 0:
            hit = self.lag_expired(bound, now, pending=1) or hit
        if bound.drift > 0.0:
            hit = self.drift_exceeded(bound, update) or hit
        return hit

    def mark_shipped(self, now: int, updates: list[Update]) -> None:
        """Reset counters after this container shipped the given updates."""
        self.arrivals = 0
        if now > self.last_ship_ms:
            self.last_ship_ms = now
        for u in updates:
            self.pending_bytes -= u.size_bytes
            if u.numeric is not None:
                self.shipped_value[u.key] = u.numeric


def pending_from_percent(percent: float, total_updates: int) -> int:
    """Resolve a pending limit given as a percentage of a run's updates.

    Returns ``max(1, round(percent/100 * total_updates))`` with ties
    rounding up, so even tiny percentages yield a usable batch size.
    """
    if not 0 < percent <= 100:
        raise ValueError(f"percentage must be in (0, 100]: {percent}")
    if total_updates <= 0:
        raise ValueError(f"total update count must be positive: {total_updates}")
    return max(1, int(percent / 100.0 * total_updates + 0.5))
