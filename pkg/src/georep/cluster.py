"""A simulated data-center replica.

Each cluster owns a key-value store keyed by container, an append-only
write-ahead log of its local writes, and one replication source per
peer.  Local writes apply unconditionally; remote batches apply under
last-writer-wins, where the greater (timestamp, origin) pair overwrites
and ties break toward the larger origin id so every replica resolves
conflicts identically.  Updates applied from a remote batch are offered
onward to the cluster's other peers with their original origin intact,
so loops of any length stay echo-free.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from typing import Callable

from .bounds import Bound, ContainerId, Update
from .errors import ProtocolError
from .shipping import Batch, ReplicationSource

# Digest of a store with no cells.
EMPTY_DIGEST = "0" * 64

ShipFn = Callable[[ReplicationSource, Batch], None]


@dataclass(frozen=True, slots=True)
class StoredCell:
    """One stored value with the write's own timestamp and origin.

    The origin sequence number breaks last-writer-wins ties between a
    single origin's writes that share a millisecond; it restores that
    origin's program order, which is how the writes applied locally.
    """

    value: bytes
    wall_ms: int
    origin: int
    seq: int

    @property
    def version(self) -> tuple[int, int, int]:
        """Ordering key: greater pair wins, ties only within one origin."""
        return self.wall_ms, self.origin, self.seq


@dataclass(slots=True)
class ApplyReport:
    """Outcome counts for one remote batch application."""

    applied: int = 0
    stale_discarded: int = 0
    duplicates: int = 0


class ClusterNode:
    """One replica cluster inside the simulation."""

    def __init__(self, cluster_id: int, peers: list[int],
                 bounds: dict[ContainerId, Bound] | None = None,
                 default_bound: Bound = Bound(), mode: str = "bounded",
                 coalesce: bool = False, now_fn: Callable[[], int] = lambda: 0,
                 on_ship: ShipFn | None = None) -> None:
        self.cluster_id = cluster_id
        self.now_fn = now_fn
        self.on_ship: ShipFn = on_ship or (lambda source, batch: None)
        self.store: dict[ContainerId, dict[str, StoredCell]] = {}
        self.wal: list[Update] = []
        self.sources: dict[int, ReplicationSource] = {
            peer: ReplicationSource(cluster_id, peer, bounds, default_bound, mode, coalesce)
            for peer in sorted(peers)
        }
        self._applied: set[tuple[int, int]] = set()
        self._next_block = 0

    # -- local write path ----------------------------------------------

    def local_put(self, cid: ContainerId, key: str, value: bytes,
                  block: int | None = None) -> Update:
        """Durably apply one local write; the caller decides when it is
        offered for replication (immediately, or on group close)."""
        update = Update(
            container=cid, key=key, value=value, wall_ms=self.now_fn(),
            origin=self.cluster_id, seq=len(self.wal) + 1, block=block,
        )
        self.wal.append(update)
        self.store.setdefault(cid, {})[key] = StoredCell(
            value, update.wall_ms, update.origin, update.seq)
        return update

    def apply_local(self, update: Update) -> None:
        """Offer an already-durable local update to every peer."""
        if update.origin != self.cluster_id:
            raise ProtocolError(
                f"local update with foreign origin {update.origin} at cluster {self.cluster_id}")
        now = self.now_fn()
        for source in self.sources.values():
            batch = source.offer(update, now)
            if batch is not None:
                self.on_ship(source, batch)

    def put(self, cid: ContainerId, key: str, value: bytes) -> Update:
        """Write locally and offer for replication in one step."""
        update = self.local_put(cid, key, value)
        self.apply_local(update)
        return update

    def get(self, cid: ContainerId, key: str) -> bytes | None:
        cell = self.store.get(cid, {}).get(key)
        return None if cell is None else cell.value

    def offer_group(self, updates: list[Update], immediate: bool) -> None:
        """Offer a closed atomic group of local updates to every peer."""
        now = self.now_fn()
        for source in self.sources.values():
            if immediate:
                batch = source.ship_group_now(updates, now)
            else:
                batch = source.offer_group(updates, now)
            if batch is not None:
                self.on_ship(source, batch)

    def next_block_id(self) -> int:
        self._next_block += 1
        return self._next_block

    # -- remote apply path ----------------------------------------------

    def apply_remote(self, batch: Batch) -> ApplyReport:
        """Apply a delivered batch in one atomic step.

        Last-writer-wins per cell; already-seen updates are skipped so
        redelivery is harmless.  Freshly applied updates are relayed to
        every peer other than the batch's own sender.
        """
        if batch.destination != self.cluster_id:
            raise ProtocolError(
                f"batch for cluster {batch.destination} delivered to {self.cluster_id}")
        report = ApplyReport()
        fresh: list[Update] = []
        for u in batch.updates:
            ident = (u.origin, u.seq)
            if ident in self._applied:
                report.duplicates += 1
                continue
            self._applied.add(ident)
            cell = self.store.get(u.container, {}).get(u.key)
            if cell is None or (u.wall_ms, u.origin, u.seq) > cell.version:
                self.store.setdefault(u.container, {})[u.key] = StoredCell(
                    u.value, u.wall_ms, u.origin, u.seq)
                report.applied += 1
                fresh.append(u)
            else:
                report.stale_discarded += 1
        if fresh:
            self._relay(fresh, exclude_peer=batch.source)
        return report

    def _relay(self, updates: list[Update], exclude_peer: int) -> None:
        now = self.now_fn()
        singles: list[Update] = []
        groups: dict[tuple[int, int], list[Update]] = {}
        for u in updates:
            if u.block is None:
                singles.append(u)
            else:
                groups.setdefault((u.origin, u.block), []).append(u)
        for peer, source in self.sources.items():
            if peer == exclude_peer:
                continue
            for u in singles:
                batch = source.offer(u, now)
                if batch is not None:
                    self.on_ship(source, batch)
            for members in groups.values():
                batch = source.offer_group(members, now)
                if batch is not None:
                    self.on_ship(source, batch)

    # -- timers and flushes ----------------------------------------------

    def tick(self, now: int) -> None:
        for source in self.sources.values():
            for batch in source.tick(now):
                self.on_ship(source, batch)

    def final_drain(self, now: int) -> int:
        shipped = 0
        for source in self.sources.values():
            for batch in source.final_drain(now):
                self.on_ship(source, batch)
                shipped += len(batch.updates)
        return shipped

    def has_timer_work(self) -> bool:
        return any(source.has_timer_work() for source in self.sources.values())

    # -- inspection ----------------------------------------------------

    def digest(self) -> str:
        """Order-independent hash of every stored cell.

        XOR of per-cell SHA-256 digests; stores with the same cells give
        the same hex string no matter the insertion order.  An empty
        store hashes to all zeros.
        """
        acc = 0
        for cid, cells in self.store.items():
            label = str(cid).encode("utf-8")
            for key, cell in cells.items():
                record = b"|".join((
                    label, key.encode("utf-8"),
                    str(cell.wall_ms).encode(), str(cell.origin).encode(), cell.value,
                ))
                acc ^= int.from_bytes(hashlib.sha256(record).digest(), "big")
        return f"{acc:064x}"

    def dump_wal(self, path: str) -> None:
        """Write the WAL as JSON lines; values are base64 so any payload
        survives the text encoding."""
        with open(path, "w", encoding="utf-8") as fh:
            for u in self.wal:
                fh.write(json.dumps({
                    "seq": u.seq,
                    "container": str(u.container),
                    "key": u.key,
                    "value_b64": base64.b64encode(u.value).decode("ascii"),
                    "wall_ms": u.wall_ms,
                    "origin": u.origin,
                    "block": u.block,
                }, separators=(",", ":")) + "\n")

    @staticmethod
    def load_wal(path: str) -> list[Update]:
        updates = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                updates.append(Update(
                    container=ContainerId.parse(rec["container"]),
                    key=rec["key"],
                    value=base64.b64decode(rec["value_b64"]),
                    wall_ms=rec["wall_ms"],
                    origin=rec["origin"],
                    seq=rec["seq"],
                    block=rec["block"],
                ))
        return updates
