"""Client sessions and atomically replicated write groups.

A session targets one cluster.  Writes outside a group follow the
normal per-container bound evaluation.  Between start_block and
end_block, writes apply locally right away (local visibility is never
deferred) but are withheld from replication and then offered to the
peers as one group when the block closes:

* IMMEDIATE blocks ship as a single batch at close, and every involved
  container's counters reset with the shipment.
* ANY blocks become eligible at close; the whole group ships the first
  time any involved container's bound evaluation returns true, which
  the close itself may cause.  If a member container replicates
  immediately (all-inactive bound), the group ships at close.

Blocks do not nest and a session holds at most one open block.
"""

from __future__ import annotations

import enum

from .bounds import ContainerId, Update
from .cluster import ClusterNode
from .errors import ProtocolError


class BlockMode(enum.Enum):
    """How a closed write group reaches the peers."""

    IMMEDIATE = "immediate"
    ANY = "any"


class ClientSession:
    """One client's handle on a cluster, with optional write grouping."""

    def __init__(self, cluster: ClusterNode) -> None:
        self.cluster = cluster
        self._block_id: int | None = None
        self._block_mode: BlockMode | None = None
        self._block_updates: list[Update] = []

    @property
    def in_block(self) -> bool:
        return self._block_id is not None

    def start_block(self, mode: BlockMode) -> int:
        """Open a write group; returns its id.  Groups do not nest."""
        if self._block_id is not None:
            raise ProtocolError(f"block {self._block_id} already open on this session")
        self._block_id = self.cluster.next_block_id()
        self._block_mode = mode
        self._block_updates = []
        return self._block_id

    def put(self, cid: ContainerId, key: str, value: bytes) -> Update:
        """Write one cell.

        Locally durable and visible immediately either way; replication
        is immediate-path outside a block, deferred to close inside one.
        """
        if self._block_id is None:
            return self.cluster.put(cid, key, value)
        update = self.cluster.local_put(cid, key, value, block=self._block_id)
        self._block_updates.append(update)
        return update

    def end_block(self) -> None:
        """Close the open group and hand it to replication whole."""
        if self._block_id is None:
            raise ProtocolError("no block open on this session")
        updates, mode = self._block_updates, self._block_mode
        self._block_id = None
        self._block_mode = None
        self._block_updates = []
        if updates:
            self.cluster.offer_group(updates, immediate=(mode is BlockMode.IMMEDIATE))

    def read(self, cid: ContainerId, key: str) -> bytes | None:
        return self.cluster.get(cid, key)
