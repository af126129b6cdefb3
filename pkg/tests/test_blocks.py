"""Client sessions and atomically replicated write groups."""

import pytest

from georep.blocks import BlockMode, ClientSession
from georep.bounds import Bound, ContainerId
from georep.cluster import ClusterNode
from georep.errors import ProtocolError
from georep.shipping import Trigger

ORDERS = ContainerId("orders", "acct")
PAYMENTS = ContainerId("payments", "acct")


def session_with(bounds=None, default_bound=Bound(), shipped=None):
    node = ClusterNode(1, [2], bounds=bounds, default_bound=default_bound,
                       on_ship=(lambda s, b: shipped.append(b))
                       if shipped is not None else None)
    return ClientSession(node), node


class TestLifecycle:
    def test_start_returns_fresh_id_and_marks_open(self):
        session, _ = session_with()
        block_id = session.start_block(BlockMode.IMMEDIATE)
        assert block_id >= 1
        assert session.in_block

    def test_any_mode_opens_too(self):
        session, _ = session_with()
        assert session.start_block(BlockMode.ANY) >= 1

    def test_nested_start_rejected(self):
        session, _ = session_with()
        session.start_block(BlockMode.ANY)
        with pytest.raises(ProtocolError):
            session.start_block(BlockMode.IMMEDIATE)

    def test_end_without_open_block_rejected(self):
        session, _ = session_with()
        with pytest.raises(ProtocolError):
            session.end_block()

    def test_block_ids_differ_across_blocks(self):
        session, _ = session_with()
        first = session.start_block(BlockMode.ANY)
        session.end_block()
        second = session.start_block(BlockMode.ANY)
        assert second != first


class TestPutSemantics:
    def test_put_outside_block_with_immediate_bound_ships_now(self):
        shipped = []
        session, _ = session_with(default_bound=Bound(), shipped=shipped)
        session.put(ORDERS, "k", b"v")
        assert len(shipped) == 1
        assert len(shipped[0].updates) == 1

    def test_put_inside_block_is_locally_visible_before_close(self):
        # Blocks defer replication, never local visibility.
        shipped = []
        session, _ = session_with(default_bound=Bound(), shipped=shipped)
        session.start_block(BlockMode.IMMEDIATE)
        session.put(ORDERS, "k", b"v")
        assert session.read(ORDERS, "k") == b"v"
        assert shipped == []

    def test_put_inside_block_carries_block_id(self):
        session, node = session_with(default_bound=Bound(pending=100))
        block_id = session.start_block(BlockMode.ANY)
        session.put(ORDERS, "k", b"v")
        assert node.wal[-1].block == block_id


class TestImmediateBlocks:
    def test_whole_block_ships_as_one_batch_at_close(self):
        shipped = []
        session, _ = session_with(default_bound=Bound(pending=10**6),
                                  shipped=shipped)
        session.start_block(BlockMode.IMMEDIATE)
        session.put(ORDERS, "a", b"1")
        session.put(PAYMENTS, "b", b"2")
        assert shipped == []
        session.end_block()
        assert len(shipped) == 1
        assert len(shipped[0].updates) == 2
        assert shipped[0].trigger is Trigger.IMMEDIATE_BLOCK

    def test_all_involved_counters_reset_at_close(self):
        shipped = []
        session, node = session_with(default_bound=Bound(pending=10**6),
                                     shipped=shipped)
        session.put(ORDERS, "warm1", b"x")
        session.put(PAYMENTS, "warm2", b"x")
        session.start_block(BlockMode.IMMEDIATE)
        session.put(ORDERS, "a", b"1")
        session.put(PAYMENTS, "b", b"2")
        session.end_block()
        source = node.sources[2]
        assert source.state_for(ORDERS).arrivals == 0
        assert source.state_for(PAYMENTS).arrivals == 0


class TestAnyBlocks:
    def test_block_held_until_a_member_bound_trips(self):
        shipped = []
        session, _ = session_with(
            bounds={ORDERS: Bound(pending=3), PAYMENTS: Bound(pending=5)},
            default_bound=Bound(pending=10**6), shipped=shipped)
        session.start_block(BlockMode.ANY)
        session.put(ORDERS, "a", b"1")
        session.put(PAYMENTS, "b", b"2")
        session.end_block()
        assert shipped == []  # most stringent bound (3) not reached yet

    def test_most_stringent_bound_ships_the_whole_block(self):
        # Spread 3 arrivals onto the pending bound of 3: block leaves whole.
        shipped = []
        session, _ = session_with(
            bounds={ORDERS: Bound(pending=3), PAYMENTS: Bound(pending=5)},
            default_bound=Bound(pending=10**6), shipped=shipped)
        session.start_block(BlockMode.ANY)
        for i in range(3):
            session.put(ORDERS, f"a{i}", b"1")
        session.put(PAYMENTS, "b", b"2")
        session.end_block()
        assert len(shipped) == 1
        assert len(shipped[0].updates) == 4
        assert shipped[0].trigger is Trigger.ANY_BLOCK

    def test_non_member_arrival_can_release_a_closed_block(self):
        # The bound belongs to the container, not the block: a later loose
        # write on a member container trips it and carries the block along.
        shipped = []
        session, _ = session_with(bounds={ORDERS: Bound(pending=3)},
                                  default_bound=Bound(pending=10**6),
                                  shipped=shipped)
        session.start_block(BlockMode.ANY)
        session.put(ORDERS, "a", b"1")
        session.put(ORDERS, "b", b"2")
        session.end_block()
        assert shipped == []
        session.put(ORDERS, "loose", b"3")  # third arrival on ORDERS
        assert len(shipped) == 1
        assert len(shipped[0].updates) == 3
        blocks = {u.block for u in shipped[0].updates}
        assert len(blocks) == 2  # the group plus the loose trigger write

    def test_member_on_immediate_container_ships_at_close(self):
        shipped = []
        session, _ = session_with(bounds={ORDERS: Bound()},
                                  default_bound=Bound(pending=10**6),
                                  shipped=shipped)
        session.start_block(BlockMode.ANY)
        session.put(ORDERS, "a", b"1")
        session.put(PAYMENTS, "b", b"2")
        session.end_block()
        assert len(shipped) == 1
        assert len(shipped[0].updates) == 2

    def test_empty_block_ships_nothing(self):
        shipped = []
        session, _ = session_with(default_bound=Bound(), shipped=shipped)
        session.start_block(BlockMode.IMMEDIATE)
        session.end_block()
        assert shipped == []
        assert not session.in_block


def test_writes_after_block_follow_the_plain_path():
    shipped = []
    session, _ = session_with(default_bound=Bound(), shipped=shipped)
    session.start_block(BlockMode.ANY)
    session.put(ORDERS, "a", b"1")
    session.end_block()
    shipped.clear()
    session.put(ORDERS, "later", b"2")
    assert len(shipped) == 1
    assert shipped[0].updates[0].block is None
