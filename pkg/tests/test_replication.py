"""Per-peer shipping: bound triggers, ticks, drains, wire format."""

import pytest

from georep.bounds import Bound, ContainerId
from georep.shipping import (
    BATCH_HEADER_BYTES,
    Batch,
    ReplicationSource,
    Trigger,
    decode_batch,
    encode_batch,
)

from conftest import make_update

A = ContainerId("a", "fam")
B = ContainerId("b", "fam")


def source_with(bound, **kwargs):
    return ReplicationSource(source=1, peer=2, default_bound=bound, **kwargs)


class TestOffer:
    def test_count_bound_ships_on_the_nth_update(self):
        src = source_with(Bound(pending=3))
        results = [src.offer(make_update(key=f"k{i}"), now=i) for i in range(3)]
        assert results[:2] == [None, None]
        batch = results[2]
        assert batch is not None
        assert len(batch.updates) == 3
        assert batch.trigger is Trigger.COUNT

    def test_peer_origin_dropped(self):
        src = source_with(Bound())
        assert src.offer(make_update(origin=2), now=0) is None
        assert src.cache.total_pending_count == 0

    def test_immediate_bound_ships_every_update_alone(self):
        src = source_with(Bound())
        for i in range(4):
            batch = src.offer(make_update(key=f"k{i}"), now=i)
            assert batch is not None
            assert len(batch.updates) == 1
            assert batch.trigger is Trigger.COUNT

    def test_drift_bound_ships_with_delta_trigger(self):
        src = source_with(Bound(drift=10))
        assert src.offer(make_update(key="k", value=b"100"), now=0) is None
        # No shipped history yet, so drain by hand to set the baseline.
        drained = src.final_drain(now=0)
        assert len(drained) == 1
        batch = src.offer(make_update(key="k", value=b"111"), now=1)
        assert batch is not None
        assert batch.trigger is Trigger.DELTA

    def test_count_beats_drift_when_both_trip(self):
        src = source_with(Bound(pending=2, drift=10))
        src.offer(make_update(key="k", value=b"0"), now=0)
        src.final_drain(now=0)  # baseline value 0 shipped
        src.offer(make_update(key="k", value=b"5"), now=1)  # below drift
        batch = src.offer(make_update(key="k", value=b"99"), now=2)
        assert batch is not None
        assert batch.trigger is Trigger.COUNT

    def test_counter_resets_with_every_shipment(self):
        src = source_with(Bound(pending=3))
        for i in range(7):
            src.offer(make_update(container=A, key=f"k{i}"), now=i)
        assert src.state_for(A).arrivals == 7 % 3

    def test_plain_mode_never_ships_on_offer(self):
        src = source_with(Bound(), mode="plain")
        for i in range(10):
            assert src.offer(make_update(key=f"k{i}"), now=i) is None
        assert src.cache.total_pending_count == 10

    def test_batch_total_bytes_accounts_header(self):
        src = source_with(Bound(pending=2))
        u1, u2 = make_update(key="k1"), make_update(key="k2")
        src.offer(u1, now=0)
        batch = src.offer(u2, now=1)
        assert batch.total_bytes == BATCH_HEADER_BYTES + u1.size_bytes + u2.size_bytes


class TestTick:
    def test_lag_expired_container_ships_on_tick(self):
        src = source_with(Bound(lag_ms=1000))
        src.offer(make_update(key="k1"), now=100)
        src.offer(make_update(key="k2"), now=200)
        assert src.tick(now=900) == []
        batches = src.tick(now=1200)
        assert len(batches) == 1
        assert len(batches[0].updates) == 2
        assert batches[0].trigger is Trigger.TIME

    def test_nothing_pending_ships_nothing(self):
        src = source_with(Bound(lag_ms=100))
        assert src.tick(now=10**6) == []

    def test_overdue_containers_drain_in_name_order(self):
        src = source_with(Bound(lag_ms=100))
        src.offer(make_update(container=B, key="kb"), now=0)
        src.offer(make_update(container=A, key="ka"), now=0)
        batches = src.tick(now=500)
        assert [b.updates[0].container for b in batches] == [A, B]

    def test_plain_mode_tick_ships_everything(self):
        src = source_with(Bound(), mode="plain")
        src.offer(make_update(container=A, key="x"), now=0)
        src.offer(make_update(container=B, key="y"), now=0)
        batches = src.tick(now=1000)
        assert len(batches) == 2
        assert all(b.trigger is Trigger.TIME for b in batches)
        assert src.cache.total_pending_count == 0


class TestFinalDrain:
    def test_stragglers_ship_as_one_batch(self):
        src = source_with(Bound(pending=100))
        for i in range(7):
            src.offer(make_update(key=f"k{i}"), now=i)
        batches = src.final_drain(now=50)
        assert len(batches) == 1
        assert len(batches[0].updates) == 7
        assert batches[0].trigger is Trigger.FINAL_DRAIN

    def test_empty_cache_yields_nothing(self):
        assert source_with(Bound(pending=5)).final_drain(now=0) == []

    def test_pending_group_ships_whole(self):
        src = source_with(Bound(pending=100))
        members = [make_update(container=[A, B][i % 2], key=f"m{i}", block=4)
                   for i in range(4)]
        assert src.offer_group(members, now=0) is None
        batches = src.final_drain(now=10)
        total = [u for b in batches for u in b.updates]
        assert len(total) == 4
        blocks = {u.block for b in batches for u in b.updates}
        assert blocks == {4}
        assert len({id(b) for b in batches if any(u.block == 4 for u in b.updates)}) == 1


class TestGroups:
    def test_group_below_bounds_held(self):
        src = source_with(Bound(pending=10))
        members = [make_update(container=A, key=f"m{i}", block=1) for i in range(3)]
        assert src.offer_group(members, now=0) is None
        assert src.cache.total_pending_count == 3

    def test_group_ships_when_a_member_trips(self):
        src = source_with(Bound(pending=3))
        members = [make_update(container=A, key=f"m{i}", block=1) for i in range(3)]
        batch = src.offer_group(members, now=0)
        assert batch is not None
        assert len(batch.updates) == 3
        assert batch.trigger is Trigger.ANY_BLOCK

    def test_group_counts_before_deciding(self):
        # Every member is enqueued and counted before any shipping choice,
        # so the batch holds the whole group even if an early member trips.
        src = source_with(Bound(pending=2))
        members = [make_update(container=A, key=f"m{i}", block=1) for i in range(5)]
        batch = src.offer_group(members, now=0)
        assert batch is not None
        assert len(batch.updates) == 5

    def test_immediate_group_ships_at_once(self):
        src = source_with(Bound(pending=10**6))
        members = [make_update(container=A, key="x", block=2),
                   make_update(container=B, key="y", block=2)]
        batch = src.ship_group_now(members, now=5)
        assert batch is not None
        assert batch.trigger is Trigger.IMMEDIATE_BLOCK
        assert len(batch.updates) == 2

    def test_group_shipment_resets_all_involved_counters(self):
        src = source_with(Bound(pending=10))
        src.offer(make_update(container=A, key="warm"), now=0)
        members = [make_update(container=A, key="x", block=2),
                   make_update(container=B, key="y", block=2)]
        src.ship_group_now(members, now=5)
        assert src.state_for(A).arrivals == 0
        assert src.state_for(B).arrivals == 0

    def test_group_from_peer_origin_fully_dropped(self):
        src = source_with(Bound(pending=1))
        members = [make_update(container=A, key="x", block=3, origin=2)]
        assert src.offer_group(members, now=0) is None
        assert src.cache.total_pending_count == 0


class TestAcknowledge:
    def test_high_water_marks_advance(self):
        src = source_with(Bound(pending=2))
        src.offer(make_update(key="k1", origin=1, seq=11), now=0)
        batch = src.offer(make_update(key="k2", origin=1, seq=12), now=1)
        assert src.unacked == [batch]
        src.acknowledge(batch)
        assert src.unacked == []
        assert src.shipped_position[1] == 12

    def test_marks_never_regress(self):
        src = source_with(Bound())
        first = src.offer(make_update(key="a", origin=1, seq=20), now=0)
        second = src.offer(make_update(key="b", origin=1, seq=21), now=1)
        src.acknowledge(second)
        src.acknowledge(first)
        assert src.shipped_position[1] == 21


class TestBatchSizeInvariant:
    def test_count_batches_are_exact_with_final_remainder(self):
        # 1003 arrivals against a bound of 100: ten full batches, then
        # the final drain carries the 3 left over.
        src = source_with(Bound(pending=100))
        count_batches = []
        for i in range(1003):
            batch = src.offer(make_update(key=f"k{i}"), now=i)
            if batch is not None:
                count_batches.append(batch)
        assert len(count_batches) == 10
        assert all(len(b.updates) == 100 for b in count_batches)
        assert all(b.trigger is Trigger.COUNT for b in count_batches)
        tail = src.final_drain(now=2000)
        assert len(tail) == 1
        assert len(tail[0].updates) == 3


class TestTimerWork:
    def test_no_lag_bound_means_no_timer_work(self):
        src = source_with(Bound(pending=100))
        src.offer(make_update(key="k"), now=0)
        assert not src.has_timer_work()

    def test_lag_bound_with_backlog_needs_timer(self):
        src = source_with(Bound(lag_ms=500))
        src.offer(make_update(key="k"), now=0)
        assert src.has_timer_work()

    def test_plain_mode_with_backlog_needs_timer(self):
        src = source_with(Bound(), mode="plain")
        src.offer(make_update(key="k"), now=0)
        assert src.has_timer_work()

    def test_empty_cache_never_needs_timer(self):
        assert not source_with(Bound(lag_ms=500)).has_timer_work()


class TestWireFormat:
    def test_roundtrip_preserves_everything(self):
        updates = [
            make_update(container=A, key="k1", value=b"\x00\xffbinary", origin=3,
                        seq=7, wall_ms=123),
            make_update(container=B, key="k2", value=b"42", origin=3, seq=8,
                        wall_ms=456, block=9),
        ]
        batch = Batch.build(updates, source=3, destination=4, created_ms=500,
                            trigger=Trigger.ANY_BLOCK)
        decoded = decode_batch(encode_batch(batch))
        assert decoded.source == 3
        assert decoded.destination == 4
        assert decoded.created_ms == 500
        assert decoded.trigger is Trigger.ANY_BLOCK
        assert decoded.total_bytes == batch.total_bytes
        for orig, copy in zip(batch.updates, decoded.updates):
            assert (copy.container, copy.key, copy.value) == \
                (orig.container, orig.key, orig.value)
            assert (copy.wall_ms, copy.origin, copy.seq, copy.block) == \
                (orig.wall_ms, orig.origin, orig.seq, orig.block)

    def test_trailing_garbage_rejected(self):
        batch = Batch.build([make_update()], 1, 2, 0, Trigger.COUNT)
        from georep.errors import ProtocolError
        with pytest.raises(ProtocolError):
            decode_batch(encode_batch(batch) + b"\x00")


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        ReplicationSource(source=1, peer=2, mode="turbo")


def test_conservation_across_triggers():
    """Offered non-echo update count equals the count shipped overall."""
    src = source_with(Bound(pending=7))
    shipped = 0
    offered = 0
    for i in range(100):
        u = make_update(key=f"k{i}", origin=2 if i % 10 == 0 else 1)
        offered += u.origin != 2
        batch = src.offer(u, now=i)
        if batch is not None:
            shipped += len(batch.updates)
    for batch in src.final_drain(now=1000):
        shipped += len(batch.updates)
    assert shipped == offered
