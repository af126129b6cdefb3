"""Pending-update cache: queuing, block closure, conservation."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from georep.bounds import ContainerId
from georep.cache import PendingCache
from georep.errors import ProtocolError

from conftest import make_update

A = ContainerId("a", "fam")
B = ContainerId("b", "fam")


def test_enqueue_tracks_bytes_and_length():
    cache = PendingCache()
    u = make_update(key="key", value=b"x" * 83)  # 3 + 83 + 34 = 120
    cache.enqueue(u)
    assert cache.total_pending_bytes == 120
    assert cache.pending_count(u.container) == 1


def test_same_key_retained_in_arrival_order():
    # No coalescing by default: batch sizes equal arrival counts.
    cache = PendingCache()
    first = make_update(key="k", value=b"old", container=A)
    second = make_update(key="k", value=b"new", container=A)
    cache.enqueue(first)
    cache.enqueue(second)
    assert cache.drain([A]) == [first, second]


def test_block_membership_indexed():
    cache = PendingCache()
    u = make_update(container=A, block=9)
    cache.enqueue(u)
    assert cache.block_index[(u.origin, 9)] == {A: 1}


def test_duplicate_identity_rejected():
    cache = PendingCache()
    cache.enqueue(make_update(origin=1, seq=100))
    with pytest.raises(ProtocolError):
        cache.enqueue(make_update(origin=1, seq=100))


def test_drain_takes_whole_queue():
    cache = PendingCache()
    updates = [make_update(container=A, key=f"k{i}") for i in range(3)]
    for u in updates:
        cache.enqueue(u)
    assert cache.drain([A]) == updates
    assert cache.pending_count(A) == 0
    assert cache.total_pending_bytes == 0
    assert cache.total_pending_count == 0


def test_drain_pulls_block_siblings_from_other_containers():
    # A group never splits: draining one member container takes the rest.
    cache = PendingCache()
    in_a = make_update(container=A, key="x", block=5, origin=2)
    in_b = make_update(container=B, key="y", block=5, origin=2)
    loose = make_update(container=B, key="z", origin=2)
    for u in (in_a, in_b, loose):
        cache.enqueue(u)
    drained = cache.drain([A])
    assert drained == [in_a, in_b]
    assert cache.drain([B]) == [loose]


def test_drain_empty_container_is_noop():
    cache = PendingCache()
    assert cache.drain([A]) == []
    assert cache.total_pending_bytes == 0


def test_pending_count_lifecycle():
    cache = PendingCache()
    cache.enqueue(make_update(container=A, key="1"))
    cache.enqueue(make_update(container=A, key="2"))
    assert cache.pending_count(A) == 2
    cache.drain([A])
    assert cache.pending_count(A) == 0
    assert cache.pending_count(ContainerId("never", "seen")) == 0


def test_peak_pending_tracks_high_water_mark():
    cache = PendingCache()
    for i in range(4):
        cache.enqueue(make_update(container=A, key=f"k{i}"))
    cache.drain([A])
    cache.enqueue(make_update(container=A, key="again"))
    assert cache.peak_pending[A] == 4


class TestCoalesce:
    def test_same_key_replaced_by_newest(self):
        cache = PendingCache(coalesce=True)
        cache.enqueue(make_update(container=A, key="k", value=b"old"))
        newest = make_update(container=A, key="k", value=b"new")
        cache.enqueue(newest)
        assert cache.drain([A]) == [newest]

    def test_distinct_keys_unaffected(self):
        cache = PendingCache(coalesce=True)
        u1 = make_update(container=A, key="k1")
        u2 = make_update(container=A, key="k2")
        cache.enqueue(u1)
        cache.enqueue(u2)
        assert cache.drain([A]) == [u1, u2]

    def test_block_members_exempt(self):
        # Groups must stay intact, so their members never coalesce away.
        cache = PendingCache(coalesce=True)
        grouped = make_update(container=A, key="k", block=3)
        plain = make_update(container=A, key="k")
        cache.enqueue(grouped)
        cache.enqueue(plain)
        assert cache.drain([A]) == [grouped, plain]

    def test_byte_total_follows_replacement(self):
        cache = PendingCache(coalesce=True)
        cache.enqueue(make_update(container=A, key="k", value=b"0" * 100))
        replacement = make_update(container=A, key="k", value=b"1" * 10)
        cache.enqueue(replacement)
        assert cache.total_pending_bytes == replacement.size_bytes


@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c"]),
                          st.booleans()), max_size=60))
@settings(max_examples=50, deadline=None)
def test_conservation_under_random_traffic(script):
    """enqueued == drained + pending, by count and by bytes."""
    cache = PendingCache()
    seq = 0
    enqueued = drained = 0
    enqueued_bytes = drained_bytes = 0
    for table, do_drain in script:
        cid = ContainerId(table, "fam")
        if do_drain:
            out = cache.drain([cid])
            drained += len(out)
            drained_bytes += sum(u.size_bytes for u in out)
        else:
            seq += 1
            u = make_update(container=cid, key=f"k{seq % 5}", origin=9, seq=seq)
            cache.enqueue(u)
            enqueued += 1
            enqueued_bytes += u.size_bytes
        assert cache.total_pending_count == enqueued - drained
        assert cache.total_pending_bytes == enqueued_bytes - drained_bytes


def test_order_preserved_within_container():
    cache = PendingCache()
    updates = [make_update(container=A, key=f"k{i}", origin=3, seq=i + 1)
               for i in range(10)]
    for u in updates:
        cache.enqueue(u)
    out = cache.drain([A])
    assert [u.seq for u in out] == sorted(u.seq for u in out)


def test_no_partial_block_ever_drains():
    cache = PendingCache()
    members = [make_update(container=[A, B][i % 2], key=f"m{i}", block=7, origin=4)
               for i in range(6)]
    for u in members:
        cache.enqueue(u)
    out = cache.drain([B])
    assert len(out) == 6
    assert cache.total_pending_count == 0
    assert not cache.block_index
