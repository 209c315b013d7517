import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpjoin import BufferManager, PreconditionError


def manager(tmp_store, capacity, num_pages=8, page_size=4):
    store = tmp_store(num_pages * page_size, page_size)
    return BufferManager(store, capacity)


def test_cold_misses_then_hits(tmp_store):
    bm = manager(tmp_store, 4)
    views = bm.request_set([0, 1, 2])
    assert sorted(views) == [0, 1, 2]
    bm.unpin_set([0, 1, 2])
    assert bm.stats().page_misses == 3
    assert bm.stats().page_requests == 3
    bm.request_set([1, 2])
    bm.unpin_set([1, 2])
    assert bm.stats().page_misses == 3
    assert bm.stats().page_requests == 5


def test_request_dedups_and_sorts(tmp_store):
    bm = manager(tmp_store, 4)
    views = bm.request_set([3, 1, 3, 1])
    bm.unpin_set([1, 3])
    assert sorted(views) == [1, 3]
    assert bm.stats().page_requests == 2


def test_set_larger_than_capacity_rejected(tmp_store):
    bm = manager(tmp_store, 2)
    with pytest.raises(PreconditionError):
        bm.request_set([0, 1, 2])


def test_lru_eviction_order(tmp_store):
    # lower page id of a request is refreshed as more recent
    bm = manager(tmp_store, 2)
    bm.request_set([0, 1])
    bm.unpin_set([0, 1])
    bm.request_set([2])
    bm.unpin_set([2])
    assert bm.resident_pages() == {0, 2}


def test_pinned_never_evicted(tmp_store):
    bm = manager(tmp_store, 3)
    bm.request_set([0, 1])
    # 0 and 1 stay pinned; loading 2 then 3 must evict 2, not them
    bm.request_set([2])
    bm.unpin_set([2])
    bm.request_set([3])
    bm.unpin_set([3])
    assert {0, 1} <= bm.resident_pages()
    assert 2 not in bm.resident_pages()
    bm.unpin_set([0, 1])


def test_all_pinned_rejected(tmp_store):
    bm = manager(tmp_store, 2)
    bm.request_set([0, 1])
    with pytest.raises(PreconditionError):
        bm.request_set([2])


def test_unpin_unknown_page_rejected(tmp_store):
    bm = manager(tmp_store, 2)
    with pytest.raises(PreconditionError):
        bm.unpin_set([5])


def test_dirty_eviction_writes_back(tmp_store):
    bm = manager(tmp_store, 2)
    views = bm.request_set([0, 1])
    views[1].values[:] = 9.0
    bm.mark_dirty(1)
    bm.unpin_set([0, 1])
    bm.request_set([2, 3])          # evicts both, page 1 is dirty
    bm.unpin_set([2, 3])
    assert bm.stats().write_backs == 1
    assert list(bm.store.read_page(1).values) == [9.0] * 4


def test_flush_all(tmp_store):
    bm = manager(tmp_store, 4)
    views = bm.request_set([2, 0])
    views[0].values[:] = 1.0
    views[2].values[:] = 2.0
    bm.mark_dirty(0)
    bm.mark_dirty(2)
    bm.unpin_set([0, 2])
    bm.flush_all()
    assert bm.stats().write_backs == 2
    assert (bm.store.read_page(0).values == 1.0).all()
    assert (bm.store.read_page(2).values == 2.0).all()
    bm.flush_all()                   # clean now, nothing to write
    assert bm.stats().write_backs == 2


def test_misses_by_page_and_distinct(tmp_store):
    bm = manager(tmp_store, 2)
    for pages in ([0, 1], [2], [0, 1]):
        bm.request_set(pages)
        bm.unpin_set(pages)
    counts = bm.stats().misses_by_page
    assert counts[2] == 1
    assert counts[0] + counts[1] >= 2
    assert bm.distinct_pages == 3


def test_element_request_counter(tmp_store):
    bm = manager(tmp_store, 2)
    bm.add_element_requests(5)
    bm.add_element_requests(2)
    assert bm.stats().element_requests == 7


def test_snapshot_delta(tmp_store):
    bm = manager(tmp_store, 2)
    bm.request_set([0])
    bm.unpin_set([0])
    before = bm.stats()
    bm.request_set([1, 2])
    bm.unpin_set([1, 2])
    window = bm.stats().delta(before)
    assert window.page_requests == 2
    assert window.page_misses == 2
    assert window.misses_by_page == {1: 1, 2: 1}


@st.composite
def traces(draw):
    n = draw(st.integers(2, 30))
    return [sorted(draw(st.sets(st.integers(0, 7), min_size=1, max_size=4)))
            for _ in range(n)]


@settings(max_examples=60, deadline=None)
@given(trace=traces(), capacity=st.integers(4, 8))
def test_trace_invariants(tmp_path_factory, trace, capacity):
    """Replay determinism plus basic accounting on random traces."""
    from dpjoin import ModelStore

    def replay(cap):
        path = str(tmp_path_factory.mktemp("bm") / "m.model")
        with ModelStore.create(path, 32, 4) as store:
            bm = BufferManager(store, cap)
            for pages in trace:
                bm.request_set(pages)
                bm.unpin_set(pages)
                assert len(bm.resident_pages()) <= cap
            stats = bm.stats()
        return stats

    got = replay(capacity)
    assert got.page_requests == sum(len(p) for p in trace)
    assert got.page_misses <= got.page_requests
    assert got.page_misses >= len({p for req in trace for p in req})
    assert got.page_misses == sum(got.misses_by_page.values())
    again = replay(capacity)
    assert again.page_misses == got.page_misses
    assert again.misses_by_page == got.misses_by_page
    # a bigger buffer never misses more on the same trace
    bigger = replay(capacity + 1)
    assert bigger.page_misses <= got.page_misses
