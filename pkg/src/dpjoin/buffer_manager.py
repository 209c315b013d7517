"""Buffer manager with set-granular pinned requests over a page store.

Requests arrive as page sets, not single pages. A request is served in two
stages: first every requested page that is already resident is pinned, then
the missing pages are loaded one by one (ascending page id), each time
evicting the least-recently-used unpinned page if the pool is full. Because
the whole request is pinned before any caller code runs, no page of the
request can be evicted by the request itself; this is what makes a batch of
vectors safe to process against a fixed set of resident pages.

Replacement is strict LRU over request sets: after a request completes, all
its pages become the most recently used, with the lower page id placed most
recent. Dirty pages are written back when evicted and on flush_all.
"""

from __future__ import annotations

from collections import Counter, OrderedDict
from dataclasses import dataclass, field

from .errors import PreconditionError, ValidationError


@dataclass
class MetricsSnapshot:
    element_requests: int = 0
    page_requests: int = 0
    page_misses: int = 0
    write_backs: int = 0
    misses_by_page: Counter = field(default_factory=Counter)

    def delta(self, earlier):
        """Counter difference self - earlier (for per-chunk reporting)."""
        by_page = self.misses_by_page - earlier.misses_by_page
        return MetricsSnapshot(
            self.element_requests - earlier.element_requests,
            self.page_requests - earlier.page_requests,
            self.page_misses - earlier.page_misses,
            self.write_backs - earlier.write_backs,
            by_page,
        )


class BufferManager:
    def __init__(self, store, capacity):
        if capacity < 1:
            raise ValidationError(f"memory budget must be >= 1 page, got {capacity}")
        self.store = store
        self.capacity = capacity
        self._resident = {}            # page_id -> PageView
        self._recency = OrderedDict()  # oldest first
        self._pins = Counter()
        self.element_requests = 0
        self.page_requests = 0
        self.page_misses = 0
        self.write_backs = 0
        self.misses_by_page = Counter()

    # -- requests ------------------------------------------------------------

    def request_set(self, pages):
        """Pin `pages` as one unit and return {page_id: PageView}.

        Counts len(pages) page requests and one miss per page actually
        loaded. The caller must unpin_set the same pages when done.
        """
        pages = sorted(set(int(p) for p in pages))
        if len(pages) > self.capacity:
            raise PreconditionError(
                f"request of {len(pages)} pages exceeds budget of {self.capacity}"
            )
        self.page_requests += len(pages)
        missing = []
        for page_id in pages:
            if page_id in self._resident:
                self._pins[page_id] += 1
            else:
                missing.append(page_id)
        for page_id in missing:
            if len(self._resident) >= self.capacity:
                self._evict_one()
            view = self.store.read_page(page_id)
            self.page_misses += 1
            self.misses_by_page[page_id] += 1
            self._resident[page_id] = view
            self._recency[page_id] = None
            self._pins[page_id] += 1
        # The whole set becomes most recently used; lower page ids are
        # refreshed last so the lowest id ends up the single most recent.
        for page_id in sorted(pages, reverse=True):
            self._recency.move_to_end(page_id)
        return {page_id: self._resident[page_id] for page_id in pages}

    def unpin_set(self, pages):
        for page_id in sorted(set(int(p) for p in pages)):
            if self._pins[page_id] <= 0:
                raise PreconditionError(f"page {page_id} is not pinned")
            self._pins[page_id] -= 1
            if self._pins[page_id] == 0:
                del self._pins[page_id]

    def _evict_one(self):
        for page_id in self._recency:
            if self._pins[page_id] == 0:
                victim = page_id
                break
        else:
            raise PreconditionError("all resident pages are pinned; cannot evict")
        view = self._resident.pop(victim)
        del self._recency[victim]
        self._pins.pop(victim, None)
        if view.dirty:
            self.store.write_page(view)
            self.write_backs += 1
            view.dirty = False

    # -- updates ---------------------------------------------------------------

    def mark_dirty(self, page_id):
        view = self._resident.get(page_id)
        if view is None:
            raise PreconditionError(f"page {page_id} is not resident; cannot mark dirty")
        view.dirty = True

    def flush_all(self):
        """Write back every dirty resident page (ascending id); keep residency."""
        for page_id in sorted(self._resident):
            view = self._resident[page_id]
            if view.dirty:
                self.store.write_page(view)
                self.write_backs += 1
                view.dirty = False

    # -- bookkeeping -------------------------------------------------------------

    def add_element_requests(self, count):
        self.element_requests += count

    def resident_pages(self):
        return set(self._resident)

    def pinned_pages(self):
        return {p for p, c in self._pins.items() if c > 0}

    def stats(self):
        return MetricsSnapshot(
            self.element_requests,
            self.page_requests,
            self.page_misses,
            self.write_backs,
            Counter(self.misses_by_page),
        )

    @property
    def distinct_pages(self):
        """Distinct pages ever requested (first request is always a miss)."""
        return len(self.misses_by_page)
