"""The out-of-core dot-product join operator.

Streams a dataset of sparse vectors against a paged dense model: vectors
are taken one chunk (U-page) at a time, reordered within the chunk, cut
into batches whose page unions fit the memory budget, and each batch's
pages are requested from the buffer manager as one pinned set. Every
vector's dot product is computed against the pinned pages and emitted
before the next batch issues any page request.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .batcher import Batch, greedy_batches
from .buffer_manager import BufferManager
from .errors import OversizedVectorError, PreconditionError, ValidationError
from .metrics import MetricsReport
from .reorder import reorder
from .sparse_data import page_request_set


@dataclass
class OperatorConfig:
    budget: int                 # memory budget in pages
    reorder: str = "none"
    batching: bool = True
    upage: int = 4096           # vectors per reorder scope
    seed: int = 0
    lsh_m: int = 16
    lsh_b: int = 4
    kcenter_k: int | None = None
    per_upage_metrics: bool = False

    def describe(self):
        return {
            "budget": self.budget,
            "reorder": self.reorder,
            "batching": self.batching,
            "upage": self.upage,
            "seed": self.seed,
            "lsh_m": self.lsh_m,
            "lsh_b": self.lsh_b,
            "kcenter_k": self.kcenter_k,
        }


@dataclass
class DotProductResult:
    tid: int
    dp: float


def dot_product(vector, views, page_size):
    """Sum of value * model entry, accumulated in ascending index order.

    `views` must hold a pinned PageView for every page the vector touches.
    """
    dp = 0.0
    for k in range(vector.nnz):
        index = int(vector.indexes[k])
        page_id = index // page_size
        try:
            page = views[page_id]
        except KeyError:
            raise PreconditionError(f"page {page_id} not pinned for tid {vector.tid}")
        dp += float(vector.values[k]) * float(page.values[index - page_id * page_size])
    return dp


def oracle_dot_products(dataset, dense_model):
    """In-memory reference: same per-vector accumulation order as
    dot_product, no paging, no reordering. Returns results in dataset order."""
    results = []
    for vector in dataset:
        dp = 0.0
        for k in range(vector.nnz):
            dp += float(vector.values[k]) * float(dense_model[int(vector.indexes[k])])
        results.append(DotProductResult(vector.tid, dp))
    return results


def plan_upage(sets, config, upage_index, budget):
    """Permutation of the chunk's positions for this upage, per config."""
    seed = config.seed if config.reorder in ("none", "radix") else [config.seed, upage_index]
    return reorder(
        config.reorder, sets, budget, seed=seed,
        lsh_m=config.lsh_m, lsh_b=config.lsh_b, kcenter_k=config.kcenter_k,
    )


def make_batches(ordered_sets, config, tids_by_position):
    """Greedy batches when batching is on, single-vector batches otherwise.

    Attaches the offending tid when a vector cannot fit the budget at all.
    """
    try:
        if config.batching:
            return greedy_batches(ordered_sets, config.budget)
        batches = []
        for position, s in enumerate(ordered_sets):
            pages = frozenset(s)
            if len(pages) > config.budget:
                raise OversizedVectorError(
                    f"vector at position {position} needs {len(pages)} pages,"
                    f" budget is {config.budget}",
                    position=position,
                )
            batches.append(Batch([position], pages))
        return batches
    except OversizedVectorError as exc:
        exc.tid = tids_by_position[exc.position]
        raise


def run(dataset, store, config, sink=None, bufmgr=None):
    """Execute the join; emit DotProductResult per vector to `sink` in
    processing (post-reorder) order and return a MetricsReport."""
    if dataset.dimension != store.dimension:
        raise ValidationError(
            f"dataset dimension {dataset.dimension} != model dimension {store.dimension}"
        )
    if config.budget < 1:
        raise ValidationError(f"memory budget must be >= 1 page, got {config.budget}")
    if config.budget > store.num_pages:
        raise ValidationError(
            f"memory budget {config.budget} exceeds the {store.num_pages} model pages"
        )
    emit = sink if sink is not None else (lambda result: None)
    manager = bufmgr if bufmgr is not None else BufferManager(store, config.budget)
    page_size = store.page_size
    reorder_time = 0.0
    compute_time = 0.0
    batch_count = 0
    upage_count = 0
    per_upage = [] if config.per_upage_metrics else None
    for upage_index, (start, vectors) in enumerate(dataset.iter_upages(config.upage)):
        upage_count += 1
        before = manager.stats() if per_upage is not None else None
        sets = [page_request_set(v, page_size) for v in vectors]
        started = time.perf_counter()
        perm = plan_upage(sets, config, upage_index, config.budget)
        reorder_time += time.perf_counter() - started
        ordered_sets = [sets[p] for p in perm]
        tids = [vectors[p].tid for p in perm]
        batches = make_batches(ordered_sets, config, tids)
        batch_count += len(batches)
        for batch in batches:
            views = manager.request_set(batch.pages)
            started = time.perf_counter()
            for position in batch.positions:
                vector = vectors[perm[position]]
                manager.add_element_requests(vector.nnz)
                emit(DotProductResult(vector.tid, dot_product(vector, views, page_size)))
            compute_time += time.perf_counter() - started
            manager.unpin_set(batch.pages)
        if per_upage is not None:
            window = manager.stats().delta(before)
            per_upage.append({
                "upage": upage_index,
                "start": start,
                "vectors": len(vectors),
                "page_requests": window.page_requests,
                "page_misses": window.page_misses,
                "misses_by_page": dict(window.misses_by_page),
            })
    manager.flush_all()
    snapshot = manager.stats()
    return MetricsReport(
        element_requests=snapshot.element_requests,
        page_requests=snapshot.page_requests,
        page_misses=snapshot.page_misses,
        write_backs=snapshot.write_backs,
        batch_count=batch_count,
        upage_count=upage_count,
        distinct_pages=manager.distinct_pages,
        reorder_time=reorder_time,
        io_time=store.io_time,
        compute_time=compute_time,
        config=config.describe(),
        per_upage=per_upage,
    )


class CollectSink:
    """Sink that keeps every result in arrival order."""

    def __init__(self):
        self.results = []

    def __call__(self, result):
        self.results.append(result)

    def as_tid_map(self):
        return {r.tid: r.dp for r in self.results}
