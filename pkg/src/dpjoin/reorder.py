"""Vector reordering heuristics over page-request sets.

Processing order determines how often the buffer manager has to go to
secondary storage: consecutive vectors that share pages reuse what is
already resident. The quantity being minimized is

    objective(order) = sum over consecutive pairs of |pages(next) - pages(cur)|

i.e. the pages each step still has to bring in. Finding the true minimum is
a minimum Hamiltonian path problem, so three heuristics are provided:

* radix   -- sort vectors by their page-membership bit patterns, pages
             ordered by descending request frequency (ties: lower page id).
             MSB-first, set bit sorts before clear bit, stable. Cheap, and
             bounds how often each page can be reloaded.
* lsh     -- minwise-hash signatures in banded hash tables; nearest-neighbor
             walk that only scores candidates sharing a bucket with the
             current vector.
* kcenter -- recursive clustering around randomly seeded centers until each
             cluster's page union fits the memory budget, then a greedy
             chain over cluster centers.

All heuristics are deterministic given their seed and return a permutation
of positions 0..n-1.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .errors import PreconditionError, ValidationError

DEFAULT_LSH_HASHES = 16
DEFAULT_LSH_BANDS = 4
_KCENTER_MAX_DEPTH = 32


def objective(order, sets):
    """Pages each consecutive step still needs; the first vector's own set
    is not counted (cold-start misses are a boundary term, not an ordering
    property)."""
    if len(order) != len(sets) or sorted(order) != list(range(len(sets))):
        raise ValidationError("order must be a permutation of range(len(sets))")
    fsets = [frozenset(s) for s in sets]
    return sum(
        len(fsets[order[j + 1]] - fsets[order[j]]) for j in range(len(order) - 1)
    )


def reorder_none(n):
    return list(range(n))


def reorder_shuffle(n, seed=0):
    """Uniform random permutation; the baseline order for convergence runs."""
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.permutation(n)]


# -- radix ---------------------------------------------------------------------


def page_frequency_order(sets):
    """Pages sorted by descending request frequency, ties by lower page id."""
    freq = Counter()
    for s in sets:
        freq.update(s)
    return sorted(freq, key=lambda p: (-freq[p], p)), freq


def reorder_radix(sets):
    if not sets:
        return []
    ranked, _ = page_frequency_order(sets)
    weight = {page: len(ranked) - 1 - rank for rank, page in enumerate(ranked)}
    keys = []
    for s in sets:
        key = 0
        for page in s:
            key |= 1 << weight[page]
        keys.append(key)
    # Descending keys put the set-bit partition first at every bit level;
    # sorted() is stable, which is what keeps equal patterns in input order.
    return sorted(range(len(sets)), key=keys.__getitem__, reverse=True)


# -- minwise hashing / LSH -------------------------------------------------------


def _scramble(page_ids):
    """Fixed 64-bit mixing bijection applied to page ids before hashing.

    Page ids are small consecutive integers; an affine hash alone keeps
    their linear structure and visibly biases min-collision rates. One
    round of multiply-xorshift mixing removes it.
    """
    with np.errstate(over="ignore"):
        z = page_ids + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def minwise_params(m, seed=0):
    """(multiplier, offset) pairs; x -> (a*x + b) mod 2^64 with odd a is a
    bijection, so each pair behaves like a random permutation of the domain."""
    if m < 1:
        raise ValidationError(f"need at least one hash function, got {m}")
    rng = np.random.default_rng(seed)
    mult = rng.integers(0, 1 << 63, size=m, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    offset = rng.integers(0, 1 << 64, size=m, dtype=np.uint64)
    return np.stack([mult, offset], axis=1)


def minwise_signature(pages, params):
    """Minimum image of the page set under each hash function."""
    if len(pages) == 0:
        raise ValidationError("cannot sign an empty page set")
    keys = _scramble(np.fromiter(pages, dtype=np.uint64, count=len(pages)))
    with np.errstate(over="ignore"):
        images = params[:, 0, None] * keys[None, :] + params[:, 1, None]
    return tuple(int(v) for v in images.min(axis=1))


class LshIndex:
    """Banded minwise signatures: vectors sharing any band bucket are candidates."""

    def __init__(self, signatures, bands):
        if bands < 1:
            raise ValidationError(f"need at least one band, got {bands}")
        m = len(signatures[0]) if signatures else bands
        if m < bands:
            raise ValidationError(f"{m} hashes cannot fill {bands} bands")
        width = m // bands
        self.bands = bands
        self.keys = []
        self.tables = [dict() for _ in range(bands)]
        for position, signature in enumerate(signatures):
            row = []
            for band in range(bands):
                key = tuple(signature[band * width : (band + 1) * width])
                row.append(key)
                self.tables[band].setdefault(key, []).append(position)
            self.keys.append(row)

    def candidates(self, position, visited):
        """Unvisited vectors co-located with `position` in any band bucket."""
        found = set()
        for band in range(self.bands):
            bucket = self.tables[band][self.keys[position][band]]
            live = [p for p in bucket if not visited[p]]
            # Buckets shrink as the walk visits their members; compacting
            # here keeps repeat scans of hot buckets from going quadratic.
            if len(live) != len(bucket):
                self.tables[band][self.keys[position][band]] = live
            found.update(live)
        found.discard(position)
        return found


def _nearest_neighbor_walk(fsets, index, start):
    n = len(fsets)
    visited = [False] * n
    order = [start]
    visited[start] = True
    current = start
    unvisited_floor = 0
    for _ in range(n - 1):
        candidates = index.candidates(current, visited)
        best = None
        best_diff = None
        for position in sorted(candidates):
            diff = len(fsets[position] - fsets[current])
            if best_diff is None or diff < best_diff:
                best, best_diff = position, diff
                if diff == 0:
                    break  # cannot be beaten; lowest position among zeros wins
        if best is None:
            # Dead end: no unvisited neighbor shares a bucket. Fall back to
            # the lowest-position unvisited vector.
            while visited[unvisited_floor]:
                unvisited_floor += 1
            best = unvisited_floor
        order.append(best)
        visited[best] = True
        current = best
    return order


def reorder_lsh(sets, m=DEFAULT_LSH_HASHES, b=DEFAULT_LSH_BANDS, seed=0):
    n = len(sets)
    if n == 0:
        return []
    params = minwise_params(m, seed)
    signatures = [minwise_signature(s, params) for s in sets]
    index = LshIndex(signatures, b)
    rng = np.random.default_rng(seed)
    start = int(rng.integers(n))
    fsets = [frozenset(s) for s in sets]
    return _nearest_neighbor_walk(fsets, index, start)


# -- k-center --------------------------------------------------------------------


def default_kcenter_k(n, max_set_size, budget):
    return max(2, math.ceil(n * max_set_size / budget / 4))


def kcenter_clusters(sets, budget, k=None, seed=0):
    """Final clusters, each with a page union that fits the budget (or a
    singleton), concatenated in greedy center-chain order."""
    n = len(sets)
    if n == 0:
        return []
    fsets = [frozenset(s) for s in sets]
    max_size = max(len(s) for s in fsets)
    if budget < max_size:
        raise PreconditionError(
            f"budget {budget} smaller than the largest page set ({max_size})"
        )
    if k is None:
        k = default_kcenter_k(n, max_size, budget)
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    return _kcenter_split(list(range(n)), fsets, k, budget, seed, depth=0)


def reorder_kcenter(sets, budget, k=None, seed=0):
    return [p for cluster in kcenter_clusters(sets, budget, k, seed) for p in cluster]


def _kcenter_split(positions, fsets, k, budget, seed, depth):
    if len(positions) <= 1:
        return [list(positions)]
    union = frozenset().union(*(fsets[p] for p in positions))
    if len(union) <= budget:
        return [list(positions)]
    if depth >= _KCENTER_MAX_DEPTH:
        return _chunk_split(positions, fsets, budget)
    rng = np.random.default_rng([seed, depth, positions[0], len(positions)])
    count = min(k, len(positions))
    centers = sorted(
        positions[i] for i in rng.choice(len(positions), size=count, replace=False)
    )
    members = {c: [] for c in centers}
    for p in positions:
        best = min(centers, key=lambda c: (len(fsets[p] - fsets[c]), c))
        members[best].append(p)
    live = [c for c in centers if members[c]]
    if len(live) == 1 and len(members[live[0]]) == len(positions):
        # No progress at this level; recurse anyway, the depth cap bounds it.
        pass
    chained = _chain_centers(live, fsets, rng)
    result = []
    for center in chained:
        result.extend(
            _kcenter_split(members[center], fsets, k, budget, seed, depth + 1)
        )
    return result


def _chain_centers(centers, fsets, rng):
    if len(centers) == 1:
        return list(centers)
    remaining = list(centers)
    current = remaining.pop(int(rng.integers(len(remaining))))
    chain = [current]
    while remaining:
        nxt = min(remaining, key=lambda c: (len(fsets[c] - fsets[current]), c))
        remaining.remove(nxt)
        chain.append(nxt)
        current = nxt
    return chain


def _chunk_split(positions, fsets, budget):
    """Order-preserving fallback: cut into consecutive chunks whose unions fit."""
    clusters = []
    chunk = []
    union = set()
    for p in positions:
        merged = union | fsets[p]
        if chunk and len(merged) > budget:
            clusters.append(chunk)
            chunk = [p]
            union = set(fsets[p])
        else:
            chunk.append(p)
            union = merged
    if chunk:
        clusters.append(chunk)
    return clusters


# -- dispatch ----------------------------------------------------------------------

HEURISTICS = ("none", "shuffle", "radix", "lsh", "kcenter")


def reorder(name, sets, budget, seed=0, lsh_m=DEFAULT_LSH_HASHES,
            lsh_b=DEFAULT_LSH_BANDS, kcenter_k=None):
    if name == "none":
        return reorder_none(len(sets))
    if name == "shuffle":
        return reorder_shuffle(len(sets), seed)
    if name == "radix":
        return reorder_radix(sets)
    if name == "lsh":
        return reorder_lsh(sets, lsh_m, lsh_b, seed)
    if name == "kcenter":
        return reorder_kcenter(sets, budget, kcenter_k, seed)
    raise ValidationError(f"unknown reorder heuristic {name!r}")
