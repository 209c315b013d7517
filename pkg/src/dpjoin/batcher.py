"""Greedy batching of an ordered vector sequence under a page budget.

Consecutive vectors are merged into one batch as long as the union of
their page-request sets still fits in the memory budget; the batch is then
requested from the buffer manager as a single set, so each page is
requested once per batch instead of once per vector.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import OversizedVectorError, ValidationError

_BRUTE_FORCE_LIMIT = 20


@dataclass
class Batch:
    positions: list  # consecutive positions into the ordered sequence
    pages: frozenset  # union of the members' page-request sets

    @property
    def request_count(self):
        return len(self.pages)


def greedy_batches(ordered_sets, budget):
    """Maximal consecutive batches whose page unions fit in `budget`."""
    batches = []
    positions = []
    union = set()
    for position, s in enumerate(ordered_sets):
        s = set(s)
        if len(s) > budget:
            raise OversizedVectorError(
                f"vector at position {position} needs {len(s)} pages, budget is {budget}",
                position=position,
            )
        merged = union | s
        if positions and len(merged) > budget:
            batches.append(Batch(positions, frozenset(union)))
            positions = [position]
            union = s
        else:
            positions.append(position)
            union = merged
    if positions:
        batches.append(Batch(positions, frozenset(union)))
    return batches


def total_requests(batches):
    return sum(b.request_count for b in batches)


def brute_force_batches(ordered_sets, budget):
    """Exact minimum of the total page requests over every feasible
    split of the sequence into consecutive batches. Exponential in n;
    refuses n > 20."""
    n = len(ordered_sets)
    if n > _BRUTE_FORCE_LIMIT:
        raise ValidationError(f"brute force capped at n <= {_BRUTE_FORCE_LIMIT}, got {n}")
    fsets = []
    for position, s in enumerate(ordered_sets):
        s = frozenset(s)
        if len(s) > budget:
            raise OversizedVectorError(
                f"vector at position {position} needs {len(s)} pages, budget is {budget}",
                position=position,
            )
        fsets.append(s)
    if n == 0:
        return 0
    best = None
    # Each of the 2^(n-1) cut masks encodes one split into consecutive runs.
    for mask in range(1 << (n - 1)):
        total = 0
        union = set(fsets[0])
        feasible = True
        for j in range(1, n):
            if mask & (1 << (j - 1)):
                total += len(union)
                union = set(fsets[j])
            else:
                union |= fsets[j]
                if len(union) > budget:
                    feasible = False
                    break
        if not feasible:
            continue
        total += len(union)
        if best is None or total < best:
            best = total
    return best
