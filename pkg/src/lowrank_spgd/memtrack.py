"""Allocation tracking for the space-complexity checks.

numpy reports its data buffers to :mod:`tracemalloc`, so the traced peak is an
upper bound on the largest single array the solver ever held.
"""

from __future__ import annotations

import resource
import tracemalloc
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class AllocationStats:
    peak_bytes: int = 0
    final_bytes: int = 0

    @property
    def largest_allocation_bound(self):
        return self.peak_bytes


@contextmanager
def track_allocations():
    """Measure the peak traced heap growth inside the block."""
    stats = AllocationStats()
    owner = not tracemalloc.is_tracing()
    if owner:
        tracemalloc.start()
    tracemalloc.reset_peak()
    base = tracemalloc.get_traced_memory()[0]
    try:
        yield stats
    finally:
        current, peak = tracemalloc.get_traced_memory()
        stats.peak_bytes = max(peak - base, 0)
        stats.final_bytes = current - base
        if owner:
            tracemalloc.stop()


def max_rss_bytes():
    # ru_maxrss is KiB on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def space_budget_bytes(m, n, rank_budget, k, word=8, factor=8):
    """``factor * word * (m + n) * (rank_budget + k)``; the acceptance bound uses 64 bytes per slot."""
    return factor * word * (m + n) * (rank_budget + k)
