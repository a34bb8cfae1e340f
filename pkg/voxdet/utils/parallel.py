"""
Ordered thread-pool map.

Work is always split the same way regardless of the worker count, and results
come back in submission order, so one thread and many threads give
bit-identical output.
"""

from concurrent.futures import ThreadPoolExecutor

from voxdet.config.settings import THREADS


def ordered_map(fn, items, threads=None):
    items = list(items)
    threads = THREADS if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
