"""
Thread-pool helper shared by the optimizer and the sampler.

Results always come back in submission order, so output does not depend on
the number of threads.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
import os

logger = logging.getLogger(__name__)


def resolve_threads(threads):
    """0 means one worker per CPU."""
    if threads is None or threads < 0:
        raise ValueError(f"threads must be 0 (auto) or a positive integer, got {threads}")
    return threads or os.cpu_count() or 1


def run_ordered(func, items, threads=1):
    """[func(item) for item in items], optionally on a thread pool."""
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug(f'Running {len(items)} tasks on {workers} threads')
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
