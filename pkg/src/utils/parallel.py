"""Worker pool sizing and an order-preserving parallel map."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import psutil

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    """Physical core count, falling back to logical cores and then 1."""
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply func to every item, returning results in input order.

    Args:
        func: Pure function of one item
        items: Inputs
        workers: Thread count; None uses default_workers(), 1 runs serially

    Returns:
        List of results aligned with items
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug(f"parallel_map over {len(items)} items with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
