"""
Order-preserving per-graph parallelism.
"""

# Standard imports
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

# Third party imports
from loguru import logger

# Internal imports
from config.settings import settings

T = TypeVar("T")
R = TypeVar("R")


def map_graphs(func: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    """Apply ``func`` to every item, returning results in input order.

    Args:
        func: Pure per-graph transformation
        items: Graphs (or any items) to process
        workers: Thread count, defaults to ``settings.workers``; 1 runs inline

    Returns:
        ``[func(item) for item in items]``, computed on up to ``workers`` threads
    """
    workers = settings.workers if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug(f"Processing {len(items)} graphs on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
