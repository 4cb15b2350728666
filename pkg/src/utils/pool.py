import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, TypeVar

from src.constants import Workers

T = TypeVar("T")
R = TypeVar("R")
log = logging.getLogger(__name__)


def worker_count(n_tasks: int, limit: Optional[int] = None) -> int:
    """Number of worker processes to use for `n_tasks` independent tasks."""
    limit = Workers.THREADS if limit is None else limit
    return max(1, min(limit, n_tasks))


def ordered_map(func: Callable[[T], R], items: Iterable[T], *, workers: Optional[int] = None) -> list[R]:
    """
    Apply `func` to every item, fanning out to a process pool, and return the results in input order.

    `func` has to be a module level function (the tasks are pickled). With a single worker everything
    runs in the calling process.
    """
    tasks = list(items)
    n_workers = worker_count(len(tasks), workers)
    if n_workers == 1:
        return [func(task) for task in tasks]

    log.debug(f"Fanning out {len(tasks)} tasks of {func.__qualname__} to {n_workers} workers")
    chunksize = max(1, len(tasks) // (4 * n_workers))
    with ProcessPoolExecutor(max_workers=n_workers) as executor:
        return list(executor.map(func, tasks, chunksize=chunksize))
