import os
from typing import Callable, Iterable, List, Optional

from joblib import Parallel, delayed

ENV_THREADS = "NPH2PH_THREADS"


def resolve_jobs(n_jobs: Optional[int] = None) -> int:
    """Number of workers, capped by the NPH2PH_THREADS environment variable"""
    n_jobs = 1 if n_jobs is None else int(n_jobs)
    if n_jobs < 1:
        n_jobs = os.cpu_count() or 1
    cap = os.environ.get(ENV_THREADS)
    if cap:
        try:
            n_jobs = min(n_jobs, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got '{cap}'")
    return n_jobs


def ordered_map(func: Callable, items: Iterable, n_jobs: Optional[int] = 1) -> List:
    """
    func applied to every item, results in input order.

    Runs serially with one worker, otherwise through joblib. Callers reduce
    the returned list in order, so the schedule never changes a result.
    """
    items = list(items)
    n_jobs = resolve_jobs(n_jobs)
    if n_jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs)(delayed(func)(item) for item in items)
