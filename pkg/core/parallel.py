"""Process-pool fan-out for independent, seeded tasks."""
import logging

from billiard import Pool
from django.conf import settings

logger = logging.getLogger('specs')


def effective_jobs(requested):
    """Clamp a requested worker count to SPECS_NUM_THREADS (0 = uncapped)."""
    jobs = max(1, int(requested or 1))
    cap = settings.SPECS_NUM_THREADS
    if cap > 0 and jobs > cap:
        logger.info('Capping jobs at %d (SPECS_NUM_THREADS)', cap)
        jobs = cap
    return jobs


def ordered_map(func, items, jobs=1):
    """``[func(item) for item in items]``, optionally over a billiard pool.

    Results come back in input order whatever the worker count.
    """
    items = list(items)
    jobs = effective_jobs(jobs)
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunksize = max(1, len(items) // (4 * jobs))
    with Pool(processes=jobs) as pool:
        return pool.map(func, items, chunksize=chunksize)
