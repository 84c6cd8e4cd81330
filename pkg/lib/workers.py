import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil

from lib.errors import ConfigError
from lib.log_setup import logger


def resolve_workers(requested=None):
    """Thread count: explicit request, then FKM_WORKERS, then physical cores."""
    if requested:
        workers = int(requested)
    elif os.environ.get("FKM_WORKERS"):
        try:
            workers = int(os.environ["FKM_WORKERS"])
        except ValueError:
            raise ConfigError(f"FKM_WORKERS must be an integer, got {os.environ['FKM_WORKERS']!r}")
    else:
        workers = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    return workers


def ordered_map(fn, items, workers=1):
    """map() that may run on a thread pool; results keep the order of ``items``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(workers, len(items))
    logger.debug(f"Running {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed, *keys):
    """64-bit seed that depends only on (seed, keys)."""
    sequence = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
