"""
misc helpers
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from fiberot.aliases.schema import INF

THREADS_ENV = 'FIBEROT_THREADS'


def parse_exponent(value):
    """exponent from number or 'inf'"""
    if isinstance(value, str):
        if value.strip().lower() in (INF, 'infinity', '∞'):
            return np.inf
    value = float(value)
    if np.isnan(value) or value < 1:
        raise ValueError(f'exponent must be >= 1 or inf, got {value}')
    return value


def format_exponent(value):
    """exponent for documents, 'inf' for infinity"""
    if np.isinf(value):
        return INF
    return float(value)


def threads_from_env(default=1):
    """worker count from environment"""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, default)))
    except ValueError:
        return default


def fibermap(fun, *iterables, threads=None):
    """map over fibers, preserving order

    With threads, each worker gets one contiguous chunk of the items."""
    if threads is None or threads <= 1:
        return list(map(fun, *iterables))
    items = list(zip(*iterables))
    workers = max(1, min(threads, len(items)))
    bounds = np.linspace(0, len(items), workers + 1).astype(int)

    def run(lo, hi):
        return [fun(*item) for item in items[lo:hi]]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        chunks = executor.map(run, bounds[:-1], bounds[1:])
        return [out for chunk in chunks for out in chunk]
