"""timing distance evaluation on growing random instances and over thread counts"""
import time

import numpy as np

from fiberot.measure import FiberedMeasure, euclidean, real_line, uniform_base
from fiberot.metric import scrmk
from fiberot.preprocessing import random_fiber, random_fibered
from fiberot.tools import threads_from_env


def best_time(m, n, p, q, threads, repeats=5):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        scrmk(m, n, p, q, threads=threads)
        times.append(time.perf_counter() - start)
    return min(times)


def dense_pair(rng, fibers=100, atoms=100):
    line = real_line()
    base = uniform_base(fibers)
    return tuple(FiberedMeasure(base, line, [random_fiber(rng, line, atoms) for _ in range(fibers)])
                 for _ in range(2))


if __name__ == '__main__':
    rng = np.random.default_rng(0)
    threads = threads_from_env()
    for space in (None, euclidean(2)):
        for atoms in (4, 16, 64):
            base = uniform_base(atoms)
            m = random_fibered(rng, base=base, space=space, max_atoms=40)
            n = random_fibered(rng, base=base, space=space, max_atoms=40)
            start = time.perf_counter()
            value = scrmk(m, n, 2, 4, threads=threads).value
            elapsed = time.perf_counter() - start
            print(f'{m.space.kind:>9} {atoms:3d} atoms: {value:.6f} in {elapsed:.3f} s')
    m, n = dense_pair(rng)
    serial = best_time(m, n, 2, 2, None)
    print(f'100 x 100 real1d, 1 thread: {serial:.4f} s')
    for count in (2, 4):
        t = best_time(m, n, 2, 2, count)
        print(f'100 x 100 real1d, {count} threads: {t:.4f} s, speedup {serial/t:.2f}')
