"""distance error under vanishing perturbations of the fiber points"""
import numpy as np
import pandas as pd

from fiberot.metric import scrmk
from fiberot.preprocessing import jitter, random_fibered


if __name__ == '__main__':
    rng = np.random.default_rng(7)
    m = random_fibered(rng)
    n = random_fibered(rng, base=m.base)
    rows = []
    for p, q in [(1, 1), (2, 2), (2, np.inf)]:
        limit = scrmk(m, n, p, q).value
        for eps in 10.0**-np.arange(1, 8):
            # mean over repeated draws
            errors = [abs(scrmk(jitter(m, rng, eps), n, p, q).value - limit) for _ in range(10)]
            rows.append({'p': p, 'q': q, 'eps': eps, 'error': np.mean(errors)})
    print(pd.DataFrame(rows).pivot_table(index='eps', columns=['p', 'q'], values='error'))
