import numpy as np


def lq_norm(values, weights, q):
    """weighted L^q norm, maximum over positive weights for q=inf"""
    values = np.abs(np.asarray(values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if np.isinf(q):
        return float(values[weights > 0].max(initial=0.0))
    return float(np.dot(weights, values**q)**(1/q))


def holder_conjugate(r):
    """Hölder conjugate exponent r' with 1/r + 1/r' = 1"""
    if r == 1:
        return np.inf
    if np.isinf(r):
        return 1.0
    return r/(r-1)


def power0(base, exponent):
    """power with the convention 0**0 = 0"""
    base = np.asarray(base, dtype=float)
    out = np.power(base, exponent)
    return np.where(base == 0, 0.0, out)


def weighted_median(arr, w, rtol=1e-12):
    """general weighted median, lowest point on ties"""
    isort = np.argsort(arr, kind='stable')
    cs = w[isort].cumsum()
    cutoff = w.sum()/2
    try:
        return arr[isort][cs >= cutoff*(1-rtol)][0]
    except IndexError:
        return np.nan


def proj_simplex(v, s=1):
    """Euclidean projection on the positive simplex of radius s"""
    n, = v.shape
    if np.isclose(v.sum(), s, rtol=0, atol=1e-15) and np.all(v >= 0):
        return v
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    # number of positive components of the projection
    rho = np.nonzero(u*np.arange(1, n+1) > (cssv-s))[0][-1]
    theta = (cssv[rho]-s)/(rho+1.0)
    return (v-theta).clip(min=0)
