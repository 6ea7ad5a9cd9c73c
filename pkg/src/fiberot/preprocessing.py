"""discretization, perturbation and random instances of fibered measures"""
import numpy as np

from fiberot.aliases.schema import EUCLIDEAN, REAL1D
from fiberot.errors import ValidationError
from fiberot.measure import (FiberedMeasure, BaseMeasure, make_discrete_measure,
                             real_line, uniform_base)


def interval_measure(a, b, n):
    """uniform measure on [a, b] as n equal atoms at subinterval midpoints"""
    if n < 1 or not b > a:
        raise ValidationError(f'need n >= 1 and a < b, got n={n}, [{a}, {b}]')
    points = a + (b - a)*(np.arange(n) + 0.5)/n
    return make_discrete_measure(points, np.ones(n))


def constant_fibers(base, space, fiber):
    """the same fiber over every base atom"""
    return FiberedMeasure(base, space, [fiber]*len(base))


def random_weights(rng, n, low=0.05):
    """positive weights summing to 1, each bounded away from zero"""
    w = low + rng.random(n)
    return w/w.sum()


def random_fiber(rng, space, atoms, scale=1.0):
    """random discrete measure with the given number of atoms"""
    if space.kind == REAL1D:
        points = scale*rng.normal(size=atoms)
    elif space.kind == EUCLIDEAN:
        points = scale*rng.normal(size=(atoms, space.dim))
    else:
        points = rng.choice(space.size, size=min(atoms, space.size), replace=False)
    return make_discrete_measure(points, random_weights(rng, len(points)), space=space)


def random_base(rng, atoms, prefix='w'):
    return BaseMeasure([f'{prefix}{i}' for i in range(atoms)], random_weights(rng, atoms))


def random_fibered(rng, base=None, space=None, max_atoms=6, scale=1.0):
    """random fibered measure, fiber sizes drawn from 1..max_atoms"""
    base = uniform_base(3) if base is None else base
    space = real_line() if space is None else space
    fibers = [random_fiber(rng, space, int(rng.integers(1, max_atoms + 1)), scale=scale)
              for _ in range(len(base))]
    return FiberedMeasure(base, space, fibers)


def jitter(m, rng, scale=1e-3):
    """Perturb fiber points of m by gaussian noise of the given scale."""
    if not m.space.is_geodesic:
        raise ValidationError('jitter needs real line or euclidean fibers')
    fibers = [make_discrete_measure(mu.points + scale*rng.normal(size=mu.points.shape),
                                    mu.weights, space=m.space)
              for mu in m.fibers]
    return m.replace_fibers(fibers)
