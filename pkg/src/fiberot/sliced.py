"""sliced (p,q) distances on euclidean space and their fibered embedding"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from fiberot import TOLERANCES
from fiberot.errors import DimensionMismatch, ValidationError
from fiberot.math import lq_norm
from fiberot.measure import (BaseMeasure, FiberedMeasure, euclidean, make_discrete_measure,
                             real_line)
from fiberot.tools import fibermap

_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """unit vectors with probability weights, a discretized sphere measure"""
    directions: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        n = dirs.shape[0]
        weights = np.full(n, 1/n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if weights.shape != (n,):
            raise ValidationError(f'{weights.size} weights for {n} directions')
        if np.any(weights <= 0) or abs(weights.sum() - 1) > TOLERANCES['weights']:
            raise ValidationError('direction weights must be positive and sum to 1')
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1) > TOLERANCES['isometry']):
            raise ValidationError('directions must be unit vectors')
        object.__setattr__(self, 'directions', dirs)
        object.__setattr__(self, 'weights', weights)

    def __len__(self):
        return self.directions.shape[0]

    @property
    def dim(self):
        return self.directions.shape[1]

    def labels(self):
        return [f'dir{i}' for i in range(len(self))]


def axis_directions(d):
    """e_1..e_d, -e_1..-e_d with equal weights"""
    eye = np.eye(d)
    return DirectionSet(np.vstack([eye, -eye]))


def circle_directions(n):
    """n equally spaced directions on the unit circle"""
    angles = 2*np.pi*np.arange(n)/n
    return DirectionSet(np.column_stack([np.cos(angles), np.sin(angles)]))


def random_directions(n, d, seed=0):
    """n seeded uniform random directions on the unit sphere of R^d"""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return DirectionSet(dirs)


def _projections(mu, dirs):
    points = np.asarray(mu.points, dtype=float)
    if points.ndim != 2 or points.shape[1] != dirs.dim:
        raise DimensionMismatch(f'points of shape {points.shape} for directions in '
                                f'dimension {dirs.dim}')
    return points @ dirs.directions.T


def slice_embed(mu, dirs):
    """fibered measure over the directions with projected fibers on the real line"""
    proj = _projections(mu, dirs)
    base = BaseMeasure(dirs.labels(), dirs.weights)
    fibers = [make_discrete_measure(proj[:, j], mu.weights) for j in range(len(dirs))]
    return FiberedMeasure(base, real_line(), fibers)


def _quantile_cost(x, a, y, b, p):
    """int_0^1 |F^-1(t) - G^-1(t)|^p dt for weighted samples"""
    ix = np.argsort(x)
    iy = np.argsort(y)
    xs, ca = x[ix], np.cumsum(a[ix])
    ys, cb = y[iy], np.cumsum(b[iy])
    total, t, i, j = 0.0, 0.0, 0, 0
    while i < xs.size and j < ys.size:
        upto = min(ca[i], cb[j])
        total += max(upto - t, 0.0)*abs(xs[i] - ys[j])**p
        t = upto
        if ca[i] <= upto:
            i += 1
        if cb[j] <= upto:
            j += 1
    return total


def sliced_mk(mu, nu, p, q, dirs, threads=None):
    """L^q over directions of the p-distances between projected measures

    Finitely many directions give a pseudometric: distinct measures can agree on
    every chosen projection."""
    if mu.points.ndim != 2 or nu.points.ndim != 2 or mu.points.shape[1] != nu.points.shape[1]:
        raise DimensionMismatch('measures must live in the same euclidean space')
    pm = _projections(mu, dirs)
    pn = _projections(nu, dirs)
    costs = fibermap(lambda j: _quantile_cost(pm[:, j], mu.weights, pn[:, j], nu.weights, p),
                     range(len(dirs)), threads=threads)
    per_direction = np.asarray(costs)**(1/p)
    _logger.debug('sliced distance over %d directions', len(dirs))
    return lq_norm(per_direction, dirs.weights, q)


def euclidean_measure(points, weights):
    """discrete measure of points in R^d"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return make_discrete_measure(points, weights, space=euclidean(points.shape[1]))
