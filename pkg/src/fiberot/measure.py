"""fiber spaces, discrete measures and their disintegrations over a finite base"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from fiberot import TOLERANCES
from fiberot.aliases.schema import REAL1D, EUCLIDEAN, MATRIX
from fiberot.errors import (EmptySupport, DimensionMismatch, InvalidFiberSpace,
                            MarginalMismatch, UnknownBaseLabel, MissingChartEntry,
                            InvalidIsometry, BaseMismatch, NonGeodesicFiberSpace,
                            ValidationError)

_logger = logging.getLogger(__name__)

FIBER_KINDS = (REAL1D, EUCLIDEAN, MATRIX)
IDENTITY_CHART = 'identity'


def _readonly(arr):
    arr = np.array(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FiberSpace:
    """metric space Y of the fibers with a basepoint y0

    kind is one of 'real1d', 'euclidean' (with dim) or 'matrix' (with an explicit
    distance matrix, points are indices)."""
    kind: str
    y0: object = None
    dim: int | None = None
    distances: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in FIBER_KINDS:
            raise InvalidFiberSpace(f'unknown fiber space kind {self.kind!r}')
        if self.kind == REAL1D:
            y0 = 0.0 if self.y0 is None else float(self.y0)
            object.__setattr__(self, 'dim', 1)
        elif self.kind == EUCLIDEAN:
            if self.dim is None or int(self.dim) < 1:
                raise InvalidFiberSpace('euclidean fiber space needs a positive dim')
            object.__setattr__(self, 'dim', int(self.dim))
            y0 = np.zeros(self.dim) if self.y0 is None else np.asarray(self.y0, dtype=float)
            if y0.shape != (self.dim,):
                raise DimensionMismatch(f'basepoint of shape {y0.shape}, expected ({self.dim},)')
            y0 = _readonly(y0)
        else:
            dist = _check_distances(self.distances)
            object.__setattr__(self, 'distances', _readonly(dist))
            object.__setattr__(self, 'dim', None)
            y0 = 0 if self.y0 is None else self.y0
            if int(y0) != y0 or not 0 <= int(y0) < dist.shape[0]:
                raise InvalidFiberSpace(f'basepoint {y0} is not an index of the distance matrix')
            y0 = int(y0)
        if self.kind != MATRIX and not np.all(np.isfinite(y0)):
            raise InvalidFiberSpace('basepoint must be finite')
        object.__setattr__(self, 'y0', y0)

    def __eq__(self, other):
        if not isinstance(other, FiberSpace) or self.kind != other.kind:
            return False
        if self.kind == MATRIX:
            return self.y0 == other.y0 and np.array_equal(self.distances, other.distances)
        return self.dim == other.dim and np.array_equal(self.y0, other.y0)

    __hash__ = None

    @property
    def is_geodesic(self):
        return self.kind != MATRIX

    @property
    def size(self):
        """number of points of a finite space"""
        if self.kind == MATRIX:
            return self.distances.shape[0]
        return None

    def basepoint(self):
        """y0 as a one-point array"""
        return self.points_array([self.y0])

    def points_array(self, points):
        """Validate points and return them as an array of this space."""
        if self.kind == REAL1D:
            arr = np.asarray(points, dtype=float)
            if arr.ndim == 2 and arr.shape[1] == 1:
                arr = arr[:, 0]
            if arr.ndim != 1:
                raise DimensionMismatch(f'real line points must be scalars, got shape {arr.shape}')
        elif self.kind == EUCLIDEAN:
            arr = np.asarray(points, dtype=float)
            if arr.ndim == 1 and self.dim == 1:
                arr = arr[:, None]
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise DimensionMismatch(f'points of shape {arr.shape}, expected (n, {self.dim})')
        else:
            raw = np.asarray(points)
            if raw.ndim != 1:
                raise DimensionMismatch(f'matrix space points must be indices, got shape {raw.shape}')
            arr = raw.astype(int) if raw.size else np.zeros(0, dtype=int)
            if not np.array_equal(arr, raw) or np.any(arr < 0) or np.any(arr >= self.size):
                raise DimensionMismatch(f'point indices must lie in [0, {self.size})')
            return arr
        if not np.all(np.isfinite(arr)):
            raise ValidationError('points must be finite')
        return arr

    def distance_matrix(self, x, y):
        """pairwise distances d(x_i, y_j)"""
        if self.kind == REAL1D:
            return np.abs(np.subtract.outer(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))
        if self.kind == EUCLIDEAN:
            return cdist(np.atleast_2d(x), np.atleast_2d(y))
        return self.distances[np.ix_(np.asarray(x, dtype=int), np.asarray(y, dtype=int))]

    def cost_matrix(self, x, y, p):
        """pairwise costs d(x_i, y_j)^p"""
        return self.distance_matrix(x, y)**p

    def dist_to_basepoint(self, x):
        return self.distance_matrix(x, self.basepoint())[:, 0]

    def interpolate(self, x, y, tau):
        """constant speed geodesic points between x and y"""
        if not self.is_geodesic:
            raise NonGeodesicFiberSpace('explicit metric fibers have no point interpolation')
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (1-tau)*x + tau*y


def _check_distances(distances, atol=TOLERANCES['isometry']):
    """Validate an explicit distance matrix."""
    if distances is None:
        raise InvalidFiberSpace('matrix fiber space needs distances')
    dist = np.asarray(distances, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] == 0:
        raise InvalidFiberSpace(f'distance matrix must be square, got shape {dist.shape}')
    if not np.all(np.isfinite(dist)) or np.any(dist < 0):
        raise InvalidFiberSpace('distances must be finite and nonnegative')
    if not np.array_equal(dist, dist.T):
        raise InvalidFiberSpace('distance matrix is not symmetric')
    if np.any(np.diag(dist) != 0):
        raise InvalidFiberSpace('distance matrix has nonzero diagonal')
    tol = atol*max(1.0, dist.max())
    for j in range(dist.shape[0]):
        if np.any(dist > dist[:, [j]] + dist[[j], :] + tol):
            raise InvalidFiberSpace(f'triangle inequality fails through point {j}')
    return dist


def real_line(y0=0.0):
    return FiberSpace(REAL1D, y0=y0)


def euclidean(dim, y0=None):
    return FiberSpace(EUCLIDEAN, y0=y0, dim=dim)


def explicit_metric(distances, y0=0):
    return FiberSpace(MATRIX, y0=y0, distances=distances)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """weighted finite point set"""
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = _readonly(self.points)
        weights = _readonly(np.asarray(self.weights, dtype=float))
        if weights.ndim != 1 or len(points) != weights.size:
            raise ValidationError(f'{len(points)} points but {weights.size} weights')
        if np.any(weights < 0):
            raise ValidationError('negative weight')
        if weights.size == 0:
            raise EmptySupport('measure without points')
        if abs(weights.sum() - 1) > TOLERANCES['weights']:
            raise ValidationError(f'weights sum to {weights.sum()!r}, not 1')
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'weights', weights)

    def __len__(self):
        return self.weights.size

    def __eq__(self, other):
        return (isinstance(other, DiscreteMeasure)
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


def _unique_bits(points):
    """distinct points in increasing order and the inverse map

    Points are equal only when their bytes are, so -0.0 and 0.0 stay apart."""
    flat = np.ascontiguousarray(points).reshape(len(points), -1)
    raw = flat.view(np.dtype((np.void, flat.dtype.itemsize*flat.shape[1])))[:, 0]
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.lexsort(flat[first].T[::-1])
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return points[first[order]], rank[inverse.ravel()]


def make_discrete_measure(points, weights, space=None):
    """Normalized discrete measure with duplicate points merged.

    Zero weight points are dropped and merged points are sorted."""
    if space is None:
        points = np.asarray(points)
    else:
        points = space.points_array(points)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(points) != weights.size:
        raise ValidationError(f'{len(points)} points but {weights.size} weights')
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValidationError('weights must be finite and nonnegative')
    positive = weights > 0
    if not positive.any():
        raise EmptySupport('no point has positive weight')
    points = points[positive]
    weights = weights[positive]
    merged, inverse = _unique_bits(points)
    summed = np.bincount(inverse, weights=weights, minlength=len(merged))
    total = summed.sum()
    if abs(total - 1) > TOLERANCES['weights']:
        summed = summed/total
    return DiscreteMeasure(merged, summed)


def dirac(point, space):
    return make_discrete_measure(space.points_array([point]), [1.0])


@dataclass(frozen=True, eq=False)
class BaseMeasure:
    """probability sigma on finitely many labelled base atoms"""
    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        weights = _readonly(np.asarray(self.weights, dtype=float))
        if len(atoms) == 0:
            raise EmptySupport('base without atoms')
        if weights.shape != (len(atoms),):
            raise ValidationError(f'{len(atoms)} atoms but {weights.size} weights')
        if len(set(atoms)) != len(atoms):
            raise ValidationError('base atom labels are not distinct')
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise ValidationError('base weights must be positive')
        if abs(weights.sum() - 1) > TOLERANCES['weights']:
            raise ValidationError(f'base weights sum to {weights.sum()!r}, not 1')
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'weights', weights)

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        return (isinstance(other, BaseMeasure) and self.atoms == other.atoms
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def index(self, label):
        try:
            return self.atoms.index(str(label))
        except ValueError:
            raise UnknownBaseLabel(label) from None


def uniform_base(n, prefix='w'):
    """base of n equally weighted atoms"""
    return BaseMeasure([f'{prefix}{i}' for i in range(n)], np.full(n, 1/n))


@dataclass(frozen=True, eq=False)
class FiberedMeasure:
    """disintegration of a measure over a finite base: sigma and one fiber per atom"""
    base: BaseMeasure
    space: FiberSpace
    fibers: tuple
    chart_id: str = IDENTITY_CHART

    def __post_init__(self):
        fibers = tuple(self.fibers)
        if len(fibers) != len(self.base):
            raise ValidationError(f'{len(fibers)} fibers for {len(self.base)} base atoms')
        for fiber in fibers:
            if not isinstance(fiber, DiscreteMeasure):
                raise ValidationError('fibers must be discrete measures')
            self.space.points_array(fiber.points)
        object.__setattr__(self, 'fibers', fibers)
        object.__setattr__(self, 'chart_id', str(self.chart_id))

    def __len__(self):
        return len(self.fibers)

    def __eq__(self, other):
        return (isinstance(other, FiberedMeasure) and self.base == other.base
                and self.space == other.space and self.chart_id == other.chart_id
                and all(a == b for a, b in zip(self.fibers, other.fibers)))

    __hash__ = None

    @property
    def sigma(self):
        return self.base.weights

    def base_marginal(self):
        """total mass over each base atom"""
        return self.sigma*np.array([f.weights.sum() for f in self.fibers])

    def replace_fibers(self, fibers, chart_id=None):
        chart_id = self.chart_id if chart_id is None else chart_id
        return FiberedMeasure(self.base, self.space, fibers, chart_id=chart_id)


def check_same_base(*measures, atol=TOLERANCES['weights']):
    """Raise BaseMismatch unless all fibered measures share base and fiber space."""
    first = measures[0]
    for other in measures[1:]:
        if other.base.atoms != first.base.atoms:
            raise BaseMismatch('base atoms differ')
        if not np.allclose(other.sigma, first.sigma, rtol=0, atol=atol):
            raise BaseMismatch('base weights differ')
        if other.space != first.space:
            raise BaseMismatch('fiber spaces differ')
        if other.chart_id != first.chart_id:
            raise BaseMismatch(f'charts differ: {first.chart_id!r} and {other.chart_id!r}')


def build_fibered(base, space, records, chart_id=IDENTITY_CHART, atol=TOLERANCES['marginal']):
    """Disintegrate (label, point, mass) records over base."""
    points = defaultdict(list)
    masses = defaultdict(list)
    for label, point, mass in records:
        if mass < 0:
            raise ValidationError(f'negative mass at base atom {label!r}')
        i = base.index(label)
        points[i].append(point)
        masses[i].append(mass)
    fibers = []
    for i, label in enumerate(base.atoms):
        total = float(np.sum(masses[i])) if masses[i] else 0.0
        if abs(total - base.weights[i]) > atol:
            raise MarginalMismatch(f'mass {total!r} over base atom {label!r}, sigma is '
                                   f'{base.weights[i]!r}', label=label,
                                   expected=base.weights[i], found=total)
        fibers.append(make_discrete_measure(space.points_array(points[i]), masses[i]))
    _logger.debug('built %d fibers from records', len(fibers))
    return FiberedMeasure(base, space, fibers, chart_id=chart_id)


def _python_point(point):
    if np.ndim(point) == 0:
        return point.item()
    return tuple(np.asarray(point).tolist())


def flatten(m):
    """fibered measure as (label, point, mass) records"""
    records = []
    for label, s, fiber in zip(m.base.atoms, m.sigma, m.fibers):
        for point, w in zip(fiber.points, fiber.weights):
            records.append((label, _python_point(point), s*w))
    return records


def mix(measures, coefficients):
    """fiberwise convex combination of fibered measures on a common base"""
    coefficients = np.asarray(coefficients, dtype=float)
    if np.any(coefficients < 0) or abs(coefficients.sum() - 1) > TOLERANCES['weights']:
        raise ValidationError('mixture coefficients must be a probability vector')
    check_same_base(*measures)
    first = measures[0]
    fibers = []
    for i in range(len(first)):
        pts = np.concatenate([m.fibers[i].points for m in measures])
        wts = np.concatenate([c*m.fibers[i].weights for c, m in zip(coefficients, measures)])
        fibers.append(make_discrete_measure(pts, wts))
    return first.replace_fibers(fibers)


class Isometry:
    """distance preserving map of a fiber space"""
    kinds = FIBER_KINDS

    def __call__(self, points):
        raise NotImplementedError

    def check(self, space, atol=TOLERANCES['isometry']):
        if space.kind not in self.kinds:
            raise InvalidIsometry(f'{type(self).__name__} does not act on {space.kind} fibers')


class Identity(Isometry):

    def __call__(self, points):
        return points


class Orthogonal(Isometry):
    """x -> Qx on euclidean fibers"""
    kinds = (EUCLIDEAN,)

    def __init__(self, matrix):
        self.matrix = _readonly(np.asarray(matrix, dtype=float))

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.matrix.T

    def check(self, space, atol=TOLERANCES['isometry']):
        super().check(space)
        q = self.matrix
        if q.shape != (space.dim, space.dim):
            raise InvalidIsometry(f'orthogonal map of shape {q.shape} on dimension {space.dim}')
        if not np.allclose(q.T @ q, np.eye(space.dim), rtol=0, atol=atol):
            raise InvalidIsometry('matrix is not orthogonal')


class Reflection(Isometry):
    """t -> c + sign*(t - c) on the real line"""
    kinds = (REAL1D,)

    def __init__(self, center=0.0, sign=-1):
        self.center = float(center)
        self.sign = int(sign)

    def __call__(self, points):
        return self.center + self.sign*(np.asarray(points, dtype=float) - self.center)

    def check(self, space, atol=TOLERANCES['isometry']):
        super().check(space)
        if self.sign not in (1, -1):
            raise InvalidIsometry(f'reflection sign must be +1 or -1, got {self.sign}')


class Permutation(Isometry):
    """relabelling of points of an explicit metric preserving all distances"""
    kinds = (MATRIX,)

    def __init__(self, permutation):
        self.permutation = _readonly(np.asarray(permutation, dtype=int))

    def __call__(self, points):
        return self.permutation[np.asarray(points, dtype=int)]

    def check(self, space, atol=TOLERANCES['isometry']):
        super().check(space)
        perm = self.permutation
        if not np.array_equal(np.sort(perm), np.arange(space.size)):
            raise InvalidIsometry('not a permutation of the fiber points')
        dist = space.distances
        if not np.array_equal(dist[np.ix_(perm, perm)], dist):
            raise InvalidIsometry('permutation does not preserve distances')


@dataclass(frozen=True)
class ChartAtlas:
    """one fiber isometry per base atom"""
    maps: dict = field(default_factory=dict)

    def __getitem__(self, label):
        try:
            return self.maps[label]
        except KeyError:
            raise MissingChartEntry(label) from None


def identity_atlas(base):
    return ChartAtlas({label: Identity() for label in base.atoms})


def apply_chart_change(m, atlas, new_chart_id):
    """Express every fiber of m through its atom's chart isometry."""
    fibers = []
    for label, fiber in zip(m.base.atoms, m.fibers):
        iso = atlas[label]
        iso.check(m.space)
        fibers.append(make_discrete_measure(iso(fiber.points), fiber.weights, space=m.space))
    return m.replace_fibers(fibers, chart_id=new_chart_id)


def reference_measure(base, space, chart_id=IDENTITY_CHART):
    """the measure with a dirac at the basepoint in every fiber"""
    delta = DiscreteMeasure(space.basepoint(), [1.0])
    return FiberedMeasure(base, space, [delta]*len(base), chart_id=chart_id)


def moment_p(m, p):
    """per atom p-th moment of the fibers about the basepoint"""
    if p < 1:
        raise ValidationError(f'p must be >= 1, got {p}')
    return np.array([np.dot(f.weights, m.space.dist_to_basepoint(f.points)**p)
                     for f in m.fibers])
