import json

import numpy as np
import pytest

from fiberot.measure import (FiberedMeasure, euclidean, make_discrete_measure, real_line,
                             uniform_base)
from fiberot.preprocessing import random_base, random_fibered


def fibered(points_per_fiber, weights_per_fiber=None, base=None, space=None):
    """fibered measure from nested lists of points"""
    space = real_line() if space is None else space
    base = uniform_base(len(points_per_fiber)) if base is None else base
    if weights_per_fiber is None:
        weights_per_fiber = [np.ones(len(pts)) for pts in points_per_fiber]
    fibers = [make_discrete_measure(pts, w, space=space)
              for pts, w in zip(points_per_fiber, weights_per_fiber)]
    return FiberedMeasure(base, space, fibers)


def random_family(rng, count, atoms=None, max_atoms=6, space=None):
    """count random fibered measures on one random base"""
    base = random_base(rng, atoms or int(rng.integers(1, 6)))
    return [random_fibered(rng, base=base, space=space, max_atoms=max_atoms)
            for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def point_pair():
    """sigma = (1/2, 1/2), fibers (d0, d0) and (d1, d3)"""
    return fibered([[0.0], [0.0]]), fibered([[1.0], [3.0]])


@pytest.fixture
def line():
    return real_line()


@pytest.fixture
def plane():
    return euclidean(2)


@pytest.fixture
def write_json(tmp_path):
    def write(name, document):
        path = tmp_path/name
        path.write_text(json.dumps(document))
        return str(path)
    return write


@pytest.fixture
def delta_doc():
    return {'base': {'atoms': ['a', 'b'], 'weights': [0.5, 0.5]},
            'fiber_space': {'kind': 'real1d', 'y0': 0.0},
            'fibers': [{'points': [0.0], 'weights': [1.0]},
                       {'points': [3.0], 'weights': [1.0]}]}


