import numpy as np
import pytest

from conftest import fibered
from fiberot.errors import (BaseMismatch, DimensionMismatch, EmptySupport, InvalidFiberSpace,
                            InvalidIsometry, MarginalMismatch, MissingChartEntry,
                            UnknownBaseLabel, ValidationError)
from fiberot.measure import (BaseMeasure, ChartAtlas, Orthogonal, Permutation, Reflection,
                             apply_chart_change, build_fibered, check_same_base, dirac,
                             euclidean, explicit_metric, flatten, identity_atlas,
                             make_discrete_measure, mix, moment_p, real_line,
                             reference_measure, uniform_base)


def test_make_discrete_measure_normalizes():
    mu = make_discrete_measure([0, 1], [2, 2])
    assert mu.weights.tolist() == [0.5, 0.5]


def test_make_discrete_measure_merges_duplicates():
    mu = make_discrete_measure([0, 0, 1], [0.25, 0.25, 0.5])
    assert mu.points.tolist() == [0, 1]
    assert mu.weights.tolist() == [0.5, 0.5]


def test_merging_compares_bits(plane):
    mu = make_discrete_measure([0.0, -0.0, 0.0], [0.25, 0.25, 0.5], space=real_line())
    assert len(mu) == 2
    assert sorted(np.signbit(mu.points).tolist()) == [False, True]
    assert mu.weights[~np.signbit(mu.points)][0] == 0.75
    nu = make_discrete_measure([[1.0, 0.0], [0.0, 2.0], [1.0, 0.0]], [1, 1, 2], space=plane)
    assert nu.points.tolist() == [[0.0, 2.0], [1.0, 0.0]]
    assert nu.weights.tolist() == [0.25, 0.75]


def test_make_discrete_measure_empty():
    with pytest.raises(EmptySupport):
        make_discrete_measure([3], [0])


def test_make_discrete_measure_dimension(plane):
    with pytest.raises(DimensionMismatch):
        make_discrete_measure([[0, 1, 2]], [1], space=plane)


def test_measures_are_immutable():
    mu = make_discrete_measure([0, 1], [1, 1])
    with pytest.raises(ValueError):
        mu.weights[0] = 1.0


def test_explicit_metric_checks():
    with pytest.raises(InvalidFiberSpace):
        explicit_metric([[0, 1], [2, 0]])
    with pytest.raises(InvalidFiberSpace):
        explicit_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(InvalidFiberSpace):
        explicit_metric([[0, 1], [1, 0]], y0=2)
    space = explicit_metric(1 - np.eye(3), y0=1)
    assert space.size == 3
    assert not space.is_geodesic


def test_base_measure_checks():
    with pytest.raises(ValidationError):
        BaseMeasure(['a', 'a'], [0.5, 0.5])
    with pytest.raises(ValidationError):
        BaseMeasure(['a', 'b'], [0.6, 0.5])
    with pytest.raises(UnknownBaseLabel):
        uniform_base(2).index('x')


def test_build_fibered_point_fibers(line):
    m = build_fibered(uniform_base(2), line, [('w0', 0.0, 0.5), ('w1', 3.0, 0.5)])
    assert m.fibers[0] == dirac(0.0, line)
    assert m.fibers[1] == dirac(3.0, line)


def test_build_fibered_grouping(line):
    m = build_fibered(uniform_base(2), line,
                      [('w0', 0.0, 0.25), ('w0', 1.0, 0.25), ('w1', 2.0, 0.5)])
    assert m.fibers[0].points.tolist() == [0.0, 1.0]
    assert m.fibers[0].weights.tolist() == [0.5, 0.5]
    assert m.fibers[1] == dirac(2.0, line)


def test_build_fibered_marginal_mismatch(line):
    with pytest.raises(MarginalMismatch) as err:
        build_fibered(uniform_base(2), line, [('w0', 0.0, 0.9), ('w1', 3.0, 0.1)])
    assert err.value.label == 'w0'


def test_build_fibered_unknown_label(line):
    with pytest.raises(UnknownBaseLabel):
        build_fibered(uniform_base(1), line, [('nope', 0.0, 1.0)])


def test_flatten_inverts_build(rng, line):
    m = fibered([[0.0, 1.0, 1.0], [2.0], [-1.0, 5.0]], [[1, 2, 1], [1], [3, 1]])
    rebuilt = build_fibered(m.base, line, flatten(m))
    for a, b in zip(m.fibers, rebuilt.fibers):
        assert np.array_equal(a.points, b.points)
        assert np.allclose(a.weights, b.weights, rtol=0, atol=1e-15)


def test_reflection_chart():
    m = fibered([[1.0], [2.0]])
    atlas = ChartAtlas({'w0': Reflection(), 'w1': Reflection()})
    out = apply_chart_change(m, atlas, 'reflected')
    assert [f.points.tolist() for f in out.fibers] == [[-1.0], [-2.0]]
    assert out.chart_id == 'reflected'


def test_rotation_chart(plane):
    m = fibered([[[1.0, 0.0]]], space=plane)
    atlas = ChartAtlas({'w0': Orthogonal([[0, -1], [1, 0]])})
    out = apply_chart_change(m, atlas, 'rotated')
    assert np.allclose(out.fibers[0].points, [[0.0, 1.0]])


def test_identity_atlas():
    m = fibered([[0.0, 2.0], [1.0]])
    out = apply_chart_change(m, identity_atlas(m.base), 'identity')
    assert out == m


def test_missing_chart_entry():
    m = fibered([[0.0], [1.0]])
    with pytest.raises(MissingChartEntry):
        apply_chart_change(m, ChartAtlas({'w0': Reflection()}), 'c')


def test_invalid_isometries(plane):
    m = fibered([[[1.0, 0.0]]], space=plane)
    with pytest.raises(InvalidIsometry):
        apply_chart_change(m, ChartAtlas({'w0': Orthogonal([[2, 0], [0, 1]])}), 'c')
    with pytest.raises(InvalidIsometry):
        apply_chart_change(m, ChartAtlas({'w0': Reflection()}), 'c')
    space = explicit_metric([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    path = fibered([[0]], space=space)
    with pytest.raises(InvalidIsometry):
        apply_chart_change(path, ChartAtlas({'w0': Permutation([1, 0, 2])}), 'c')
    flipped = apply_chart_change(path, ChartAtlas({'w0': Permutation([2, 1, 0])}), 'c')
    assert flipped.fibers[0].points.tolist() == [2]


def test_reference_measure():
    m = reference_measure(uniform_base(2), real_line())
    assert [f.points.tolist() for f in m.fibers] == [[0.0], [0.0]]
    m = reference_measure(BaseMeasure(['x'], [1.0]), euclidean(3))
    assert m.fibers[0].points.tolist() == [[0.0, 0.0, 0.0]]
    space = explicit_metric(1 - np.eye(3), y0=2)
    m = reference_measure(uniform_base(3), space)
    assert all(f.points.tolist() == [2] for f in m.fibers)
    assert moment_p(m, 1).tolist() == [0.0, 0.0, 0.0]


def test_moment_p():
    assert moment_p(fibered([[0.0], [3.0]]), 2).tolist() == [0.0, 9.0]
    assert moment_p(fibered([[-1.0, 1.0]]), 1).tolist() == [1.0]
    assert moment_p(fibered([[0.0, 2.0]]), 2).tolist() == [2.0]


def test_check_same_base():
    m = fibered([[0.0], [1.0]])
    with pytest.raises(BaseMismatch):
        check_same_base(m, fibered([[0.0], [1.0], [2.0]]))
    with pytest.raises(BaseMismatch):
        check_same_base(m, m.replace_fibers(m.fibers, chart_id='other'))


def test_mix():
    m0 = fibered([[0.0], [1.0]])
    m1 = fibered([[2.0], [1.0]])
    out = mix([m0, m1], [0.25, 0.75])
    assert out.fibers[0].points.tolist() == [0.0, 2.0]
    assert out.fibers[0].weights.tolist() == [0.25, 0.75]
    assert out.fibers[1] == dirac(1.0, real_line())
    assert np.allclose(out.base_marginal(), out.sigma)
