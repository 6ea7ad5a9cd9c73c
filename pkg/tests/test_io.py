import json

import numpy as np
import pytest

from conftest import fibered
from fiberot.errors import MarginalMismatch, SchemaError
from fiberot.io import (certificate_document, dumps, parse_certificate, parse_document,
                        parse_input, read_measure, report_frame, to_document, write_measure)
from fiberot.measure import DiscreteMeasure, dirac, explicit_metric, real_line
from fiberot.metric import assemble_certificate
from fiberot.preprocessing import random_fibered


def test_parse_fibered(delta_doc):
    m = parse_input(delta_doc)
    assert m.base.atoms == ('a', 'b')
    assert m.fibers[0] == dirac(0.0, real_line())
    assert m.fibers[1] == dirac(3.0, real_line())
    assert m.chart_id == 'identity'


def test_parse_discrete():
    mu = parse_input({'points': [[0, 0], [1, 1]], 'weights': [1, 1],
                      'fiber_space': {'kind': 'euclidean', 'dim': 2}})
    assert isinstance(mu, DiscreteMeasure)
    assert mu.weights.tolist() == [0.5, 0.5]


def test_base_weights_rejected(delta_doc):
    delta_doc['base']['weights'] = [0.6, 0.5]
    text = json.dumps(delta_doc, indent=2)
    with pytest.raises(SchemaError) as err:
        parse_input(text, source='m.json')
    assert err.value.path == 'm.json:base'
    assert err.value.line == 2
    assert err.value.exit_code == 2


def test_fiber_count_mismatch(delta_doc):
    delta_doc['fibers'] = delta_doc['fibers'][:1]
    with pytest.raises(SchemaError) as err:
        parse_input(delta_doc)
    assert '1 fibers for 2 base atoms' in str(err.value)


def test_unknown_field(delta_doc):
    delta_doc['colour'] = 'red'
    with pytest.raises(SchemaError) as err:
        parse_input(delta_doc, source='m.json')
    assert err.value.path == 'm.json:colour'


def test_non_numeric_points(delta_doc):
    delta_doc['fibers'][0]['points'] = ['x']
    with pytest.raises(SchemaError) as err:
        parse_input(delta_doc, source='m.json')
    assert err.value.path.startswith('m.json:fibers.0.points')


def test_ragged_points():
    with pytest.raises(SchemaError) as err:
        parse_input({'points': [[0.0, 1.0], [2.0]], 'weights': [1, 1],
                     'fiber_space': {'kind': 'euclidean', 'dim': 2}}, source='mu.json')
    assert err.value.path == 'mu.json'


def test_certificate_schema():
    tables = {'zeta': [1.0], 'phi': [[0.0]], 'psi': [[0.0]]}
    assert parse_certificate({**tables, 'q': 'inf'}).q == np.inf
    for q in ('abc', 0.5, [2]):
        with pytest.raises(SchemaError):
            parse_certificate({**tables, 'q': q}, source='c.json')
    with pytest.raises(SchemaError):
        parse_certificate([tables])


def test_fiber_mass_mismatch(delta_doc):
    delta_doc['fibers'][1]['weights'] = [0.5]
    with pytest.raises(MarginalMismatch) as err:
        parse_input(delta_doc)
    assert err.value.label == 'b'


def test_malformed_json():
    with pytest.raises(SchemaError) as err:
        parse_input('{\n  "base": [\n', source='broken.json')
    assert err.value.line is not None
    with pytest.raises(SchemaError):
        parse_input('[1, 2]')
    with pytest.raises(SchemaError):
        parse_input({'fibers': []})


def test_atlas_brings_document_to_identity_chart(delta_doc):
    delta_doc['chart_id'] = 'flipped'
    delta_doc['atlas'] = {'a': {'kind': 'reflection'}, 'b': {'kind': 'reflection', 'center': 1.0}}
    m = parse_input(delta_doc)
    assert m.chart_id == 'identity'
    assert [f.points.tolist() for f in m.fibers] == [[0.0], [-1.0]]


def test_document_round_trip(rng):
    m = random_fibered(rng)
    assert parse_document(json.loads(dumps(to_document(m)))) == m


@pytest.mark.parametrize('name', ['m.json', 'm.h5'])
def test_file_round_trip(tmp_path, rng, plane, name):
    for m in (random_fibered(rng), random_fibered(rng, space=plane),
              fibered([[0, 2], [1]], [[1, 3], [1]], space=explicit_metric(1 - np.eye(3), y0=1))):
        path = str(tmp_path/name)
        write_measure(m, path)
        assert read_measure(path) == m


def test_discrete_h5_round_trip(tmp_path):
    mu = DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
    path = str(tmp_path/'mu.h5')
    write_measure(mu, path)
    assert read_measure(path) == mu


def test_dumps_infinity():
    text = dumps({'q': np.inf, 'value': np.float64(0.1), 'per_fiber': np.array([1.0, 3.0])})
    assert json.loads(text) == {'q': 'inf', 'value': 0.1, 'per_fiber': [1.0, 3.0]}


def test_report_frame():
    frame = report_frame({'command': 'distance', 'value': 2.0, 'labels': ['a', 'b'],
                          'per_fiber': [1.0, 3.0]})
    assert frame.columns.tolist() == ['labels', 'per_fiber', 'command', 'value']
    assert frame['value'].tolist() == [2.0, 2.0]
    rows = report_frame({'p': 1.0, 'rows': [{'label': 'a', 'mass': 0.5}]})
    assert rows.to_dict('records') == [{'label': 'a', 'mass': 0.5, 'p': 1.0}]


def test_certificate_round_trip(point_pair):
    cert = assemble_certificate(*point_pair, 2, np.inf)
    back = parse_certificate(json.loads(dumps(certificate_document(cert))))
    assert back.q == np.inf
    assert np.array_equal(back.zeta, cert.zeta)
    assert all(np.array_equal(a, b) for a, b in zip(back.psi, cert.psi))
