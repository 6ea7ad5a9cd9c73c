"""reading and writing fibered measure documents and reports"""
from __future__ import annotations

import json
import logging
import os
from typing import Literal

import click
import h5py
import numpy as np
import pandas as pd
from pydantic import (BaseModel, ConfigDict, ValidationError as PydanticError, field_validator,
                      model_validator)

from fiberot import TOLERANCES
from fiberot.aliases.schema import (ATOMS, BASE, CHART_ID, DIM, DISTANCES, EUCLIDEAN,
                                    FIBER_SPACE, FIBERS, KIND, MATRIX, ORTHOGONAL,
                                    PERMUTATION, POINTS, REFLECTION, WEIGHTS, Y0)
from fiberot.errors import FiberOTError, MarginalMismatch, SchemaError
from fiberot.measure import (IDENTITY_CHART, BaseMeasure, ChartAtlas, FiberSpace,
                             FiberedMeasure, Identity, Orthogonal, Permutation, Reflection,
                             apply_chart_change, make_discrete_measure)
from fiberot.metric import DualCertificate
from fiberot.tools import format_exponent, parse_exponent

_logger = logging.getLogger(__name__)

H5_EXTENSIONS = ('.h5', '.hdf5')

# scalars on the line, coordinate lists in R^d, indices of an explicit metric
Points = list[int] | list[float] | list[list[float]]


class _Doc(BaseModel):
    model_config = ConfigDict(extra='forbid')


class BaseDoc(_Doc):
    atoms: list[str]
    weights: list[float]

    @model_validator(mode='after')
    def _check(self):
        if not self.atoms or len(self.atoms) != len(self.weights):
            raise ValueError(f'{len(self.atoms)} atoms but {len(self.weights)} weights')
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError('base atoms must be distinct')
        w = np.asarray(self.weights)
        if np.any(w <= 0) or abs(w.sum() - 1) > TOLERANCES['weights']:
            raise ValueError(f'base weights must be positive and sum to 1, sum is {w.sum()!r}')
        return self


class FiberSpaceDoc(_Doc):
    kind: Literal['real1d', 'euclidean', 'matrix']
    dim: int | None = None
    distances: list[list[float]] | None = None
    y0: float | list[float] | None = None

    @model_validator(mode='after')
    def _check(self):
        if self.kind == EUCLIDEAN and self.dim is None:
            raise ValueError('euclidean fiber space needs dim')
        if self.kind == MATRIX and self.distances is None:
            raise ValueError('matrix fiber space needs distances')
        return self


class FiberDoc(_Doc):
    points: Points
    weights: list[float]

    @model_validator(mode='after')
    def _check(self):
        if len(self.points) != len(self.weights):
            raise ValueError(f'{len(self.points)} points but {len(self.weights)} weights')
        return self


class IsometryDoc(_Doc):
    kind: Literal['identity', 'orthogonal', 'reflection', 'permutation']
    matrix: list[list[float]] | None = None
    center: float = 0.0
    sign: int = -1
    permutation: list[int] | None = None

    def to_isometry(self):
        if self.kind == ORTHOGONAL:
            return Orthogonal(self.matrix)
        if self.kind == REFLECTION:
            return Reflection(self.center, self.sign)
        if self.kind == PERMUTATION:
            return Permutation(self.permutation)
        return Identity()


class FiberedDoc(_Doc):
    base: BaseDoc
    fiber_space: FiberSpaceDoc
    fibers: list[FiberDoc]
    chart_id: str = IDENTITY_CHART
    atlas: dict[str, IsometryDoc] | None = None

    @model_validator(mode='after')
    def _check(self):
        if len(self.fibers) != len(self.base.atoms):
            raise ValueError(f'{len(self.fibers)} fibers for {len(self.base.atoms)} base atoms')
        return self


class MeasureDoc(_Doc):
    """plain discrete measure, points in R^d or on the real line"""
    points: Points
    weights: list[float]
    fiber_space: FiberSpaceDoc | None = None


class CertificateDoc(_Doc):
    zeta: list[float]
    phi: list[list[float]]
    psi: list[list[float]]
    q: float
    heuristic: bool = False

    @field_validator('q', mode='before')
    @classmethod
    def _exponent(cls, value):
        try:
            return parse_exponent(value)
        except TypeError:
            raise ValueError(f'exponent must be a number or "inf", got {value!r}') from None


def _line_of(text, loc):
    """approximate line of the field at loc in a JSON text"""
    if text is None:
        return None
    pos = 0
    for key in loc:
        if isinstance(key, str):
            found = text.find(f'"{key}"', pos)
            if found < 0:
                break
            pos = found
    return text.count('\n', 0, pos) + 1


def _schema_error(err, text=None, source=None):
    first = err.errors()[0]
    loc = first['loc']
    path = '.'.join(str(k) for k in loc)
    if source:
        path = f'{source}:{path}' if path else str(source)
    return SchemaError(first['msg'], path=path, line=_line_of(text, loc))


def _validate(model, document, text=None, source=None):
    try:
        return model.model_validate(document)
    except PydanticError as err:
        raise _schema_error(err, text, source) from None


def _space(doc):
    return FiberSpace(doc.kind, y0=doc.y0, dim=doc.dim,
                      distances=None if doc.distances is None else np.asarray(doc.distances))


def _fibered(doc):
    space = _space(doc.fiber_space)
    base = BaseMeasure(doc.base.atoms, doc.base.weights)
    fibers = []
    for label, s, fiber in zip(base.atoms, base.weights, doc.fibers):
        total = float(np.sum(fiber.weights))
        if abs(total - 1) > TOLERANCES['marginal']:
            raise MarginalMismatch(f'fiber over {label!r} has mass {total!r}, not 1',
                                   label=label, expected=s, found=s*total)
        fibers.append(make_discrete_measure(fiber.points, fiber.weights, space=space))
    m = FiberedMeasure(base, space, fibers, chart_id=doc.chart_id)
    if doc.atlas is not None:
        atlas = ChartAtlas({label: iso.to_isometry() for label, iso in doc.atlas.items()})
        m = apply_chart_change(m, atlas, IDENTITY_CHART)
    return m


def parse_document(document, text=None, source=None):
    """Validate a decoded document into a FiberedMeasure or DiscreteMeasure.

    A document with an atlas is brought into the identity chart through it."""
    if not isinstance(document, dict):
        raise SchemaError('document must be an object', path=source)
    try:
        if BASE in document:
            return _fibered(_validate(FiberedDoc, document, text, source))
        if POINTS in document:
            doc = _validate(MeasureDoc, document, text, source)
            space = _space(doc.fiber_space) if doc.fiber_space else None
            return make_discrete_measure(doc.points, doc.weights, space=space)
    except FiberOTError:
        raise
    except (ValueError, TypeError) as err:
        raise SchemaError(str(err), path=source) from None
    raise SchemaError(f'document needs {BASE!r} or {POINTS!r}', path=source, line=1)


def parse_input(document, source=None):
    """measure from a JSON string or an already decoded document"""
    if isinstance(document, (str, bytes)):
        try:
            decoded = json.loads(document)
        except json.JSONDecodeError as err:
            raise SchemaError(err.msg, path=source, line=err.lineno) from None
        return parse_document(decoded, text=document, source=source)
    return parse_document(document, source=source)


def _points_list(points):
    return np.asarray(points).tolist()


def space_document(space):
    doc = {KIND: space.kind}
    if space.kind == EUCLIDEAN:
        doc[DIM] = space.dim
    if space.kind == MATRIX:
        doc[DISTANCES] = space.distances.tolist()
    doc[Y0] = np.asarray(space.y0).tolist()
    return doc


def to_document(m):
    """JSON compatible document of a fibered or discrete measure"""
    if isinstance(m, FiberedMeasure):
        return {BASE: {ATOMS: list(m.base.atoms), WEIGHTS: m.sigma.tolist()},
                FIBER_SPACE: space_document(m.space),
                FIBERS: [{POINTS: _points_list(f.points), WEIGHTS: f.weights.tolist()}
                         for f in m.fibers],
                CHART_ID: m.chart_id}
    return {POINTS: _points_list(m.points), WEIGHTS: m.weights.tolist()}


def certificate_document(cert):
    return {'zeta': np.asarray(cert.zeta).tolist(),
            'phi': [np.asarray(t).tolist() for t in cert.phi],
            'psi': [np.asarray(t).tolist() for t in cert.psi],
            'q': format_exponent(cert.q),
            'heuristic': cert.heuristic}


def parse_certificate(document, source=None):
    if not isinstance(document, dict):
        raise SchemaError('certificate must be an object', path=source)
    doc = _validate(CertificateDoc, document, source=source)
    return DualCertificate(np.asarray(doc.zeta), tuple(np.asarray(t) for t in doc.phi),
                           tuple(np.asarray(t) for t in doc.psi), doc.q,
                           heuristic=doc.heuristic)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return format_exponent(obj) if obj > 0 else str(obj)
    return obj


def dumps(obj):
    """JSON text; floats are written with their shortest exact repr"""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + '\n'


def report_frame(report):
    """flat table of a report: scalars repeated on every row of its vectors

    A 'rows' entry (list of records) becomes the table itself."""
    flat = {k: v for k, v in _jsonable(report).items()}
    if 'rows' in flat:
        frame = pd.DataFrame(flat.pop('rows'))
        for k, v in flat.items():
            if not isinstance(v, (list, dict)):
                frame[k] = v
        return frame
    vectors = {k: v for k, v in flat.items()
               if isinstance(v, list) and all(not isinstance(x, (list, dict)) for x in v)}
    scalars = {k: v for k, v in flat.items() if not isinstance(v, (list, dict))}
    if not vectors:
        return pd.DataFrame([scalars])
    length = max(len(v) for v in vectors.values())
    frame = pd.DataFrame({k: pd.Series(v) for k, v in vectors.items()}, index=range(length))
    for k, v in scalars.items():
        frame[k] = v
    return frame


def emit(report, output=None, csv=False):
    """Write a report as JSON (or CSV) to a file path or stdout."""
    if csv:
        text = report_frame(report).to_csv(index=False, float_format='%.17g')
    else:
        text = dumps(report)
    if output is None:
        click.echo(text, nl=False)
        return
    with open(output, 'w') as f:
        f.write(text)
    _logger.info('wrote %s', output)


def read_h5(path):
    """document dict from an HDF5 file written by write_h5"""
    with h5py.File(path, 'r') as f:
        if BASE not in f:
            return {POINTS: f[POINTS][()].tolist(), WEIGHTS: f[WEIGHTS][()].tolist()}
        atoms = [a.decode() if isinstance(a, bytes) else str(a) for a in f[BASE][ATOMS][()]]
        space = {k: _h5_value(v) for k, v in f[FIBER_SPACE].attrs.items()}
        if DISTANCES in f[FIBER_SPACE]:
            space[DISTANCES] = f[FIBER_SPACE][DISTANCES][()].tolist()
        fibers = []
        for i in range(len(atoms)):
            g = f[FIBERS][str(i)]
            fibers.append({POINTS: g[POINTS][()].tolist(), WEIGHTS: g[WEIGHTS][()].tolist()})
        return {BASE: {ATOMS: atoms, WEIGHTS: f[BASE][WEIGHTS][()].tolist()},
                FIBER_SPACE: space, FIBERS: fibers,
                CHART_ID: _h5_value(f.attrs.get(CHART_ID, IDENTITY_CHART))}


def _h5_value(value):
    if isinstance(value, bytes):
        return value.decode()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_h5(m, path):
    """Write a fibered or discrete measure to HDF5."""
    doc = to_document(m)
    with h5py.File(path, 'w') as f:
        if BASE not in doc:
            f[POINTS] = np.asarray(doc[POINTS])
            f[WEIGHTS] = np.asarray(doc[WEIGHTS])
            return
        base = f.create_group(BASE)
        base[ATOMS] = np.array(doc[BASE][ATOMS], dtype=h5py.string_dtype())
        base[WEIGHTS] = np.asarray(doc[BASE][WEIGHTS])
        space = f.create_group(FIBER_SPACE)
        for key, value in doc[FIBER_SPACE].items():
            if key == DISTANCES:
                space[DISTANCES] = np.asarray(value)
            else:
                space.attrs[key] = value
        fibers = f.create_group(FIBERS)
        for i, fiber in enumerate(doc[FIBERS]):
            g = fibers.create_group(str(i))
            g[POINTS] = np.asarray(fiber[POINTS])
            g[WEIGHTS] = np.asarray(fiber[WEIGHTS])
        f.attrs[CHART_ID] = doc[CHART_ID]


def is_h5(path):
    return os.path.splitext(str(path))[1].lower() in H5_EXTENSIONS


def read_document(path):
    """decoded document and its text (None for HDF5) from a file"""
    if is_h5(path):
        return read_h5(path), None
    with open(path) as f:
        text = f.read()
    try:
        return json.loads(text), text
    except json.JSONDecodeError as err:
        raise SchemaError(err.msg, path=str(path), line=err.lineno) from None


def read_measure(path):
    """measure from a JSON or HDF5 file"""
    document, text = read_document(path)
    return parse_document(document, text=text, source=str(path))


def write_measure(m, path):
    if is_h5(path):
        write_h5(m, path)
        return
    with open(path, 'w') as f:
        f.write(dumps(to_document(m)))
