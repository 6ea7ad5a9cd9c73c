import logging
import sys
import time
from dataclasses import dataclass, field

import click
import numpy as np

from fiberot import LP_SIZE_CAP, TOLERANCES, __version__
from fiberot.barycenter import (BarycenterProblem, demo_nonunique, solve_fiberwise,
                                solve_general_q)
from fiberot.errors import FiberOTError, NotConverged, SchemaError
from fiberot.geodesic import geodesic, verify_geodesic
from fiberot.io import (certificate_document, dumps, emit, parse_certificate, read_document,
                        read_measure, to_document, write_measure)
from fiberot.measure import DiscreteMeasure, FiberedMeasure, flatten
from fiberot.metric import (assemble_certificate, cp_cost, dual_value, scrmk,
                            validate_certificate)
from fiberot.ot import fiber_coupling
from fiberot.sliced import (axis_directions, circle_directions, random_directions,
                            slice_embed, sliced_mk)
from fiberot.tools import THREADS_ENV, format_exponent, parse_exponent

_logger = logging.getLogger(__name__)

INPUT = click.Path(exists=True, dir_okay=False, readable=True)


class Exponent(click.ParamType):
    """p, q or kappa; 'inf' allowed"""
    name = 'exponent'

    def convert(self, value, param, ctx):
        try:
            return parse_exponent(value)
        except ValueError as err:
            self.fail(str(err), param, ctx)


EXPONENT = Exponent()


@dataclass
class RunConfig:
    """everything that determines the output of a run"""
    command: str = ''
    inputs: tuple = ()
    p: float = 2.0
    q: float = 2.0
    kappa: float | None = None
    lambdas: tuple = ()
    directions: int = 16
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    csv: bool = False
    threads: int = 1
    cap: int = LP_SIZE_CAP

    def tol(self, name):
        return self.tolerances.get(name, TOLERANCES[name])

    def emit(self, report, rows=None):
        if self.csv and rows is not None:
            report = {k: v for k, v in report.items() if not isinstance(v, (list, dict))}
            report['rows'] = rows
        emit(report, output=self.output, csv=self.csv)


def _parse_tolerances(values):
    out = {}
    for item in values:
        name, sep, value = item.partition('=')
        if not sep or name not in TOLERANCES:
            raise click.BadParameter(f'expected NAME=VALUE with NAME in {sorted(TOLERANCES)}, '
                                     f'got {item!r}', param_hint='--tol')
        try:
            out[name] = float(value)
        except ValueError:
            raise click.BadParameter(f'not a number: {value!r}', param_hint='--tol') from None
    return out


class FiberOTGroup(click.Group):
    """command group translating library errors to exit codes"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except NotConverged as err:
            report = {'status': 'not_converged', 'value': err.value, 'gap': err.gap}
            if isinstance(err.best, FiberedMeasure):
                report['barycenter'] = to_document(err.best)
            config = ctx.obj or RunConfig()
            emit(report, output=config.output)
            click.echo(f'error: {err}', err=True)
            ctx.exit(err.exit_code)
        except FiberOTError as err:
            click.echo(f'error: {err}', err=True)
            ctx.exit(err.exit_code)


def _fibered(path):
    m = read_measure(path)
    if not isinstance(m, FiberedMeasure):
        raise SchemaError('expected a fibered measure document', path=str(path))
    return m


def _discrete(path):
    m = read_measure(path)
    if not isinstance(m, DiscreteMeasure):
        raise SchemaError('expected a discrete measure document', path=str(path))
    return m


def _exponents(config, p, q):
    config.p, config.q = p, q
    return {'p': p, 'q': format_exponent(q)}


p_option = click.option('-p', type=EXPONENT, default='2', show_default=True,
                        help='fiber transport exponent')
q_option = click.option('-q', type=EXPONENT, default='2', show_default=True,
                        help='exponent over the base, number or inf')


@click.group(cls=FiberOTGroup)
@click.option('--threads', type=int, envvar=THREADS_ENV, default=1, show_default=True,
              help='worker threads for fiber subproblems')
@click.option('-o', '--output', metavar='PATH', help='report file, default stdout')
@click.option('--csv', is_flag=True, help='flattened CSV instead of JSON')
@click.option('-v', '--verbose', count=True, help='-v for progress, -vv for solver details')
@click.option('--tol', multiple=True, metavar='NAME=VALUE', help='override a tolerance')
@click.option('--seed', type=int, default=0, show_default=True,
              help='seed for random directions')
@click.option('--lp-cap', type=click.IntRange(min=1), default=LP_SIZE_CAP, show_default=True,
              help='largest transport LP, in plan entries')
@click.version_option(version=__version__, prog_name='fiberot')
@click.pass_context
def main(ctx, threads, output, csv, verbose, tol, seed, lp_cap):
    """Optimal transport between fibered discrete measures."""
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    ctx.obj = RunConfig(command=ctx.invoked_subcommand or '', seed=seed,
                        tolerances=_parse_tolerances(tol), output=output, csv=csv,
                        threads=max(threads, 1), cap=lp_cap)


@main.command()
@click.argument('m_path', type=INPUT)
@click.argument('n_path', type=INPUT)
@p_option
@q_option
@click.pass_obj
def distance(config, m_path, n_path, p, q):
    """Disintegrated (p,q) distance between two fibered measures."""
    config.inputs = (m_path, n_path)
    report = scrmk(_fibered(m_path), _fibered(n_path), p, q, threads=config.threads,
                   cap=config.cap)
    config.emit({'command': 'distance', **_exponents(config, p, q), 'value': report.value,
                 'labels': list(report.labels), 'per_fiber': report.per_fiber})


@main.command()
@click.argument('m_path', type=INPUT)
@click.argument('n_path', type=INPUT)
@p_option
@click.pass_obj
def couple(config, m_path, n_path, p):
    """Optimal plans and potentials fiber by fiber."""
    config.inputs = (m_path, n_path)
    m, n = _fibered(m_path), _fibered(n_path)
    fibers, rows = [], []
    for label, mu, nu in zip(m.base.atoms, m.fibers, n.fibers):
        cost, plan, duals = fiber_coupling(mu, nu, m.space, p, cap=config.cap)
        triples = plan.triples()
        fibers.append({'label': label, 'cost': cost, 'plan': triples,
                       'phi': duals.phi, 'psi': duals.psi})
        rows.extend({'label': label, 'source': mu.points[i].tolist(),
                     'target': nu.points[j].tolist(), 'mass': mass}
                    for i, j, mass in triples)
    config.emit({'command': 'couple', 'p': p, 'fibers': fibers}, rows=rows)


@main.command('cp-cost')
@click.argument('m_path', type=INPUT)
@click.argument('n_path', type=INPUT)
@p_option
@click.pass_obj
def cp_cost_command(config, m_path, n_path, p):
    """Optimal cost over couplings that stay inside fibers."""
    config.inputs = (m_path, n_path)
    m, n = _fibered(m_path), _fibered(n_path)
    value, plan = cp_cost(m, n, p, cap=config.cap)
    rows = [{'label': m.base.atoms[plan.row_atoms[i]], 'source': plan.row_points[i].tolist(),
             'target': plan.col_points[j].tolist(), 'mass': mass}
            for i, j, mass in plan.triples()]
    pp = scrmk(m, n, p, p, threads=config.threads, cap=config.cap).value**p
    config.emit({'command': 'cp-cost', 'p': p, 'value': value, 'scrmk_pp': pp,
                 'plan': rows}, rows=rows)


@main.command('geodesic')
@click.argument('m_path', type=INPUT)
@click.argument('n_path', type=INPUT)
@p_option
@q_option
@click.option('--tau', type=float, multiple=True, default=(0.5,), show_default=True,
              help='time in [0, 1], repeatable')
@click.option('--verify', is_flag=True, help='report the geodesic deviation over the taus')
@click.pass_obj
def geodesic_command(config, m_path, n_path, p, q, tau, verify):
    """Fiberwise geodesic interpolants."""
    config.inputs = (m_path, n_path)
    m0, m1 = _fibered(m_path), _fibered(n_path)
    path = geodesic(m0, m1, p, cap=config.cap)
    points = [(t, path(t)) for t in tau]
    report = {'command': 'geodesic', **_exponents(config, p, q),
              'points': [{'tau': t, 'measure': to_document(mt)} for t, mt in points]}
    if verify:
        check = verify_geodesic(m0, m1, tau, p, q, threads=config.threads)
        report.update(max_deviation=check.max_deviation, worst_pair=list(check.worst_pair),
                      distance=check.distance)
    rows = [{'tau': t, 'label': label, 'point': point, 'mass': mass}
            for t, mt in points for label, point, mass in flatten(mt)]
    config.emit(report, rows=rows)


def _read_grid(path):
    document, _ = read_document(path)
    if isinstance(document, dict):
        document = document.get('points')
    if not isinstance(document, list):
        raise SchemaError('grid must be a list of points', path=str(path))
    return np.asarray(document)


@main.command()
@click.argument('paths', type=INPUT, nargs=-1, required=True)
@click.option('-l', '--lambdas', type=float, multiple=True,
              help='barycentric weights, one per input, default uniform')
@p_option
@q_option
@click.option('--kappa', type=click.FloatRange(min=0), default=None,
              help='outer exponent, default p')
@click.option('--mode', type=click.Choice(['fiberwise', 'subgradient']), default='fiberwise',
              show_default=True)
@click.option('--grid', 'grid_path', type=INPUT, help='JSON list of candidate points')
@click.option('--iterations', type=int, default=200, show_default=True)
@click.option('--polish', type=int, default=100, show_default=True,
              help='cutting plane steps after the subgradient run')
@click.option('--gap-tol', type=float, default=1e-6, show_default=True)
@click.pass_obj
def barycenter(config, paths, lambdas, p, q, kappa, mode, grid_path, iterations, polish,
               gap_tol):
    """Barycenter of fibered measures."""
    measures = [_fibered(path) for path in paths]
    lambdas = lambdas or tuple(np.full(len(measures), 1/len(measures)))
    kappa = p if kappa is None else kappa
    config.inputs, config.lambdas, config.kappa = tuple(paths), tuple(lambdas), kappa
    problem = BarycenterProblem(measures, lambdas, p=p, q=q, kappa=kappa)
    grid = _read_grid(grid_path) if grid_path else None
    gap = None
    if mode == 'fiberwise':
        bary, value = solve_fiberwise(problem, grid=grid, threads=config.threads,
                                      cap=config.cap)
    else:
        if grid is None:
            raise click.UsageError('subgradient mode needs --grid')
        bary, value, gap = solve_general_q(problem, grid, iterations=iterations, polish=polish,
                                           gap_tol=gap_tol, threads=config.threads,
                                           cap=config.cap)
    report = {'command': 'barycenter', 'mode': mode, **_exponents(config, p, q),
              'kappa': kappa, 'value': value, 'gap': gap, 'barycenter': to_document(bary)}
    rows = [{'label': label, 'point': point, 'mass': mass}
            for label, point, mass in flatten(bary)]
    config.emit(report, rows=rows)


@main.command('dual-check')
@click.argument('m_path', type=INPUT)
@click.argument('n_path', type=INPUT)
@p_option
@q_option
@click.option('--certificate', 'cert_path', type=INPUT,
              help='certificate to check, assembled from optimal potentials if omitted')
@click.option('--save-certificate', metavar='PATH', help='write the checked certificate')
@click.pass_obj
def dual_check(config, m_path, n_path, p, q, cert_path, save_certificate):
    """Validate a dual certificate and compare its value with the primal."""
    config.inputs = (m_path, n_path)
    m, n = _fibered(m_path), _fibered(n_path)
    if cert_path:
        document, _ = read_document(cert_path)
        cert = parse_certificate(document, source=cert_path)
    else:
        cert = assemble_certificate(m, n, p, q, threads=config.threads, cap=config.cap)
    validate_certificate(m, n, cert, p, atol=config.tol('admissibility'),
                         norm_tol=config.tol('zeta_norm'))
    dual = dual_value(m, n, cert, p, atol=config.tol('admissibility'))
    primal = scrmk(m, n, p, cert.q, threads=config.threads, cap=config.cap).value**p
    if save_certificate:
        with open(save_certificate, 'w') as f:
            f.write(dumps(certificate_document(cert)))
    config.emit({'command': 'dual-check', **_exponents(config, p, cert.q), 'valid': True,
                 'heuristic': cert.heuristic, 'dual': dual, 'primal': primal,
                 'gap': primal - dual})


@main.command('slice')
@click.argument('mu_path', type=INPUT)
@click.argument('nu_path', type=INPUT)
@p_option
@q_option
@click.option('--directions', 'count', type=int, default=16, show_default=True)
@click.option('--kind', type=click.Choice(['circle', 'random', 'axis']), default='circle',
              show_default=True)
@click.pass_obj
def slice_command(config, mu_path, nu_path, p, q, count, kind):
    """Sliced distance of two measures in R^d and its fibered embedding."""
    config.inputs, config.directions = (mu_path, nu_path), count
    mu, nu = _discrete(mu_path), _discrete(nu_path)
    d = np.atleast_2d(mu.points).shape[1]
    if kind == 'axis':
        dirs = axis_directions(d)
    elif kind == 'circle':
        if d != 2:
            raise click.UsageError('circle directions need points in R^2')
        dirs = circle_directions(count)
    else:
        dirs = random_directions(count, d, seed=config.seed)
    sliced = sliced_mk(mu, nu, p, q, dirs, threads=config.threads)
    embedded = scrmk(slice_embed(mu, dirs), slice_embed(nu, dirs), p, q,
                     threads=config.threads).value
    config.emit({'command': 'slice', **_exponents(config, p, q), 'directions': len(dirs),
                 'sliced': sliced, 'embedded': embedded, 'difference': abs(sliced - embedded)})


@main.group()
def demo():
    """Reproducible example scenarios."""


@demo.command('nonunique-3-2')
@click.option('--n', 'atoms', type=int, default=200, show_default=True,
              help='atoms per discretized interval')
@click.option('-K', 'count', type=int, default=4, show_default=True,
              help='number of input measures, even')
@click.pass_obj
def nonunique(config, atoms, count):
    """Two distinct p=1 barycenters with objective 3/2."""
    start = time.perf_counter()
    report = demo_nonunique(n=atoms, K=count)
    _logger.info('demo finished in %.3f s', time.perf_counter() - start)
    config.emit({'command': 'demo nonunique-3-2', **report})


@main.command()
@click.argument('inputfile', type=INPUT)
@click.argument('outputfile', type=click.Path(dir_okay=False, writable=True))
def convert(inputfile, outputfile):
    """Convert a measure document between JSON and HDF5."""
    write_measure(read_measure(inputfile), outputfile)
