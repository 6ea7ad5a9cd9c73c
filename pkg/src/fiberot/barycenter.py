"""barycenters for the disintegrated metric and their dual certificates

The solvers return one minimizer; minimizers need not be unique (see
nonunique_instance)."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import bisect, linprog

from fiberot import LP_SIZE_CAP, STEP_SCHEDULE, TOLERANCES
from fiberot.aliases.schema import REAL1D
from fiberot.errors import (ConstraintViolation, FiberOTError, NotConverged,
                            SizeCapExceeded, UnsupportedFiberKind, UnsupportedProblem,
                            ValidationError)
from fiberot.math import lq_norm, power0, proj_simplex, weighted_median
from fiberot.measure import (FiberedMeasure, check_same_base, make_discrete_measure,
                             real_line, uniform_base)
from fiberot.metric import optimal_zeta, scrmk, zeta_norm
from fiberot.ot import HIGHS_OPTIONS, c_transform, fiber_mk, transport_1d, transport_lp
from fiberot.preprocessing import constant_fibers, interval_measure
from fiberot.tools import fibermap

_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BarycenterProblem:
    """minimize sum_k lambda_k scrmk_{p,q}(m_k, n)^kappa over n"""
    measures: tuple
    lambdas: np.ndarray
    p: float = 2.0
    q: float = 2.0
    kappa: float = 2.0

    def __post_init__(self):
        measures = tuple(self.measures)
        lambdas = np.asarray(self.lambdas, dtype=float)
        if len(measures) < 2:
            raise ValidationError('a barycenter problem needs at least two measures')
        if lambdas.shape != (len(measures),):
            raise ValidationError(f'{lambdas.size} lambdas for {len(measures)} measures')
        if np.any(lambdas <= 0) or abs(lambdas.sum() - 1) > TOLERANCES['weights']:
            raise ValidationError('lambdas must be positive and sum to 1')
        if not 1 <= self.p < np.inf or not self.q >= 1 or self.kappa < 0:
            raise ValidationError('need 1 <= p < inf, q >= 1 and kappa >= 0')
        check_same_base(*measures)
        object.__setattr__(self, 'measures', measures)
        object.__setattr__(self, 'lambdas', lambdas)

    @property
    def K(self):
        return len(self.measures)

    @property
    def space(self):
        return self.measures[0].space

    @property
    def base(self):
        return self.measures[0].base

    @property
    def sigma(self):
        return self.measures[0].sigma

    @property
    def r(self):
        return self.q/self.p

    def fiber_inputs(self, i):
        """the K input fibers over base atom i"""
        return [m.fibers[i] for m in self.measures]


@dataclass(frozen=True, eq=False)
class BarycenterDualCertificate:
    """(zeta_k, xi_k) tables: zeta is (K, atoms), xi[i] is (K, len(support[i]))"""
    zeta: np.ndarray
    support: tuple
    xi: tuple


def objective(problem, n, threads=None):
    """sum_k lambda_k scrmk_{p,q}(m_k, n)^kappa with 0^0 = 0"""
    check_same_base(problem.measures[0], n)
    dists = [scrmk(m, n, problem.p, problem.q, threads=threads).value
             for m in problem.measures]
    return float(np.dot(problem.lambdas, power0(dists, problem.kappa)))


def _level_minimizer(values, lambdas, p):
    """argmin_x sum_k lambda_k |x - values_k|^p"""
    if p == 2:
        return np.dot(lambdas, values)
    if p == 1:
        return weighted_median(values, lambdas)
    lo, hi = values.min(), values.max()
    if lo == hi:
        return lo

    def slope(x):
        d = x - values
        return np.dot(lambdas, np.sign(d)*np.abs(d)**(p-1))

    return bisect(slope, lo, hi, xtol=1e-12)


def quantile_barycenter(fibers, lambdas, p):
    """exact barycenter on the real line by levelwise minimization of quantiles"""
    quantiles, cums = [], []
    for mu in fibers:
        order = np.argsort(mu.points, kind='stable')
        cum = np.minimum(np.cumsum(mu.weights[order]), 1.0)
        cum[-1] = 1.0
        quantiles.append(mu.points[order])
        cums.append(cum)
    levels = np.unique(np.concatenate(cums))
    lower = np.concatenate([[0.0], levels[:-1]])
    masses = levels - lower
    keep = masses > 0
    lower, masses = lower[keep], masses[keep]
    table = np.array([qs[np.minimum(np.searchsorted(cum, lower, side='right'), qs.size-1)]
                      for qs, cum in zip(quantiles, cums)])
    if p == 2:
        points = lambdas @ table
    else:
        points = np.array([_level_minimizer(table[:, l], lambdas, p)
                           for l in range(table.shape[1])])
    return make_discrete_measure(points, masses)


def fixed_support_barycenter(fibers, lambdas, grid, space, p, cap=LP_SIZE_CAP):
    """barycenter weights on a candidate grid by one linear program"""
    grid = space.points_array(grid)
    g = len(grid)
    sizes = [len(mu) for mu in fibers]
    size = g*sum(sizes) + g
    if size > cap:
        raise SizeCapExceeded(size, cap)
    cost = np.concatenate([lam*space.cost_matrix(mu.points, grid, p).ravel()
                           for lam, mu in zip(lambdas, fibers)] + [np.zeros(g)])
    rows = sparse.block_diag([sparse.kron(sparse.eye(n), np.ones((1, g))) for n in sizes])
    cols = sparse.block_diag([sparse.kron(np.ones((1, n)), sparse.eye(g)) for n in sizes])
    a_eq = sparse.bmat([[rows, None],
                        [cols, sparse.vstack([-sparse.eye(g)]*len(fibers))]]).tocsr()
    b_eq = np.concatenate([mu.weights for mu in fibers] + [np.zeros(g*len(fibers))])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method='highs-ds',
                  options=HIGHS_OPTIONS)
    _logger.debug('fixed support barycenter LP with %d variables: %s', size, res.message)
    if res.status != 0:
        raise FiberOTError(f'barycenter LP failed: {res.message}')
    return make_discrete_measure(grid, res.x[-g:].clip(min=0), space=space)


def _fiber_grids(problem, grid):
    """one candidate grid per fiber; a tuple gives the grids fiber by fiber"""
    n = len(problem.base)
    if isinstance(grid, tuple):
        if len(grid) != n:
            raise ValidationError(f'{len(grid)} grids for {n} fibers')
        return tuple(problem.space.points_array(g) for g in grid)
    return (problem.space.points_array(grid),)*n


def solve_fiberwise(problem, grid=None, threads=None, cap=LP_SIZE_CAP):
    """exact barycenter for q = kappa = p, fiber by fiber

    Real line fibers are solved exactly without a grid; otherwise the barycenter
    is searched on the given candidate grid."""
    if problem.q != problem.p or problem.kappa != problem.p:
        raise UnsupportedProblem('fiberwise solver needs q = kappa = p')
    n = len(problem.base)
    if grid is None:
        if problem.space.kind != REAL1D:
            raise UnsupportedFiberKind(f'{problem.space.kind} fibers need a candidate grid')
        fibers = fibermap(lambda i: quantile_barycenter(problem.fiber_inputs(i),
                                                        problem.lambdas, problem.p),
                          range(n), threads=threads)
    else:
        grids = _fiber_grids(problem, grid)
        fibers = fibermap(lambda i: fixed_support_barycenter(problem.fiber_inputs(i),
                                                             problem.lambdas, grids[i],
                                                             problem.space, problem.p,
                                                             cap=cap),
                          range(n), threads=threads)
    bary = FiberedMeasure(problem.base, problem.space, fibers,
                          chart_id=problem.measures[0].chart_id)
    return bary, objective(problem, bary, threads=threads)


def _transport(x, a, y, b, space, p, cap):
    if space.kind == REAL1D:
        cost, _, duals = transport_1d(x, a, y, b, p, duals=True)
    else:
        cost, _, duals = transport_lp(x, a, y, b, space, p, cap=cap)
    return max(cost, 0.0), duals


class GridObjective:
    """barycenter objective over fiber weight vectors on fixed grids

    Calls return the value and one subgradient block per fiber, built from the
    grid side optimal potentials and the optimal zeta of each input."""

    def __init__(self, problem, grids, threads=None, cap=LP_SIZE_CAP):
        self.problem = problem
        self.grids = grids
        self.threads = threads
        self.cap = cap

    def _fiber(self, i, w):
        out = [_transport(mu.points, mu.weights, self.grids[i], w, self.problem.space,
                          self.problem.p, self.cap)
               for mu in self.problem.fiber_inputs(i)]
        return np.array([c for c, _ in out]), np.array([d.psi for _, d in out])

    def __call__(self, weights):
        pb = self.problem
        solved = fibermap(self._fiber, range(len(weights)), weights, threads=self.threads)
        f = np.array([c for c, _ in solved]).T
        value = sum(lam*lq_norm(fk, pb.sigma, pb.r) for lam, fk in zip(pb.lambdas, f))
        zeta = np.array([optimal_zeta(fk, pb.sigma, pb.r) for fk in f])
        grads = [-s*((pb.lambdas*zeta[:, i]) @ psi)
                 for i, (s, (_, psi)) in enumerate(zip(pb.sigma, solved))]
        return float(value), grads


def _kelley_step(cuts, sizes):
    """minimizer and minimum of the cutting plane model over products of simplices"""
    nw = sum(sizes)
    values = np.array([v for v, _, _ in cuts])
    grads = np.array([g for _, g, _ in cuts])
    points = np.array([w for _, _, w in cuts])
    a_ub = np.hstack([grads, -np.ones((len(cuts), 1))])
    b_ub = np.einsum('ij,ij->i', grads, points) - values
    a_eq = sparse.hstack([sparse.block_diag([np.ones((1, s)) for s in sizes]),
                          sparse.csr_matrix((len(sizes), 1))])
    c = np.zeros(nw + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.ones(len(sizes)),
                  bounds=[(0, None)]*nw + [(None, None)], method='highs')
    if res.status != 0:
        raise FiberOTError(f'cutting plane LP failed: {res.message}')
    return res.x[:-1], res.fun


def _split(z, sizes):
    out = np.split(z, np.cumsum(sizes)[:-1])
    return [np.clip(w, 0, None)/np.clip(w, 0, None).sum() for w in out]


def solve_general_q(problem, support_grid, iterations=200, step=STEP_SCHEDULE,
                    polish=100, gap_tol=1e-6, threads=None, cap=LP_SIZE_CAP):
    """barycenter for kappa = p <= q < inf on fixed candidate grids

    Projected subgradient with steps a/(b+t) on normalized subgradients, then
    cutting plane polishing on the collected subgradients. Returns the best
    candidate, its exact objective and a bound on the gap to the grid optimum."""
    pb = problem
    if pb.kappa != pb.p or not pb.p <= pb.q < np.inf:
        raise UnsupportedProblem('subgradient solver needs kappa = p <= q < inf')
    grids = _fiber_grids(pb, support_grid)
    sizes = [len(g) for g in grids]
    fun = GridObjective(pb, grids, threads=threads, cap=cap)
    sigma = pb.sigma
    a, b = step
    weights = [np.full(s, 1/s) for s in sizes]
    best_value, best = np.inf, weights
    cuts = []

    def record(w):
        nonlocal best_value, best
        value, grads = fun(w)
        cuts.append((value, np.concatenate(grads), np.concatenate(w)))
        if value < best_value:
            best_value, best = value, w
        return grads

    for t in range(max(iterations, 1)):
        grads = record(weights)
        scaled = [g/s for g, s in zip(grads, sigma)]
        gnorm = np.sqrt(sum(np.dot(g, g) for g in scaled))
        if gnorm == 0:
            break
        eta = a/(b + t)
        weights = [proj_simplex(w - eta*g/gnorm) for w, g in zip(weights, scaled)]
        if t % 50 == 0:
            _logger.info('subgradient iteration %d: best %.12g', t, best_value)
    lower = -np.inf
    for _ in range(polish):
        z, lower = _kelley_step(cuts, sizes)
        if best_value - lower <= gap_tol*max(1.0, abs(best_value)):
            break
        record(_split(z, sizes))
    _logger.info('cutting plane model gap %.3g', best_value - lower)
    bary = FiberedMeasure(pb.base, pb.space,
                          [make_discrete_measure(g, w, space=pb.space)
                           for g, w in zip(grids, best)],
                          chart_id=pb.measures[0].chart_id)
    value = objective(pb, bary, threads=threads)
    cert = assemble_barycenter_certificate(pb, bary, grid=support_grid, cap=cap)
    bound = max(dual_objective(pb, cert), lower)
    gap = max(value - bound, 0.0)
    if gap > gap_tol*max(1.0, abs(value)):
        _logger.warning('barycenter gap %.3g above tolerance', gap)
        raise NotConverged(f'gap {gap!r} after {len(cuts)} evaluations',
                           best=bary, value=value, gap=gap)
    return bary, value, gap


def evaluation_support(problem, i, grid=None):
    """union of the input fiber supports over atom i and the grid"""
    pts = [mu.points for mu in problem.fiber_inputs(i)]
    if grid is not None:
        pts.append(grid)
    axis = 0 if pts[0].ndim > 1 else None
    return np.unique(np.concatenate(pts), axis=axis)


def project_certificate(zeta, xi):
    """Shift the xi_k so that sum_k zeta_k xi_k vanishes on every support point.

    Inputs with zeta_k = 0 at an atom get xi_k = 0 there."""
    zeta = np.asarray(zeta, dtype=float)
    out = []
    for i, table in enumerate(xi):
        table = np.array(table, dtype=float)
        active = zeta[:, i] > 0
        if active.any():
            mean = (zeta[active, i] @ table[active])/active.sum()
            table[active] -= mean[None, :]/zeta[active, i][:, None]
        table[~active] = 0.0
        out.append(table)
    return tuple(out)


def assemble_barycenter_certificate(problem, n, grid=None, cap=LP_SIZE_CAP):
    """certificate from the optimal potentials between the inputs and candidate n"""
    pb = problem
    if pb.kappa != pb.p or np.isinf(pb.q):
        raise UnsupportedProblem('certificates need kappa = p and q < inf')
    grids = _fiber_grids(pb, grid) if grid is not None else (None,)*len(pb.base)
    f = np.zeros((pb.K, len(pb.base)))
    supports, psis = [], []
    for i, nu in enumerate(n.fibers):
        support = evaluation_support(pb, i, grids[i])
        tables = []
        for k, (lam, mu) in enumerate(zip(pb.lambdas, pb.fiber_inputs(i))):
            f[k, i], duals = _transport(mu.points, mu.weights, nu.points, nu.weights,
                                        pb.space, pb.p, cap)
            tables.append(c_transform(lam*duals.phi, mu.points, support, pb.space, pb.p,
                                      lam=lam))
        supports.append(support)
        psis.append(np.array(tables))
    zeta = np.array([optimal_zeta(fk, pb.sigma, pb.r) for fk in f])
    return BarycenterDualCertificate(zeta, tuple(supports), project_certificate(zeta, psis))


def lift_classical_certificate(problem, phis, support=None):
    """zeta_k = 1 and xi_k = phi_k on every fiber"""
    pb = problem
    supports, xis = [], []
    for i in range(len(pb.base)):
        s = pb.space.points_array(support) if support is not None else evaluation_support(pb, i)
        supports.append(s)
        xis.append(np.array([_table(phi, s) for phi in phis]))
    return BarycenterDualCertificate(np.ones((pb.K, len(pb.base))), tuple(supports), tuple(xis))


def _table(phi, support):
    if callable(phi):
        return np.asarray(phi(support), dtype=float)
    table = np.asarray(phi, dtype=float)
    if table.shape != (len(support),):
        raise ValidationError(f'potential table of shape {table.shape} on {len(support)} points')
    return table


def dual_objective(problem, cert, atol=TOLERANCES['constraint'],
                   norm_tol=TOLERANCES['zeta_norm']):
    """barycenter dual value, a lower bound on the objective of candidates supported
    on the certificate's evaluation points"""
    pb = problem
    if pb.kappa != pb.p or pb.q < pb.p:
        raise UnsupportedProblem('barycenter duality needs kappa = p <= q')
    zeta = np.asarray(cert.zeta, dtype=float)
    if zeta.shape != (pb.K, len(pb.base)) or len(cert.xi) != len(pb.base):
        raise ValidationError('certificate does not match the problem dimensions')
    if np.any(zeta < 0):
        raise ConstraintViolation('zeta must be nonnegative')
    for k, zk in enumerate(zeta):
        norm = zeta_norm(zk, pb.sigma, pb.q, pb.p)
        if norm > 1 + norm_tol:
            raise ConstraintViolation(f'zeta_{k} has dual norm {norm!r} > 1')
    total = 0.0
    for i, (label, s, support, xi) in enumerate(zip(pb.base.atoms, pb.sigma, cert.support,
                                                    cert.xi)):
        xi = np.asarray(xi, dtype=float)
        residual = zeta[:, i] @ xi
        worst = int(np.argmax(np.abs(residual)))
        if abs(residual[worst]) > atol:
            point = np.asarray(support[worst]).tolist()
            raise ConstraintViolation(f'sum of zeta_k xi_k is {residual[worst]!r} at {point} '
                                      f'over {label!r}', label=label, point=point,
                                      residual=float(residual[worst]))
        for k, (lam, mu) in enumerate(zip(pb.lambdas, pb.fiber_inputs(i))):
            if zeta[k, i] == 0:
                continue
            transform = c_transform(xi[k], support, mu.points, pb.space, pb.p, lam=lam)
            total -= s*zeta[k, i]*np.dot(mu.weights, transform)
    return float(total)


def classical_dual(mus, lambdas, p, phis, space=None, support=None,
                   atol=TOLERANCES['constraint']):
    """-sum_k int phi_k^{lambda_k d^p} dmu_k for potentials summing to zero"""
    space = real_line() if space is None else space
    if support is None:
        pts = [mu.points for mu in mus]
        support = np.unique(np.concatenate(pts), axis=0 if pts[0].ndim > 1 else None)
    support = space.points_array(support)
    tables = np.array([_table(phi, support) for phi in phis])
    residual = tables.sum(axis=0)
    worst = int(np.argmax(np.abs(residual)))
    if abs(residual[worst]) > atol:
        point = np.asarray(support[worst]).tolist()
        raise ConstraintViolation(f'sum of potentials is {residual[worst]!r} at {point}',
                                  point=point, residual=float(residual[worst]))
    return float(-sum(np.dot(mu.weights, c_transform(t, support, mu.points, space, p, lam=lam))
                      for mu, lam, t in zip(mus, lambdas, tables)))


def tent_potential(t):
    """1-Lipschitz potential: -4-t on [-4,-2), t on [-2,2), 4-t on [2,4], else 0"""
    t = np.asarray(t, dtype=float)
    return np.select([(t >= -4) & (t < -2), (t >= -2) & (t < 2), (t >= 2) & (t <= 4)],
                     [-4 - t, t, 4 - t], default=0.0)


@dataclass(frozen=True, eq=False)
class NonuniqueInstance:
    """inputs alternating between two intervals, two candidate barycenters"""
    problem: BarycenterProblem
    nu0: object
    nu1: object
    candidates: tuple
    phis: tuple


def nonunique_instance(n=200, K=4, atoms=2):
    """p = 1 problem where both intervals [-2,-1] and [1,2] are barycenters

    Inputs with odd position (1-based) sit on [1,2], even ones on [-2,-1]."""
    if K < 2 or K % 2:
        raise ValidationError(f'K must be even and >= 2, got {K}')
    nu0 = interval_measure(-2, -1, n)
    nu1 = interval_measure(1, 2, n)
    base = uniform_base(atoms)
    space = real_line()
    lifted0 = constant_fibers(base, space, nu0)
    lifted1 = constant_fibers(base, space, nu1)
    even = [(k+1) % 2 == 0 for k in range(K)]
    measures = [lifted0 if e else lifted1 for e in even]
    problem = BarycenterProblem(measures, np.full(K, 1/K), p=1, q=1, kappa=1)
    phis = tuple((lambda t: -tent_potential(t)/K) if e else (lambda t: tent_potential(t)/K)
                 for e in even)
    return NonuniqueInstance(problem, nu0, nu1, (lifted0, lifted1), phis)


def demo_nonunique(n=200, K=4):
    """objectives, dual values and interval distance of the nonuniqueness example"""
    inst = nonunique_instance(n, K)
    pb = inst.problem
    mus = [m.fibers[0] for m in pb.measures]
    return {'n': n, 'K': K,
            'objective_nu0': objective(pb, inst.candidates[0]),
            'objective_nu1': objective(pb, inst.candidates[1]),
            'classical_dual': classical_dual(mus, pb.lambdas, pb.p, inst.phis),
            'lifted_dual': dual_objective(pb, lift_classical_certificate(pb, inst.phis)),
            'mk1_nu0_nu1': fiber_mk(inst.nu0, inst.nu1, pb.space, 1)}
