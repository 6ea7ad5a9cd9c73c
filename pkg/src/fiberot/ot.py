"""exact optimal transport between discrete measures on one fiber"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from fiberot import LP_SIZE_CAP, TOLERANCES
from fiberot.aliases.schema import REAL1D
from fiberot.errors import FiberOTError, SizeCapExceeded, ValidationError

_logger = logging.getLogger(__name__)

HIGHS_OPTIONS = {'primal_feasibility_tolerance': 1e-10,
                 'dual_feasibility_tolerance': 1e-10}


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """coupling of two discrete measures as a sparse mass matrix"""
    row_points: np.ndarray
    col_points: np.ndarray
    entries: sparse.coo_matrix
    cost: float
    row_atoms: np.ndarray | None = None
    col_atoms: np.ndarray | None = None

    def row_sums(self):
        return np.asarray(self.entries.sum(axis=1)).ravel()

    def col_sums(self):
        return np.asarray(self.entries.sum(axis=0)).ravel()

    def triples(self):
        """(row index, column index, mass) of the positive entries"""
        e = self.entries
        return list(zip(e.row.tolist(), e.col.tolist(), e.data.tolist()))

    def check(self, row_weights, col_weights, cost_matrix, atol=TOLERANCES['plan']):
        """Verify marginals and cost against the given data."""
        if np.any(self.entries.data < 0):
            raise ValidationError('negative plan mass')
        if not np.allclose(self.row_sums(), row_weights, rtol=0, atol=atol):
            raise ValidationError('plan rows do not sum to the source weights')
        if not np.allclose(self.col_sums(), col_weights, rtol=0, atol=atol):
            raise ValidationError('plan columns do not sum to the target weights')
        e = self.entries
        if abs(np.dot(e.data, cost_matrix[e.row, e.col]) - self.cost) > atol:
            raise ValidationError('plan cost does not match its entries')


@dataclass(frozen=True, eq=False)
class FiberDualPair:
    """Kantorovich potentials: -phi(t) - psi(s) <= d(t, s)^p"""
    phi: np.ndarray
    psi: np.ndarray

    def violation(self, cost_matrix):
        """largest excess of -phi(t) - psi(s) over d(t, s)^p"""
        excess = -self.phi[:, None] - self.psi[None, :] - cost_matrix
        return float(excess.max(initial=-np.inf))


def _plan(x, y, rows, cols, masses, cost, shape):
    entries = sparse.coo_matrix((masses, (rows, cols)), shape=shape)
    entries.sum_duplicates()
    return TransportPlan(x, y, entries, float(cost))


def _monotone_coupling(x, a, y, b):
    """north-west corner sweep over sorted supports

    returns sorted position arrays (ix, iy) and the staircase of cells with masses"""
    ix = np.argsort(x, kind='stable')
    iy = np.argsort(y, kind='stable')
    cu = np.minimum(np.cumsum(a[ix]), 1.0)
    cv = np.minimum(np.cumsum(b[iy]), 1.0)
    cu[-1] = cv[-1] = 1.0
    levels = np.unique(np.concatenate([cu, cv]))
    lower = np.concatenate([[0.0], levels[:-1]])
    masses = levels - lower
    keep = masses > 0
    lower, masses = lower[keep], masses[keep]
    ri = np.minimum(np.searchsorted(cu, lower, side='right'), x.size-1)
    cj = np.minimum(np.searchsorted(cv, lower, side='right'), y.size-1)
    return ix, iy, ri, cj, masses


def _staircase_potentials(xs, ys, ri, cj, p):
    """complementary slackness potentials along the monotone staircase

    A step moving both row and column passes through the zero mass cell
    (new row, old column), which keeps the basis a spanning tree."""
    phi = np.full(xs.size, np.nan)
    psi = np.full(ys.size, np.nan)

    def c(i, j):
        return abs(xs[i] - ys[j])**p

    i, j = ri[0], cj[0]
    psi[j] = 0.0
    phi[i] = -c(i, j)
    for inext, jnext in zip(ri[1:], cj[1:]):
        if inext != i:
            phi[inext] = -c(inext, j) - psi[j]
        if jnext != j:
            psi[jnext] = -c(inext, jnext) - phi[inext]
        i, j = inext, jnext
    return phi, psi


def _tighten(cost, phi, psi):
    """Make potentials admissible by c-transforms, anchoring psi[0] = 0."""
    finite = np.isfinite(phi)
    psi = np.max(np.where(finite[:, None], -cost - np.where(finite, phi, 0)[:, None], -np.inf),
                 axis=0)
    psi = psi - psi[0]
    phi = np.max(-cost - psi[None, :], axis=1)
    return phi, psi


def transport_1d(x, a, y, b, p, duals=False):
    """monotone optimal transport on the real line for raw arrays

    Zero weights are allowed. Returns cost, plan and optionally potentials."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ix, iy, ri, cj, masses = _monotone_coupling(x, a, y, b)
    rows, cols = ix[ri], iy[cj]
    cost = np.dot(masses, np.abs(x[rows] - y[cols])**p)
    plan = _plan(x, y, rows, cols, masses, cost, (x.size, y.size))
    if not duals:
        return cost, plan, None
    phi_s, psi_s = _staircase_potentials(x[ix], y[iy], ri, cj, p)
    phi = np.empty_like(phi_s)
    psi = np.empty_like(psi_s)
    phi[ix] = phi_s
    psi[iy] = psi_s
    phi, psi = _tighten(np.abs(np.subtract.outer(x, y))**p, phi, psi)
    return cost, plan, FiberDualPair(phi, psi)


def transport_lp(x, a, y, b, space, p, cap=LP_SIZE_CAP):
    """exact optimal transport by the HiGHS dual simplex for raw arrays

    Zero weights are allowed. Returns cost, plan and admissible optimal potentials."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.size, b.size
    if m*n > cap:
        raise SizeCapExceeded(m*n, cap)
    cost_matrix = space.cost_matrix(x, y, p)
    a_eq = sparse.vstack([sparse.kron(sparse.eye(m), np.ones((1, n))),
                          sparse.kron(np.ones((1, m)), sparse.eye(n))]).tocsr()
    res = linprog(cost_matrix.ravel(), A_eq=a_eq, b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method='highs-ds', options=HIGHS_OPTIONS)
    _logger.debug('%dx%d transport LP: %s', m, n, res.message)
    if res.status != 0:
        raise FiberOTError(f'transport LP failed: {res.message}')
    gamma = res.x.reshape(m, n).clip(min=0)
    rows, cols = np.nonzero(gamma)
    masses = gamma[rows, cols]
    cost = np.dot(masses, cost_matrix[rows, cols])
    plan = _plan(np.asarray(x), np.asarray(y), rows, cols, masses, cost, (m, n))
    marginals = res.eqlin.marginals
    phi, psi = _tighten(cost_matrix, -marginals[:m], -marginals[m:])
    return cost, plan, FiberDualPair(phi, psi)


def ot_1d(mu, nu, p):
    """mk_p(mu, nu)^p and the monotone plan on the real line"""
    cost, plan, _ = transport_1d(mu.points, mu.weights, nu.points, nu.weights, p)
    return cost, plan


def potentials_1d(mu, nu, p):
    """optimal potentials on the real line from the monotone plan's basis"""
    _, _, duals = transport_1d(mu.points, mu.weights, nu.points, nu.weights, p, duals=True)
    return duals


def ot_lp(mu, nu, space, p, cap=LP_SIZE_CAP):
    """exact plan and potentials by linear programming"""
    return transport_lp(mu.points, mu.weights, nu.points, nu.weights, space, p, cap=cap)


def fiber_coupling(mu, nu, space, p, cap=LP_SIZE_CAP):
    """optimal cost, plan and potentials with the solver fitting the fiber space"""
    if space.kind == REAL1D:
        return transport_1d(mu.points, mu.weights, nu.points, nu.weights, p, duals=True)
    return ot_lp(mu, nu, space, p, cap=cap)


def fiber_potentials(mu, nu, space, p, cap=LP_SIZE_CAP):
    """optimal cost and admissible optimal potentials"""
    cost, _, duals = fiber_coupling(mu, nu, space, p, cap=cap)
    return cost, duals


def pair_dual_value(mu, nu, duals):
    """Kantorovich dual objective -int phi dmu - int psi dnu"""
    return -np.dot(mu.weights, duals.phi) - np.dot(nu.weights, duals.psi)


def c_transform(phi, mu_support, nu_support, space, p, lam=1.0):
    """s -> max_t (-lam*d(t, s)^p - phi(t)) for t in mu_support, s in nu_support"""
    if not 0 < lam <= 1:
        raise ValidationError(f'transform scale must lie in (0, 1], got {lam}')
    phi = np.asarray(phi, dtype=float)
    cost = space.cost_matrix(mu_support, nu_support, p)
    return np.max(-lam*cost - phi[:, None], axis=0)


def _ordered(mu, nu):
    """pair in a canonical order so that solves are symmetric bit for bit"""
    kmu = (mu.points.shape, mu.points.tobytes(), mu.weights.tobytes())
    knu = (nu.points.shape, nu.points.tobytes(), nu.weights.tobytes())
    return (nu, mu) if knu < kmu else (mu, nu)


def fiber_cost(mu, nu, space, p, cap=LP_SIZE_CAP):
    """mk_p(mu, nu)^p"""
    mu, nu = _ordered(mu, nu)
    if space.kind == REAL1D:
        return ot_1d(mu, nu, p)[0]
    return ot_lp(mu, nu, space, p, cap=cap)[0]


def fiber_mk(mu, nu, space, p, cap=LP_SIZE_CAP):
    """p-Monge-Kantorovich distance on one fiber"""
    return fiber_cost(mu, nu, space, p, cap=cap)**(1/p)
