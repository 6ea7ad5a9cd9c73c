"""disintegrated (p,q) Monge-Kantorovich metric, its duality and coupling form"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from fiberot import LP_SIZE_CAP, TOLERANCES
from fiberot.errors import (FiberOTError, InadmissibleCertificate, SizeCapExceeded,
                            UnsupportedProblem, ValidationError)
from fiberot.math import lq_norm, holder_conjugate
from fiberot.measure import check_same_base, moment_p
from fiberot.ot import (HIGHS_OPTIONS, TransportPlan, fiber_cost, fiber_potentials,
                        pair_dual_value)
from fiberot.tools import fibermap

_logger = logging.getLogger(__name__)


def _check_exponents(p, q):
    if not 1 <= p < np.inf:
        raise ValidationError(f'p must satisfy 1 <= p < inf, got {p}')
    if not q >= 1:
        raise ValidationError(f'q must be >= 1, got {q}')


@dataclass(frozen=True, eq=False)
class DisintDistanceReport:
    """per fiber distances and their L^q(sigma) norm"""
    per_fiber: np.ndarray
    value: float
    p: float
    q: float
    sigma: np.ndarray
    labels: tuple

    def recompute(self):
        return lq_norm(self.per_fiber, self.sigma, self.q)


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """(zeta, Phi, Psi) for the dual of the disintegrated metric

    phi[i] and psi[i] are tables on the supports of the i-th fibers of the two
    measures, zeta is indexed by base atom."""
    zeta: np.ndarray
    phi: tuple
    psi: tuple
    q: float
    heuristic: bool = False


def scrmk(m, n, p, q, threads=None, cap=LP_SIZE_CAP):
    """disintegrated (p,q) Monge-Kantorovich distance between m and n"""
    _check_exponents(p, q)
    check_same_base(m, n)
    space = m.space
    costs = fibermap(lambda mu, nu: fiber_cost(mu, nu, space, p, cap=cap),
                     m.fibers, n.fibers, threads=threads)
    per_fiber = np.asarray(costs, dtype=float)**(1/p)
    value = lq_norm(per_fiber, m.sigma, q)
    return DisintDistanceReport(per_fiber, value, p, q, m.sigma, m.base.atoms)


def reference_distance(m, p, q):
    """distance from the basepoint reference measure, finite for finite supports"""
    _check_exponents(p, q)
    return lq_norm(moment_p(m, p)**(1/p), m.sigma, q)


def cp_cost(m, n, p, cap=LP_SIZE_CAP):
    """optimal cost over couplings of m and n that never leave a fiber"""
    _check_exponents(p, p)
    check_same_base(m, n)
    space = m.space
    blocks, costs, rhs_rows, rhs_cols = [], [], [], []
    for s, mu, nu in zip(m.sigma, m.fibers, n.fibers):
        k, l = len(mu), len(nu)
        blocks.append((k, l))
        costs.append(space.cost_matrix(mu.points, nu.points, p).ravel())
        rhs_rows.append(s*mu.weights)
        rhs_cols.append(s*nu.weights)
    size = sum(k*l for k, l in blocks)
    if size > cap:
        raise SizeCapExceeded(size, cap)
    row_blocks = [sparse.kron(sparse.eye(k), np.ones((1, l))) for k, l in blocks]
    col_blocks = [sparse.kron(np.ones((1, k)), sparse.eye(l)) for k, l in blocks]
    a_eq = sparse.vstack([sparse.block_diag(row_blocks), sparse.block_diag(col_blocks)]).tocsr()
    b_eq = np.concatenate(rhs_rows + rhs_cols)
    c = np.concatenate(costs)
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method='highs-ds',
                  options=HIGHS_OPTIONS)
    _logger.debug('fiber constrained coupling LP with %d entries: %s', size, res.message)
    if res.status != 0:
        raise FiberOTError(f'coupling LP failed: {res.message}')
    x = res.x.clip(min=0)
    rows, cols, masses = [], [], []
    offset = row0 = col0 = 0
    for k, l in blocks:
        block = x[offset:offset+k*l].reshape(k, l)
        r, cl = np.nonzero(block)
        rows.append(r + row0)
        cols.append(cl + col0)
        masses.append(block[r, cl])
        offset += k*l
        row0 += k
        col0 += l
    rows, cols, masses = map(np.concatenate, (rows, cols, masses))
    value = float(np.dot(x, c))
    entries = sparse.coo_matrix((masses, (rows, cols)), shape=(row0, col0))
    plan = TransportPlan(np.concatenate([mu.points for mu in m.fibers]),
                         np.concatenate([nu.points for nu in n.fibers]),
                         entries, value,
                         row_atoms=np.repeat(np.arange(len(m)), [k for k, _ in blocks]),
                         col_atoms=np.repeat(np.arange(len(n)), [l for _, l in blocks]))
    return value, plan


def optimal_zeta(f, sigma, r):
    """maximizer of sum sigma*zeta*f over zeta >= 0 with |zeta|_{L^r'(sigma)} <= 1"""
    f = np.asarray(f, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if r == 1 or not np.any(f > 0):
        return np.ones_like(f)
    if np.isinf(r):
        zeta = np.zeros_like(f)
        k = int(np.argmax(np.where(sigma > 0, f, -np.inf)))
        zeta[k] = 1/sigma[k]
        return zeta
    return (f/lq_norm(f, sigma, r))**(r-1)


def zeta_norm(zeta, sigma, q, p):
    """|zeta|_{L^r'(sigma)} for r = q/p"""
    return lq_norm(zeta, sigma, holder_conjugate(q/p))


def validate_certificate(m, n, cert, p, atol=TOLERANCES['admissibility'],
                         norm_tol=TOLERANCES['zeta_norm']):
    """Raise unless cert is admissible for the dual of the (p, cert.q) metric."""
    check_same_base(m, n)
    if cert.q < p:
        raise UnsupportedProblem(f'duality needs p <= q, got p={p}, q={cert.q}')
    zeta = np.asarray(cert.zeta, dtype=float)
    if zeta.shape != (len(m),) or len(cert.phi) != len(m) or len(cert.psi) != len(n):
        raise ValidationError('certificate does not match the number of base atoms')
    if np.any(zeta < 0) or not np.all(np.isfinite(zeta)):
        raise InadmissibleCertificate('zeta must be finite and nonnegative')
    norm = zeta_norm(zeta, m.sigma, cert.q, p)
    if norm > 1 + norm_tol:
        raise InadmissibleCertificate(f'zeta has dual norm {norm!r} > 1')
    for label, mu, nu, phi, psi in zip(m.base.atoms, m.fibers, n.fibers, cert.phi, cert.psi):
        phi = np.asarray(phi, dtype=float)
        psi = np.asarray(psi, dtype=float)
        if phi.shape != (len(mu),) or psi.shape != (len(nu),):
            raise ValidationError(f'potential tables do not match the supports over {label!r}')
        excess = -phi[:, None] - psi[None, :] - m.space.cost_matrix(mu.points, nu.points, p)
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > atol:
            pair = (mu.points[i].tolist(), nu.points[j].tolist())
            raise InadmissibleCertificate(
                f'potentials over {label!r} violate admissibility at {pair} by {excess[i, j]!r}',
                label=label, pair=pair, excess=float(excess[i, j]))


def dual_value(m, n, cert, p, atol=TOLERANCES['admissibility']):
    """dual objective of a validated certificate, a lower bound of scrmk^p"""
    validate_certificate(m, n, cert, p, atol=atol)
    terms = [np.dot(mu.weights, phi) + np.dot(nu.weights, psi)
             for mu, nu, phi, psi in zip(m.fibers, n.fibers, cert.phi, cert.psi)]
    return float(-np.dot(m.sigma*np.asarray(cert.zeta), terms))


def assemble_certificate(m, n, p, q, threads=None, cap=LP_SIZE_CAP):
    """certificate from per fiber optimal potentials and the optimal zeta"""
    _check_exponents(p, q)
    check_same_base(m, n)
    if q < p:
        raise UnsupportedProblem(f'duality needs p <= q, got p={p}, q={q}')
    space = m.space
    solved = fibermap(lambda mu, nu: fiber_potentials(mu, nu, space, p, cap=cap),
                      m.fibers, n.fibers, threads=threads)
    duals = [d for _, d in solved]
    # dual values are the per fiber costs up to solver round off
    f = np.array([max(pair_dual_value(mu, nu, d), 0.0)
                  for mu, nu, d in zip(m.fibers, n.fibers, duals)])
    heuristic = bool(np.isinf(q))
    if heuristic:
        _logger.warning('q=inf certificate is heuristic, duality is not established for r=inf')
    zeta = optimal_zeta(f, m.sigma, q/p)
    return DualCertificate(zeta, tuple(d.phi for d in duals), tuple(d.psi for d in duals),
                           q, heuristic=heuristic)
