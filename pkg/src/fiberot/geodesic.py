"""fiberwise displacement interpolation"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from fiberot import LP_SIZE_CAP
from fiberot.aliases.schema import REAL1D
from fiberot.errors import NonGeodesicFiberSpace, ValidationError
from fiberot.measure import check_same_base, make_discrete_measure, mix
from fiberot.metric import scrmk, reference_distance
from fiberot.ot import ot_1d, ot_lp

_logger = logging.getLogger(__name__)


def _check_tau(tau):
    if not 0 <= tau <= 1:
        raise ValidationError(f'tau must lie in [0, 1], got {tau}')


class GeodesicPath:
    """minimal geodesic between two fibered measures for the (p, q) metric

    For p > 1 mass moves along straight lines of per fiber optimal plans, for p = 1
    the path is the fiberwise linear mixture."""

    def __init__(self, m0, m1, p, cap=LP_SIZE_CAP):
        check_same_base(m0, m1)
        if p < 1:
            raise ValidationError(f'p must be >= 1, got {p}')
        self.m0 = m0
        self.m1 = m1
        self.p = p
        self.plans = None
        if p > 1:
            if not m0.space.is_geodesic:
                raise NonGeodesicFiberSpace('p > 1 geodesics need real line or euclidean fibers')
            self.plans = tuple(self._plan(mu, nu, cap) for mu, nu in zip(m0.fibers, m1.fibers))

    def _plan(self, mu, nu, cap):
        if self.m0.space.kind == REAL1D:
            return ot_1d(mu, nu, self.p)[1]
        return ot_lp(mu, nu, self.m0.space, self.p, cap=cap)[1]

    def __call__(self, tau):
        _check_tau(tau)
        if tau == 0:
            return self.m0
        if tau == 1:
            return self.m1
        if self.plans is None:
            return mix([self.m0, self.m1], [1-tau, tau])
        space = self.m0.space
        fibers = []
        for plan in self.plans:
            e = plan.entries
            points = space.interpolate(plan.row_points[e.row], plan.col_points[e.col], tau)
            fibers.append(make_discrete_measure(points, e.data))
        return self.m0.replace_fibers(fibers)


def geodesic(m0, m1, p, cap=LP_SIZE_CAP):
    return GeodesicPath(m0, m1, p, cap=cap)


def geodesic_point(m0, m1, tau, p):
    """interpolant at time tau"""
    _check_tau(tau)
    return GeodesicPath(m0, m1, p)(tau)


@dataclass(frozen=True)
class GeodesicReport:
    max_deviation: float
    worst_pair: tuple
    distance: float


def verify_geodesic(m0, m1, taus, p, q, threads=None):
    """largest |d(m_s, m_t) - |s - t| d(m0, m1)| over pairs of taus"""
    path = geodesic(m0, m1, p)
    total = scrmk(m0, m1, p, q, threads=threads).value
    points = {tau: path(tau) for tau in taus}
    worst, worst_pair = 0.0, (None, None)
    for s, t in itertools.combinations(sorted(points), 2):
        d = scrmk(points[s], points[t], p, q, threads=threads).value
        dev = abs(d - abs(t - s)*total)
        if dev > worst:
            worst, worst_pair = dev, (s, t)
    _logger.info('geodesic deviation %.3g at %s', worst, worst_pair)
    return GeodesicReport(worst, worst_pair, total)


def ball_convexity_gap(m0, m1, taus, p, q):
    """largest excess of d(m_t, ref) over max(d(m0, ref), d(m1, ref))

    ref is the basepoint reference measure; nonpositive values mean the
    evaluated interpolants stay in the ball."""
    path = geodesic(m0, m1, p)
    bound = max(reference_distance(m0, p, q), reference_distance(m1, p, q))
    return max(reference_distance(path(t), p, q) - bound for t in taus)
