"""optimal transport tools for fibered discrete measures"""
try:
    from fiberot._version import __version__
except ImportError: # not built with hatch-vcs
    __version__ = '0+unknown'

# CONFIG
TOLERANCES = {'weights': 1e-12,       # probability weights sum to one
              'marginal': 1e-9,       # base marginal of a disintegration vs sigma
              'plan': 1e-10,          # transport plan marginals and cost
              'admissibility': 1e-9,  # -phi(t)-psi(s) <= d(t,s)^p
              'constraint': 1e-10,    # sum_k zeta_k xi_k == 0
              'zeta_norm': 1e-12,     # |zeta|_{L^r'} <= 1
              'isometry': 1e-12}      # chart maps preserve distances

LP_SIZE_CAP = 10**6 # transport plan entries per linear program

STEP_SCHEDULE = (1.0, 10.0) # subgradient step a/(b+t)
