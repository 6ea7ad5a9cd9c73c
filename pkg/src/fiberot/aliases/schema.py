"""document field names"""

BASE = 'base'
ATOMS = 'atoms'
WEIGHTS = 'weights'
POINTS = 'points'
FIBER_SPACE = 'fiber_space'
KIND = 'kind'
DIM = 'dim'
DISTANCES = 'distances'
Y0 = 'y0'
FIBERS = 'fibers'
CHART_ID = 'chart_id'
ATLAS = 'atlas'

REAL1D = 'real1d'
EUCLIDEAN = 'euclidean'
MATRIX = 'matrix'

ORTHOGONAL = 'orthogonal'
REFLECTION = 'reflection'
PERMUTATION = 'permutation'

INF = 'inf'
