"""exceptions with CLI exit codes"""

EXIT_VALIDATION = 2
EXIT_SIZE_CAP = 3
EXIT_NOT_CONVERGED = 4


class FiberOTError(Exception):
    """base class for fiberot errors"""
    exit_code = 1


class ValidationError(FiberOTError, ValueError):
    """invalid input data"""
    exit_code = EXIT_VALIDATION


class SchemaError(ValidationError):
    """document does not match the input schema"""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f'line {line}')
        if path:
            where.append(str(path))
        prefix = ', '.join(where)
        super().__init__(f'{prefix}: {message}' if prefix else message)


class EmptySupport(ValidationError):
    """no point carries positive mass"""


class DimensionMismatch(ValidationError):
    """points do not live in the expected fiber space"""


class InvalidFiberSpace(ValidationError):
    """distance matrix or basepoint is not valid"""


class MarginalMismatch(ValidationError):
    """base marginal of a disintegration differs from sigma"""

    def __init__(self, message, label=None, expected=None, found=None):
        self.label = label
        self.expected = expected
        self.found = found
        super().__init__(message)


class UnknownBaseLabel(ValidationError):
    """record refers to a base atom that does not exist"""

    def __init__(self, label):
        self.label = label
        super().__init__(f'unknown base label {label!r}')


class MissingChartEntry(ValidationError):
    """atlas has no isometry for a base atom"""

    def __init__(self, label):
        self.label = label
        super().__init__(f'no chart entry for base atom {label!r}')


class InvalidIsometry(ValidationError):
    """chart map does not preserve fiber distances"""


class BaseMismatch(ValidationError):
    """fibered measures live over different bases or fiber spaces"""


class InadmissibleCertificate(ValidationError):
    """dual potentials violate -phi(u)-psi(v) <= d(u,v)^p"""

    def __init__(self, message, label=None, pair=None, excess=None):
        self.label = label
        self.pair = pair
        self.excess = excess
        super().__init__(message)


class ConstraintViolation(ValidationError):
    """dual variables do not satisfy their linear constraint"""

    def __init__(self, message, label=None, point=None, residual=None):
        self.label = label
        self.point = point
        self.residual = residual
        super().__init__(message)


class NonGeodesicFiberSpace(ValidationError):
    """fiber space has no interpolation of points"""


class UnsupportedFiberKind(ValidationError):
    """operation not available for this kind of fiber space"""


class UnsupportedProblem(ValidationError):
    """parameter combination outside the scope of a solver"""


class SizeCapExceeded(FiberOTError):
    """linear program larger than the configured cap"""
    exit_code = EXIT_SIZE_CAP

    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f'linear program with {size} entries exceeds cap {cap}')


class NotConverged(FiberOTError):
    """iterative solver stopped before reaching the requested gap"""
    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, message, best=None, value=None, gap=None):
        self.best = best
        self.value = value
        self.gap = gap
        super().__init__(message)
