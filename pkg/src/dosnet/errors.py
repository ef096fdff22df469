"""Exception types raised across the package."""


class DosNetError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DosNetError, ValueError):
    pass


class NotHurwitz(DosNetError, ValueError):
    pass


class NotSymmetric(DosNetError, ValueError):
    pass


class AlphaNonPositive(DosNetError, ValueError):
    def __init__(self, index: int, delta: float, alpha: float):
        super().__init__(
            f"alpha_{index} = {alpha:.6g} <= 0 at delta = {delta:.6g}; delta too large"
        )
        self.index = index
        self.delta = delta
        self.alpha = alpha


class NoFeasibleDelta(DosNetError, ValueError):
    pass


class SmallGainViolated(DosNetError, ValueError):
    def __init__(self, radius: float):
        super().__init__(f"small-gain condition violated: r(A^-1 B) = {radius:.6g} >= 1")
        self.radius = radius


class SigmaTooLarge(DosNetError, ValueError):
    def __init__(self, index: int, sigma: float, bound: float):
        super().__init__(
            f"sigma_{index} = {sigma:.6g} is not below its bound {bound:.6g}"
        )
        self.index = index
        self.sigma = sigma
        self.bound = bound


class NonPositiveC(DosNetError, ValueError):
    pass


class NotCertified(DosNetError, ValueError):
    pass


class OutOfHorizon(DosNetError, ValueError):
    pass


class BadRange(DosNetError, ValueError):
    pass


class InfeasibleSpec(DosNetError, ValueError):
    pass


class ConfigInvalid(DosNetError, ValueError):
    pass


class ParseError(DosNetError, ValueError):
    """Config could not be parsed; ``field`` names the offending location."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


class NumericalBlowup(DosNetError, RuntimeError):
    """Simulation aborted; ``trace`` holds everything recorded up to the abort."""

    def __init__(self, time: float, norm: float, trace=None):
        super().__init__(f"state norm {norm:.3g} exceeded blowup threshold at t = {time:.6g}")
        self.time = time
        self.norm = norm
        self.trace = trace
