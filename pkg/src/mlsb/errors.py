"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MLSBError(Exception):
    exit_code = 1


class DataIOError(MLSBError):
    exit_code = 1


class FingerprintMismatch(DataIOError):
    pass


class StoreLocked(DataIOError):
    pass


class TableError(MLSBError):
    exit_code = 2


class ConvexityError(TableError):
    pass


class EclipseViolation(TableError):
    def __init__(self, i, j, k, depth):
        self.i, self.j, self.k, self.depth = i, j, k, depth
        super().__init__(
            f"eclipse violation: obstacle {k} meets hull of ({i}, {j}), "
            f"penetration depth {depth:.6g}")


class SolverError(MLSBError):
    exit_code = 3


class NoConvergence(SolverError):
    def __init__(self, msg, trace=()):
        self.trace = list(trace)
        super().__init__(msg)


class ItineraryMismatch(SolverError):
    pass


class NoIntersection(SolverError):
    pass


class Occlusion(SolverError):
    def __init__(self, occluder, msg=None):
        self.occluder = occluder
        super().__init__(msg or f"ray occluded by obstacle {occluder}")


class GrazingDegenerate(SolverError):
    pass


class NonHyperbolic(SolverError):
    pass


class WordError(MLSBError):
    exit_code = 4


class SymbolOutOfRange(WordError):
    pass


class InadmissibleWord(WordError):
    pass


class InadmissibleTau(WordError):
    pass


class InsufficientData(MLSBError):
    exit_code = 5


class NonGeometric(InsufficientData):
    pass


class NoPositiveRoot(InsufficientData):
    pass


class InconsistentSystem(InsufficientData):
    pass


class InsufficientPrecision(MLSBError):
    exit_code = 6


class PrecisionUnavailable(InsufficientPrecision):
    pass
