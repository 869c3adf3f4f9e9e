"""Exception hierarchy shared by every module."""


class VqePdftError(Exception):
    """Base class for domain errors (mapped to CLI exit code 1)."""


class ParseError(VqePdftError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedBasis(VqePdftError):
    pass


class ScfNotConverged(VqePdftError):
    def __init__(self, message: str, energy: float):
        self.energy = energy
        super().__init__(f"{message} (last energy {energy:.10f})")


class InvalidWindow(VqePdftError):
    pass


class DimensionError(VqePdftError):
    pass


class SymmetryViolation(VqePdftError):
    pass


class InvalidObservable(VqePdftError):
    pass


class InvalidSpec(VqePdftError):
    pass


class MaxIterExceeded(VqePdftError):
    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class MitigationFailure(VqePdftError):
    pass


class SizeExceeded(VqePdftError):
    pass


class MaxSweepsExceeded(VqePdftError):
    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class DegenerateOverlap(VqePdftError):
    pass


class EmptyTable(VqePdftError):
    pass
