"""Exception hierarchy shared across the pipeline."""


class BrennanError(Exception):
    """Base class for all package errors."""


class PoleAtOrigin(BrennanError):
    pass


class NotDiskPreserving(BrennanError):
    pass


class TooManyRequested(BrennanError, ValueError):
    pass


class DegeneratePolygon(BrennanError):
    pass


class NonSimple(BrennanError):
    pass


class NoConvergence(BrennanError):
    """An iterative solver hit its cap; ``diagnostics`` carries the best iterate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CrowdingOverflow(BrennanError):
    pass


class OutsideDomain(BrennanError, ValueError):
    pass


class TooFewValidSamples(BrennanError):
    pass


class PoleEncountered(BrennanError):
    pass


class InsufficientData(BrennanError, ValueError):
    pass


class NonPositiveSum(BrennanError, ValueError):
    pass


class BadBracket(BrennanError, ValueError):
    pass


class MissingArtifact(BrennanError, FileNotFoundError):
    pass


class StageFailed(BrennanError):
    pass


class ConfigError(BrennanError, ValueError):
    pass
