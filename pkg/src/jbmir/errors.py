"""Exception types. The CLI maps each family onto an exit code."""


class JbmirError(Exception):
    exit_code = 1


class ConfigError(JbmirError):
    exit_code = 2


class DataError(JbmirError):
    exit_code = 3


class NumericalError(JbmirError):
    exit_code = 4


class DotSolveError(NumericalError):
    """A diffusion solve failed; ``source`` names the offending source (or detector)."""

    def __init__(self, message, source=None):
        super().__init__(message)
        self.source = source
