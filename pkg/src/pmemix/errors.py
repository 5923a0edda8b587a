"""Exception types shared across the package."""


class PmemixError(Exception):
    pass


class ConfigurationError(PmemixError, ValueError):
    pass


class InputError(PmemixError, ValueError):
    pass


class StateError(PmemixError, RuntimeError):
    pass


class LabelValidationError(PmemixError, ValueError):
    pass


class GenerationError(PmemixError, RuntimeError):
    pass


class PartitionError(PmemixError, RuntimeError):
    pass


class ParseError(PmemixError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
