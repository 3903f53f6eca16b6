"""
errors.py - Exception hierarchy

Every failure the lab can raise on purpose is a SoupError. Value problems
also subclass ValueError, so plain `except ValueError` callers keep working.

    SoupError
    +-- ShapeError, ArityError, IncompatibleArchError      (bad inputs)
    +-- CheckpointError
    |     +-- CheckpointFormatError / ArchError / TruncatedError
    +-- DivergenceError                                     (training blew up)
    +-- UsageError, InsufficientDataError
    +-- DegenerateError, NotIsotropicError, DegenerateRangeError
    +-- InvalidUtopiaError, UnsupportedArityError
    +-- InvariantViolation                                  (closed forms disagree)
    +-- ConfigError                                         (YAML / validation)

The CLI maps them to exit codes with `exit_code_for`.
"""


class SoupError(Exception):
    """Base class for every deliberate failure in rsoup."""


class ShapeError(SoupError, ValueError):
    pass


class ArityError(SoupError, ValueError):
    pass


class IncompatibleArchError(SoupError, ValueError):
    pass


# -- Checkpoints: three distinct ways a file can be bad --
class CheckpointError(SoupError, ValueError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointArchError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class DivergenceError(SoupError):
    def __init__(self, message: str, update: int | None = None):
        super().__init__(message if update is None else f"{message} (update {update})")
        self.update = update


class UsageError(SoupError, ValueError):
    pass


class InsufficientDataError(SoupError, ValueError):
    pass


class DegenerateError(SoupError, ValueError):
    pass


class NotIsotropicError(SoupError, ValueError):
    pass


class DegenerateRangeError(SoupError, ValueError):
    pass


class InvalidUtopiaError(SoupError, ValueError):
    pass


class UnsupportedArityError(SoupError, ValueError):
    pass


class InvariantViolation(SoupError):
    pass


class ConfigError(SoupError, ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (InvariantViolation, DivergenceError)):
        return EXIT_VIOLATION
    if isinstance(exc, (ConfigError, UsageError, FileNotFoundError)):
        return EXIT_USAGE
    if isinstance(exc, SoupError):
        return EXIT_USAGE
    return EXIT_VIOLATION
