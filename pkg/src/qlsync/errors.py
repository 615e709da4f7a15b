"""Exception and warning types shared across the package."""


class QLSyncError(Exception):
    """Base class for all package errors."""


class ParameterError(QLSyncError, ValueError):
    """An argument or configuration value is outside its allowed domain."""


class ConfigError(ParameterError):
    """A scenario configuration field is invalid.

    ``field`` names the offending dotted config path.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ContractError(QLSyncError):
    """An input violates a structural precondition (shape, Hermiticity, labels)."""


class NumericError(QLSyncError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class NumericDivergenceError(NumericError):
    def __init__(self, step: int, realization: int | None = None, message: str = ""):
        self.step = step
        self.realization = realization
        where = f"step {step}"
        if realization is not None:
            where = f"realization {realization}, {where}"
        super().__init__(f"non-finite state at {where}" + (f": {message}" if message else ""))


class DegenerateStateWarning(UserWarning):
    """The top eigenvalue is (nearly) degenerate; the returned eigenvector is not unique."""


class ConfigWarning(UserWarning):
    pass
