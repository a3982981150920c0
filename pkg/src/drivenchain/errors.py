class ConfigError(ValueError):
    """Invalid user configuration (maps to CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A simulation could not be completed reliably (CLI exit code 2)."""


class StepSizeUnderflow(NumericalError):
    pass


class InvariantViolation(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass
