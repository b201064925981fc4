# src/swing_ident/errors.py

"""
Exception hierarchy. Validation problems map to CLI exit code 2,
numerical failures to exit code 3.
"""


class SwingIdentError(Exception):
    """Base class for every error raised by the toolkit."""


# --- Validation family (exit code 2) ---

class ValidationError(SwingIdentError):
    exit_code = 2


class InvalidParamsError(ValidationError):
    pass


class InvalidNoiseError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class TrajectoryFormatError(ValidationError):
    pass


class SingularLibraryError(ValidationError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"Candidate library is rank deficient; offending columns: {', '.join(self.columns)}")


class UnidentifiableInertiaError(ValidationError):
    pass


class NoEquilibriumError(ValidationError):
    pass


class UndefinedPercentError(ValidationError):
    pass


class SpecValidationError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# --- Numerical family (exit code 3) ---

class NumericalError(SwingIdentError):
    exit_code = 3


class IntegrationDivergedError(NumericalError):
    def __init__(self, time_s):
        self.time_s = time_s
        super().__init__(f"Integration diverged: non-finite state at t = {time_s:.6f} s")


class GradientOverflowError(NumericalError):
    pass


class TrainingDivergedError(NumericalError):
    def __init__(self, index, what="epoch"):
        self.index = index
        super().__init__(f"Training diverged: non-finite loss at {what} {index}")
