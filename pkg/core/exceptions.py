"""
Exception hierarchy shared by every simulation backend.

Each error carries the process exit code the ``nvsim`` command reports
and an optional field-keyed ``errors`` dict shaped like a DRF
validation error, so the API views can return it unchanged.
"""

EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


class SimulationError(Exception):
    """Base class for all simulation failures."""
    exit_code = 1
    default_message = "Simulation failed"

    def __init__(self, message=None, errors=None):
        self.message = message or self.default_message
        self.errors = errors or {}
        super().__init__(self.message)

    def as_payload(self):
        return {"detail": self.message, **self.errors}

    def __reduce__(self):
        # subclasses take different constructor arguments; rebuild from state
        return _rebuild, (type(self), self.__dict__)


def _rebuild(cls, state):
    error = cls.__new__(cls)
    Exception.__init__(error, state.get('message'))
    error.__dict__.update(state)
    return error


# =============================================================================
# STRUCTURAL (library layer)
# =============================================================================

class InvalidDimensionError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "Invalid subsystem dimension"


class InvalidLevelError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "Level index out of range"


class SignatureError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "Operator signatures do not match"


class HermiticityError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "Hamiltonian is not Hermitian"


class BasisError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "State is not part of the Dicke basis"


# =============================================================================
# CONFIGURATION
# =============================================================================

class ConfigError(SimulationError):
    exit_code = EXIT_CONFIG
    default_message = "Invalid run configuration"


class ModelValidationError(ConfigError):
    default_message = "Model parameters failed validation"

    def __init__(self, errors, message=None):
        fields = ", ".join(sorted(errors)) if errors else ""
        super().__init__(message or f"{self.default_message}: {fields}", errors=errors)


class SchemeMismatchError(ConfigError):
    default_message = "Backend does not support this level scheme"


class CapacityError(SimulationError):
    exit_code = EXIT_CAPACITY
    default_message = "Problem exceeds the exact backend capacity"

    def __init__(self, message=None, feasible_backend=None, errors=None):
        self.feasible_backend = feasible_backend
        if feasible_backend and message:
            message = f"{message}; use the '{feasible_backend}' backend"
        super().__init__(message, errors=errors)


# =============================================================================
# NUMERICAL
# =============================================================================

class NumericalError(SimulationError):
    exit_code = EXIT_NUMERICAL
    default_message = "Numerical failure"


class StiffnessError(NumericalError):
    default_message = "Integrator step size collapsed; review tolerances and rates"


class SteadyStateMultiplicityError(NumericalError):
    default_message = "Generator has more than one stationary state"


class StationarityError(NumericalError):
    default_message = "State is not stationary under the generator"


class NormalizationError(NumericalError):
    default_message = "Normalization is undefined or violated"


class NumericalDomainError(NumericalError):
    default_message = "Argument outside the numerical domain"


class ConvergenceError(NumericalError):
    default_message = "Integration did not converge"
