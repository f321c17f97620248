"""Exception types shared across the package."""


class AionfitError(Exception):
    """Base class for all library errors."""


class ModelError(AionfitError, ValueError):
    """Body model definition is structurally invalid."""


class InputError(AionfitError, ValueError):
    """Structured inputs are inconsistent (shapes, frame counts, indices)."""


class SchemaError(AionfitError, ValueError):
    """A serialized document failed to parse or declares an unsupported version."""


class ConfigurationError(AionfitError, ValueError):
    """A component was configured in an unusable way."""


class BehindCameraError(AionfitError, ValueError):
    """Projection was requested for a point at or behind the camera plane."""


class MetricError(AionfitError, ValueError):
    """A metric is undefined for the given inputs."""


class NumericalError(AionfitError, ArithmeticError):
    """A non-finite value appeared during evaluation.

    ``parameter_index`` points at the first offending entry of the flat
    parameter vector when the failure is attributable to one.
    """

    def __init__(self, message: str, parameter_index: int | None = None):
        super().__init__(message)
        self.parameter_index = parameter_index


class FitError(AionfitError, RuntimeError):
    """Fitting could not produce any output."""


class PackageError(AionfitError, ValueError):
    """Dataset package failed validation."""


class SynthError(AionfitError, RuntimeError):
    """Synthetic scenario generation failed."""
