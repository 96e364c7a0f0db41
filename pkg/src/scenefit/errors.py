"""Exception types raised across the toolkit.

Every module raises subclasses of SceneFitError so callers (and the CLI)
can distinguish bad inputs from transport faults from numeric blow-ups
without string matching.
"""


class SceneFitError(Exception):
    """Base class for all toolkit errors."""


class InputError(SceneFitError):
    """Malformed or inconsistent input data (shapes, schemas, missing files)."""


class BehindCameraError(SceneFitError):
    """A 3D point maps to nonpositive camera-frame depth."""


class EmptyElementError(SceneFitError):
    """A scene element ended up with no 3D points."""


class VocabularyError(SceneFitError):
    """A body-part name outside the closed part vocabulary."""


class PlacementError(SceneFitError):
    """Body initialization could not be placed (e.g. no floor element)."""


class TransportError(SceneFitError):
    """Reasoner endpoint unreachable or timed out after all retries."""


class SchemaError(SceneFitError):
    """Reasoner response did not match the expected JSON schema.

    The offending payload is kept on ``payload`` for debugging.
    """

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class GraphValidationError(SceneFitError):
    """A contact graph failed validation; ``violations`` lists the reasons."""

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class NumericError(SceneFitError):
    """A loss or gradient evaluated to a non-finite value."""


class PipelineError(SceneFitError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
