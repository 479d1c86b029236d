"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer can
map failures to response bodies without string matching.
"""


class CamtrajError(Exception):
    """Base class for all package errors."""

    code = "Error"


class DegenerateRotation(CamtrajError):
    """6D rotation input cannot be orthonormalized (zero or parallel vectors)."""

    code = "DegenerateRotation"


class InvalidRotation(CamtrajError):
    """Matrix is not a proper rotation (not orthonormal or det != +1)."""

    code = "InvalidRotation"


class LengthMismatch(CamtrajError):
    """Two trajectories have different frame counts."""

    code = "LengthMismatch"


class ShapeError(CamtrajError):
    """Tensor shape violates a model contract (e.g. M not divisible by l)."""

    code = "ShapeError"


class TrainingDiverged(CamtrajError):
    """Training loss became NaN or inf."""

    code = "TrainingDiverged"


class ContextOverflow(CamtrajError):
    """Token sequence longer than the model context window."""

    code = "ContextOverflow"


class UnknownToken(CamtrajError):
    """Prompt contains words outside the closed vocabulary."""

    code = "UnknownToken"

    def __init__(self, words):
        self.words = list(words)
        super().__init__(f"unknown words: {', '.join(self.words)}")


class EmptyScene(CamtrajError):
    """Scene has no images to select an anchor from."""

    code = "EmptyScene"


class NotDifferentiable(CamtrajError):
    """Embedding provider cannot back-propagate to camera parameters."""

    code = "NotDifferentiable"


class UnparsableQuery(CamtrajError):
    """Query contains no recognizable motion clause."""

    code = "UnparsableQuery"

    def __init__(self, message, span=""):
        self.span = span
        super().__init__(message)


class RemotePlannerUnavailable(CamtrajError):
    """Remote planner endpoint unreachable; caller should fall back."""

    code = "RemotePlannerUnavailable"


class PlanValidationFailed(CamtrajError):
    """Remote planner output failed schema validation after retry."""

    code = "PlanValidationFailed"


class InfeasibleComposition(CamtrajError):
    """Anchor constraints cannot be satisfied by a similarity transform."""

    code = "InfeasibleComposition"


class SceneNotFound(CamtrajError):
    """Requested scene id is not in the scene directory."""

    code = "SceneNotFound"


class CheckpointError(CamtrajError):
    """Checkpoint file is malformed or has an unsupported version."""

    code = "CheckpointError"
