"""Exception hierarchy shared across the package.

Every error raised by the engine derives from BevlangError so callers
(CLI, service) can map failures to exit codes / HTTP statuses uniformly.
"""

from __future__ import annotations


class BevlangError(Exception):
    """Base class for all engine errors."""

    code = "engine_error"


class BoundsError(BevlangError):
    """Cell index or metric coordinate outside the grid."""

    code = "out_of_bounds"


class SchemaError(BevlangError):
    """Malformed or inconsistent serialized data.

    `path` names the offending JSON location, e.g. "objects[2].position".
    """

    code = "schema_error"

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class BundleLoadError(BevlangError):
    """Scene bundle on disk is missing files or internally inconsistent.

    `reason` is a stable machine-readable tag: missing_file, lidar_length,
    rle_invalid, bad_rotation, bad_json.
    """

    code = "bundle_load_error"

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


class CapacityError(BevlangError):
    """Synthetic scene could not place the requested objects without overlap."""

    code = "capacity_error"


class UnknownObjectError(BevlangError):
    """A spatial operator was given an object_id absent from its input set."""

    code = "unknown_object"

    def __init__(self, object_id: int):
        super().__init__(f"unknown object_id {object_id}")
        self.object_id = object_id


class SpatialArgError(BevlangError):
    """Operator argument violates its precondition (negative k, negative X)."""

    code = "bad_operator_arg"


class NoPointsError(BevlangError):
    """LiDAR scan is empty."""

    code = "no_lidar_points"


class NotVisibleError(BevlangError):
    """No camera sees enough of the object's LiDAR points."""

    code = "not_visible"


class EmptyCropError(BevlangError):
    """No projected point landed inside the image."""

    code = "empty_crop"


class CallParseError(BevlangError):
    """Spatial-call text failed to parse or validate.

    `offset` is the byte offset of the offending token; the message is
    meant to be fed back to the LLM verbatim.
    """

    code = "call_parse_error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalTypeError(BevlangError):
    """Inner call result does not match the outer parameter type."""

    code = "call_type_error"


class TransportError(BevlangError):
    """HTTP backend unreachable / timed out / returned a server error."""

    code = "transport_error"


class BackendRefusal(BevlangError):
    """Backend answered the request but declined to produce text."""

    code = "backend_refusal"


class MalformedResponseError(BevlangError):
    """LLM reply stayed unparseable after the repair budget was spent."""

    code = "malformed_response"

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class ToolBudgetError(BevlangError):
    """LLM still wanted tool rounds after max_tool_rounds."""

    code = "tool_budget_exhausted"

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


class ScriptError(BevlangError):
    """Deterministic mock script had no rule for the incoming message."""

    code = "script_error"


class GenerationError(BevlangError):
    """Question generation exhausted its retry budget for a category."""

    code = "question_generation_error"

    def __init__(self, message: str, category: str):
        super().__init__(message)
        self.category = category


class ScoringError(BevlangError):
    """Non-finite value fed to a metric."""

    code = "scoring_error"


class ConfigError(BevlangError):
    """Service/CLI configuration invalid or missing."""

    code = "config_error"
