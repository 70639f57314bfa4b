"""
Exception hierarchy shared by every stage of the pipeline.

``DataError`` covers anything wrong with the inputs handed to the library
(files, configurations, shapes); ``InternalError`` signals that an internal
invariant did not hold.  The command line maps the two branches to distinct
exit codes.
"""

__all__ = [
    "GffError",
    "DataError",
    "InternalError",
    "UsageError",
    "MalformedLine",
    "MissingHeader",
    "InvariantViolation",
    "IoFailure",
    "DimensionMismatch",
    "EmptyHistory",
    "BoxNotInFrameList",
    "ShapeMismatch",
    "EmptyGroupList",
    "EmptyDataset",
    "SpecInvalid",
    "LengthMismatch",
    "SingleClass",
    "ConfigError",
    "ModelFormatError",
    "GradientCheckFailure",
]


class GffError(Exception):
    pass


class DataError(GffError, ValueError):
    pass


class InternalError(GffError, RuntimeError):
    pass


class UsageError(GffError):
    pass


class MalformedLine(DataError):
    """A line of an observation stream is not a JSON object."""

    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"Malformed line {line_no}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class MissingHeader(DataError):
    pass


class InvariantViolation(DataError):
    """A parsed value breaks a documented invariant."""

    def __init__(self, field, line_no=None, reason=""):
        self.field = field
        self.line_no = line_no
        where = f" on line {line_no}" if line_no is not None else ""
        msg = f"Invalid value for '{field}'{where}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class IoFailure(DataError, OSError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyHistory(DataError):
    pass


class BoxNotInFrameList(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class EmptyGroupList(DataError):
    pass


class EmptyDataset(DataError):
    pass


class SpecInvalid(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class ConfigError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class GradientCheckFailure(InternalError):
    def __init__(self, max_rel_error, tolerance):
        self.max_rel_error = max_rel_error
        self.tolerance = tolerance
        super().__init__(
            f"Analytic gradients disagree with finite differences: "
            f"max relative error {max_rel_error:.3e} >= {tolerance:.1e}"
        )
