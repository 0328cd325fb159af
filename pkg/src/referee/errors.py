"""Exception hierarchy shared by every referee component.

Everything raised on purpose derives from RefereeError so callers (CLI,
API) can map domain failures to exit code 1 / HTTP 4xx uniformly.
"""

from __future__ import annotations


class RefereeError(Exception):
    """Base class for all domain errors."""


class GraphSyntaxError(RefereeError):
    """The submitted document is not well-formed in the portable graph format."""


class ValidationError(RefereeError):
    """A structurally broken graph: dangling value, duplicate id, cycle, bad attrs."""

    def __init__(self, message: str, node_id: str | None = None):
        super().__init__(message if node_id is None else f"node {node_id!r}: {message}")
        self.node_id = node_id


class ShapeError(RefereeError):
    """Operand shapes are incompatible for an op."""

    def __init__(self, message: str, node_id: str | None = None):
        super().__init__(message if node_id is None else f"node {node_id!r}: {message}")
        self.node_id = node_id


class NumericError(RefereeError):
    """A node produced a non-finite value during execution."""

    def __init__(self, message: str, node_id: str | None = None):
        super().__init__(message if node_id is None else f"node {node_id!r}: {message}")
        self.node_id = node_id


class UnknownOpKind(RefereeError):
    """Op kind outside the supported vocabulary."""


class UnknownPass(RefereeError):
    """Pass name not in the optimizer registry."""


class DegenerateRange(RefereeError):
    """Layer-merge range with fewer than two layers."""


class IncompatibleLayers(RefereeError):
    """Layer-merge candidates differ in kind, attrs, or parameter shapes."""


class LengthMismatch(RefereeError):
    """Paired sequences of different lengths."""


class EmptySet(RefereeError):
    """A metric was asked to reduce over zero items."""


class ShapeMismatch(RefereeError):
    """Two tensors expected to be the same shape are not."""


class NoValidPixels(RefereeError):
    """A depth map has no finite, positive ground-truth pixel."""


class EmptyGroundTruth(RefereeError):
    """Ground-truth point cloud is empty."""


class UnknownTrack(RefereeError):
    """Track number outside {1, 2, 3}."""


class NotFound(RefereeError):
    """Unknown submission id, team, or run id."""


class StateConflict(RefereeError):
    """Operation not allowed in the submission's current lifecycle state."""


class BundleError(RefereeError):
    """Test bundle directory is missing or malformed."""
