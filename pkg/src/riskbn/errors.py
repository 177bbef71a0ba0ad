"""Exception types shared across the package."""


class GraphError(ValueError):
    """Base class for graph construction and edit failures."""


class UnknownNodeError(GraphError):
    """A node id was referenced that the graph does not contain."""


class CycleError(GraphError):
    """An edge set or edit move would introduce a directed cycle."""


class ConstraintError(GraphError):
    """A graph or edit move violates the prior-knowledge constraints."""


class EdgeStateError(GraphError):
    """Edit move applied to an edge in the wrong state (add on present,
    delete/reverse on absent)."""


class SchemaError(ValueError):
    """Variables, states or table shapes do not line up."""


class DataFormatError(ValueError):
    """A data, knowledge or model file could not be parsed."""


class ImpossibleEvidenceError(ValueError):
    """Evidence has probability zero under the network.

    Raised instead of silently propagating NaN; callers that can tolerate
    impossible records (e.g. batch risk scoring) catch this explicitly.
    """

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index
