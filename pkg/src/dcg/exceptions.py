"""Exception hierarchy shared across the package."""


class DcgError(Exception):
    """Base class for every error raised by this package."""


class GraphError(DcgError, ValueError):
    pass


class CyclicGraph(GraphError):
    pass


class UnknownParent(GraphError):
    pass


class DuplicateName(GraphError):
    pass


class FamilyDomainMismatch(GraphError):
    pass


class UnknownNode(DcgError, KeyError):
    def __str__(self):
        # KeyError quotes its argument; keep plain messages
        return str(self.args[0]) if self.args else ""


class DomainViolation(DcgError, ValueError):
    pass


class OutOfSupport(DcgError, ValueError):
    pass


class QuantileOutOfRange(DcgError, ValueError):
    pass


class ShapeMismatch(DcgError, ValueError):
    pass


class EmptyDataset(DcgError, ValueError):
    pass


class SpecMismatch(DcgError, ValueError):
    pass


class CheckpointError(DcgError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CorruptCheckpoint(CheckpointError):
    pass


class EmptyIntervention(DcgError, ValueError):
    pass


class EmptySamples(DcgError, ValueError):
    pass


class RejectionStall(DcgError, RuntimeError):
    pass
