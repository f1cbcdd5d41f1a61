"""Exception types raised across the package."""


class DetplaceError(Exception):
    """Base class for all package errors."""


class ParseError(DetplaceError):
    """A topology, pool, plan or scenario file could not be parsed."""


class ValidationError(DetplaceError):
    """Structural problem in an otherwise well-formed input."""

    def __init__(self, message, layer_id=None):
        super().__init__(message)
        self.layer_id = layer_id


class ConfigError(DetplaceError, ValueError):
    pass


class UnknownNode(DetplaceError, KeyError):
    def __str__(self):
        return f"unknown node {self.args[0]!r}"


class UnknownDetector(DetplaceError, KeyError):
    def __str__(self):
        return f"unknown detector {self.args[0]!r}"


class UnknownLayer(DetplaceError, KeyError):
    def __str__(self):
        return f"unknown layer {self.args[0]!r}"


class DetectorTooLarge(DetplaceError):
    """One or more detectors exceed a node's CPU or RAM cap on their own."""

    def __init__(self, detector_ids, node_id=None):
        self.detector_ids = tuple(detector_ids)
        self.node_id = node_id
        where = f" on node {node_id!r}" if node_id is not None else ""
        super().__init__(f"detector(s) {', '.join(self.detector_ids)} exceed resource caps{where}")


class InstanceTooLarge(DetplaceError):
    """Input exceeds the size guard of an exact method."""


# the benchmark reports oversize oracle instances under this name
OracleTooLarge = InstanceTooLarge


class MismatchedProblem(DetplaceError, ValueError):
    pass


class InvalidDelta(DetplaceError, ValueError):
    """A resource delta would leave a node with a non-positive budget."""
