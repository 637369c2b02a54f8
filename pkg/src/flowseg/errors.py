"""Exception types shared across the package."""


class FlowsegError(Exception):
    """Base class for all flowseg errors."""


class OutOfDomainError(FlowsegError, ValueError):
    """A query or seed position lies outside the field bounds."""


class InvalidGridError(FlowsegError, ValueError):
    """Grid dimensions or spacing are unusable for the requested operation."""


class GridFormatError(FlowsegError, ValueError):
    """A grid or streamline file is malformed; message names the byte offset."""


class CapacityError(FlowsegError, ValueError):
    """A requested seed count exceeds the configured cap."""


class EmptyIndexError(FlowsegError, ValueError):
    """A segment index was requested over zero segments."""


class EmptyNeighborhoodError(FlowsegError, ValueError):
    """An operation that needs at least one neighbor got none."""


class DegenerateInputError(FlowsegError, ValueError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class AlignmentError(FlowsegError, ValueError):
    """Two record sets that must cover identical grid points do not."""
