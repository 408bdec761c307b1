"""Exception types shared across the toolkit."""


class Error(Exception):
    """Base class for all toolkit errors."""


class DegenerateGeometry(Error):
    """A geometric construction collapsed (coincident points, zero-length segment)."""


class AmbiguousIntersection(Error):
    """Collinear overlapping segments intersect in more than one point."""


class ParallelLines(Error):
    """Two lines are parallel (or coincident); no unique intersection exists."""


class DomainError(Error):
    """An input value lies outside the mathematical domain of an operation."""


class DataError(Error):
    """A dataset or data file is malformed, empty, or missing required fields."""


class ConfigError(Error):
    """Invalid configuration or parameters."""
