"""Exception types raised across the package."""


class Lie3Error(Exception):
    """Base class for all package errors."""


class UnsupportedChart(Lie3Error):
    """The group has no coordinate chart (classification-only family)."""


class BadElement(Lie3Error):
    """Coordinates do not match the chart of the group."""


class BadSpec(Lie3Error):
    """Malformed group specification or parameters out of range."""


class NotACovering(Lie3Error):
    """The (total, base) pair is not a supported covering projection."""


class DegeneratePlane(Lie3Error):
    """Tangent vectors do not span a 2-plane."""


class IntegrationEscape(Lie3Error):
    """Geodesic integration left the configured coordinate bound."""


class NoPathFound(Lie3Error):
    """Distance search produced no admissible curve."""


class DegenerateEndpoints(Lie3Error):
    """Endpoints violate the x1 != x2, y1 != y2 requirement."""


class Unclassifiable(Lie3Error):
    """Matrix A could not be reduced to a catalog family."""


class NotApplicable(Lie3Error):
    """Criterion precondition (positive real spectrum) violated."""


class StatisticalError(Lie3Error):
    """Too few samples or radii for a meaningful fit."""
