"""Exception hierarchy shared across the package."""


class TrimlabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TrimlabError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class UnboundedQuantileError(DomainError):
    """quantile(1) was requested on a distribution with unbounded upper support."""


class MomentError(TrimlabError, ValueError):
    """A required absolute moment or quantile integral diverges."""


class DegenerateWindowError(TrimlabError, ValueError):
    """The trimming window collapses (xi_a == xi_b) or the Winsorized scale vanishes."""


class InvalidTrimError(TrimlabError, ValueError):
    """Trim counts violate 0 <= k < n - m <= n."""


class ScheduleError(TrimlabError, ValueError):
    """A trimming rule produced invalid counts at some sample size."""


class BoundWindowError(TrimlabError, ValueError):
    """An order-statistic moment bound was queried outside its validity window."""


class InternalConsistencyError(TrimlabError, RuntimeError):
    """Two evaluation routes of the same quantity disagree; signals a bug, not bad data."""


class ConfigError(TrimlabError, ValueError):
    """A configuration document is malformed or violates the schema."""
