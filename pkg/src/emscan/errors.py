"""Exception types raised by the registration library."""


class ScanMatchError(Exception):
    """Base class for every library-specific error."""


class NonPositiveRadius(ScanMatchError, ValueError):
    """The search window must be strictly positive."""


class EmptyInput(ScanMatchError, ValueError):
    """A scan or model point set is empty, so registration is impossible."""


class NoCorrespondences(ScanMatchError):
    """No gated scan-model pairs exist, or every responsibility is zero."""


class DegenerateGeometry(ScanMatchError):
    """Total correspondence weight is too small to determine a pose."""


class NoInliers(ScanMatchError):
    """Every scan point is an outlier; the residual covariance is undefined."""


class DegenerateRow(ScanMatchError):
    """A responsibility row could not be normalized even in log domain."""
