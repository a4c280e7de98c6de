"""Business Exceptions

Domain-specific exceptions.
"""


class CCSimException(Exception):
    """Base exception for ccsim"""

    pass


class InvalidParametersException(CCSimException, ValueError):
    """(N, M, alpha) outside the supported range"""

    pass


class InvalidProfileException(CCSimException, ValueError):
    """Request profile or profile document is malformed"""

    pass


class OutOfRegimeException(CCSimException, ValueError):
    """Closed-form rate evaluated outside the regime it was derived for"""

    pass


class InfeasibleLoadException(CCSimException, ValueError):
    """Requested total load cannot be split over the groups"""

    pass


class SchedulerDefectException(CCSimException):
    """Scheduler produced an inconsistent or undecodable schedule"""

    pass


class RateIdentityException(SchedulerDefectException):
    """Counted rate disagrees with the closed form while no fallback fired"""

    pass


__all__ = [
    "CCSimException",
    "InvalidParametersException",
    "InvalidProfileException",
    "OutOfRegimeException",
    "InfeasibleLoadException",
    "SchedulerDefectException",
    "RateIdentityException",
]
