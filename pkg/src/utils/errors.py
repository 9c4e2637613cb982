"""
Errors Module

Exception hierarchy shared by the logic layer and the controllers.
"""


class ApVlmError(Exception):
    """Base class for all simulator errors."""


class ConfigError(ApVlmError):
    """Raised when an experiment or endpoint configuration cannot be used."""


class SceneError(ApVlmError):
    """Raised when a scene file cannot be loaded or fails validation."""


class PolicyExhausted(ApVlmError):
    """Raised by a policy when no valid unvisited action remains."""


class EndpointUnavailable(ApVlmError):
    """Raised when the remote vision-language endpoint cannot be reached."""


class ProposalRejected(ApVlmError):
    """Raised when the remote policy keeps proposing invalid actions.

    Attributes:
        reasons (list): Rejection reasons collected over the retry budget
    """

    def __init__(self, message, reasons=None):
        super().__init__(message)
        self.reasons = list(reasons or [])


class LogCorrupt(ApVlmError):
    """Raised when an episode log violates one of its invariants.

    Attributes:
        invariant (str): Name of the first failing invariant
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
