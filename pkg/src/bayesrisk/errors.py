"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes; library callers can catch
the common base class.
"""


class BayesRiskError(Exception):
    """Base class for all package errors."""


class DomainError(BayesRiskError, ValueError):
    """An argument is outside its mathematical domain (e.g. negative distance)."""


class ContractViolation(BayesRiskError):
    """A value broke an invariant it was required to satisfy (e.g. non-monotone curve)."""


class ConfigError(BayesRiskError):
    """Invalid configuration (bad width, malformed config file, ...)."""


class FormatError(BayesRiskError):
    """A file failed to parse: wrong magic, truncated payload, malformed line."""


class SchemaError(FormatError):
    """A file parsed but its declared dimensions disagree with expectations."""


class DatasetError(BayesRiskError):
    """A dataset is unusable (empty demo log, no trajectories, ...)."""


class LookupMissError(BayesRiskError, KeyError):
    """A LUT query had no entry and no default was configured."""


class ScoringError(BayesRiskError):
    """Trajectory scoring failed (no valid pixels, no frames)."""


class PlanningError(BayesRiskError):
    """Planning failed: infeasible start/goal or no path exists."""


class InfeasibleInputError(PlanningError):
    """Start or goal lies inside an inflated obstacle."""


class TransportError(BayesRiskError):
    """A completion endpoint could not be reached or returned a bad response."""
