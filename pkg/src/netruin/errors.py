"""Exception hierarchy for model, network and numerical failures."""


class NetruinError(Exception):
    """Base class for all library errors."""


class NoAdjustmentCoefficient(NetruinError):
    """The cumulant equation has no positive root (e.g. rho >= 1)."""


class DivergentMoment(NetruinError):
    """The exponential moment diverges before the defining equation is met."""


class EmptyAgentSet(NetruinError):
    """An agent group was empty where a nonempty one is required."""


class WeightConstraintViolated(NetruinError):
    """A realized weight matrix has an object column summing above 1."""


class EnumerationTooLarge(NetruinError):
    """Exact enumeration would exceed the configured size cap."""


class SchemeNotFactorizable(NetruinError):
    """The weight scheme does not admit per-object-column factorization."""


class DegenerateConditioning(NetruinError):
    """Conditioning event has probability zero."""


class IsolatedGroup(NetruinError):
    """The agent group has no edges in the given realization."""


class RhoOutOfRange(NetruinError):
    """A series parameter rho lies outside [0, 1)."""


class ModelMismatch(NetruinError):
    """Inputs do not satisfy the structural preconditions of a closed form."""


class InfeasibleAllocation(NetruinError):
    """An exponent allocation violates the feasibility constraints."""


class DimensionMismatch(NetruinError):
    """Array or network dimensions are inconsistent."""


class DegenerateColumn(NetruinError):
    """A column statistic is invalid (negative intensity or probability)."""


class ConfigError(NetruinError):
    """An experiment configuration failed validation."""
