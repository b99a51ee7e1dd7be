"""Exception hierarchy shared by all fisherlab modules."""


class FisherlabError(Exception):
    """Base class for computation errors raised by fisherlab."""


class CircuitError(FisherlabError, ValueError):
    """A circuit, gate or parameter vector is malformed."""


class SizeLimitError(FisherlabError):
    """The requested simulation exceeds the desk-scale qubit limits."""


class ChannelError(FisherlabError, ValueError):
    """A noise channel is not trace preserving or does not fit the register."""


class MeasurementError(FisherlabError, ValueError):
    """Measurement effects are not positive or do not sum to identity."""


class UnsupportedGateError(FisherlabError):
    """A gate has no parameter-shift rule of the required form."""


class KLUndefinedError(FisherlabError, ValueError):
    """The KL divergence is undefined because q vanishes where p does not."""


class FisherDiscontinuityError(FisherlabError):
    """An outcome (or eigenvalue) vanishes while its derivative does not."""


class SingularMetricError(FisherlabError):
    """The metric used in a natural-gradient solve is singular."""


class NotIdentifiableError(FisherlabError):
    """A Fisher matrix or likelihood carries no information about a parameter."""
