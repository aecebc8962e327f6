"""Exception hierarchy shared by all simulator modules."""


class PassCovertError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PassCovertError, ValueError):
    """Invalid geometry, scenario or configuration file."""


class SingularityError(PassCovertError, ValueError):
    """A target coincides with an antenna, slot or reference point."""


class DomainError(PassCovertError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class DegenerateTestError(DomainError):
    """The two detection hypotheses are indistinguishable."""


class DegenerateChannelError(PassCovertError, ValueError):
    """Bob's channel is (numerically) parallel to the warden's channel."""


class EmptySubspaceError(PassCovertError, ValueError):
    """The AN whitening matrix has no eigenvalue above tolerance."""


class SensingInfeasibleError(PassCovertError):
    """The sensing threshold cannot be met within the power budget."""


class TrackingDivergenceError(PassCovertError):
    """The EKF innovation covariance became numerically singular."""


class TrainingDivergenceError(PassCovertError):
    """A network output or loss became non-finite."""


class BufferNotReady(PassCovertError):
    """Replay buffer holds fewer transitions than the training minimum."""
