"""Exception hierarchy shared by all modules."""


class ParaweightError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ParaweightError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class EvaluationError(ParaweightError, ValueError):
    """A user-supplied function returned a non-finite value."""


class WeightDomainError(ParaweightError):
    """The weight function saturates below the requested domain length.

    Raised for non-Osgood moduli, whose ``phi`` is bounded by
    ``sup_phi = int_0^1 ds / mu(s)``.
    """

    def __init__(self, sup_phi: float, tau_max: float):
        self.sup_phi = sup_phi
        self.tau_max = tau_max
        super().__init__(
            f"weight domain exhausted: sup phi = {sup_phi:.12g} < tau_max = {tau_max:.12g}"
        )


class WeightOverflowError(ParaweightError):
    """The weight grows past floating-point range before reaching tau_max."""


class ConfigurationError(ParaweightError, ValueError):
    """Inconsistent operator or probe configuration."""


class BlockSupportError(ParaweightError, ValueError):
    """A field handed to a block-level routine is not a dyadic block."""


class ThresholdNotFound(ParaweightError):
    """No paraproduct shift up to ``m_max`` satisfies the positivity bound."""

    def __init__(self, profile: dict[int, float], target: float):
        self.profile = dict(profile)
        self.target = target
        worst = ", ".join(f"m={m}: {r:.4g}" for m, r in sorted(profile.items()))
        super().__init__(f"threshold not found (target ratio {target:.4g}); margins: {worst}")


class PreconditionError(ParaweightError, ValueError):
    """Input violates a documented precondition (e.g. time support)."""
