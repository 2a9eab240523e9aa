"""Exception types shared across the library."""


class KinvarError(ValueError):
    """Base class for all library-specific errors."""


class DeterminantNotUnimodular(KinvarError):
    """|det a| differs from 1 beyond tolerance."""


class SingularMatrix(KinvarError):
    """Matrix is not invertible."""


class NonRealResult(KinvarError):
    """An imaginary part survived where the result must be real."""


class NonFinite(KinvarError):
    """A quadrature node evaluated to NaN or Inf."""


class OmegaNonPositive(KinvarError):
    """Pole location for the principal-value integral must be positive."""


class RankMismatch(KinvarError):
    """Multiparticle ranks do not line up."""


class RankTooLarge(KinvarError):
    """Rank exceeds the configured factorial-growth cap."""


class SlotCapExceeded(KinvarError):
    """Kernel slot count exceeds the symmetrization cap."""


class BelowThreshold(KinvarError):
    """Mandelstam s is below the production threshold."""


class PacketNotPositiveTime(KinvarError):
    """Time-domain packet leaks too much mass into x0 < 0."""


class UnknownTarget(KinvarError):
    """CLI suite target is not recognized."""


class ConfigInvalid(KinvarError):
    """Run configuration failed schema validation."""
