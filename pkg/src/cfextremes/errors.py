"""Exception types shared across the package."""


class CfExtremesError(Exception):
    """Base class for all package-specific errors."""


class PrecisionExhausted(CfExtremesError):
    """Two-precision digit agreement failed up to the precision cap.

    Signals a near-rational or otherwise adversarial input: the requested
    number of digits could not be certified.
    """


class ExactZero(CfExtremesError):
    """An expansion map was applied to an exact zero (rational orbit end)."""


class OutsideDomain(CfExtremesError):
    """Input lies outside the fundamental domain of the requested map."""


class RegionViolation(CfExtremesError):
    """An orbit left a region that it provably must not leave."""


class EngineInvariantViolation(CfExtremesError):
    """A digit violated its provable range (engine bug, checked always)."""


class ReconstructionDivergence(CfExtremesError):
    """Convergent errors failed to decrease; indicates an engine bug."""


class DualityViolation(CfExtremesError):
    """Order-statistic / exceedance-count duality failed; engine bug."""


class MissingConstants(CfExtremesError):
    """A Hurwitz experiment was requested without cusp-constant estimates."""


class InsufficientMass(CfExtremesError):
    """Too few Monte Carlo samples landed in a sector to estimate it."""
