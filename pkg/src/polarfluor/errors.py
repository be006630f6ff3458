"""Exception hierarchy shared by every stage of the pipeline."""


class PolarFluorError(Exception):
    """Base class for all package errors."""


class ConfigError(PolarFluorError, ValueError):
    """Invalid scenario configuration."""


class NumericalError(PolarFluorError):
    """Base class for numerical failures (CLI exit code 3)."""


class IncommensurableFrequencies(NumericalError):
    """No common fundamental frequency exists within the integer bound."""


class TruncationTooSmall(NumericalError):
    """Harmonic cutoff cannot hold the primary coupling stencil."""


class SingularSystem(NumericalError):
    """A linear system in the harmonic hierarchy is singular."""


class NoConvergence(NumericalError):
    """Truncation doubling reached its cap without converging."""


class StepUnderflow(NumericalError):
    """The time-domain integrator failed to advance."""


class EmptySpectrum(PolarFluorError, ValueError):
    """Spectrum has no positive values to analyse."""
