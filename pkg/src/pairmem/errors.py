"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A model parameter violates its documented constraints."""


class DegenerateClusterError(ParameterError):
    """Signal and idler FSRs are equal, so every mode pair is doubly resonant."""


class EmptySpectrumError(ParameterError):
    """No cavity mode overlaps the phase-matching envelope."""


class SimulationError(RuntimeError):
    """Event generation failed."""


class EstimationError(RuntimeError):
    """An estimator has too little data or an ill-posed input."""


class FitError(EstimationError):
    """A least-squares fit could not be performed."""


class EventFormatError(IOError):
    """An event file is corrupt, truncated, or of the wrong version."""


class ScenarioError(ValueError):
    """A scenario document failed to parse or validate."""
