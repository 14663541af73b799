"""Exception hierarchy.

Everything derives from :class:`IonCavityError`; the CLI maps the three
categories below onto exit codes (data=3, numeric=4).
"""


class IonCavityError(Exception):
    """Base class for all package errors."""


class DomainError(IonCavityError, ValueError):
    """An input lies outside the physical domain of an operation."""


class UnsupportedInputError(IonCavityError, ValueError):
    """An operation was asked for something its inputs cannot provide."""


class DataError(IonCavityError, ValueError):
    """Malformed configuration, CSV or trace data."""


class NumericError(IonCavityError, ArithmeticError):
    """A numerical procedure (quadrature, integration) failed."""


class StepSizeError(NumericError):
    """Explicit time stepping would be unstable at the requested step."""


class EstimationError(NumericError):
    """A fit could not produce a usable estimate."""


class DegenerateFitError(EstimationError):
    """Singular curvature or fewer data points than free parameters."""


class FlatSignalError(EstimationError):
    """No dip could be distinguished from noise."""


class ModelViolationError(EstimationError):
    """Data does not follow the functional form it is supposed to."""


class DegenerateTraceError(DataError):
    """A simulated trace would carry no information (e.g. zero photon rate)."""


class EmptyTraceError(DataError):
    """Postselection removed every sequence at some point of a trace."""
