"""Exception hierarchy.

Every error raised for a numerical or statistical reason derives from
:class:`MslcaError`; the command line maps those to exit code 1.
"""


class MslcaError(Exception):
    """Base class for domain errors."""


class InputError(MslcaError, ValueError):
    """Malformed input: wrong shapes, out-of-range indices, bad values."""


class TuningError(MslcaError):
    """The loss cutoff could not be tuned."""


class ConstantsError(MslcaError):
    """Quadrature for the asymptotic constants did not converge."""


class SingularScatterError(MslcaError):
    """A scatter matrix (or one of its diagonal blocks) is numerically singular."""


class DegenerateDataError(MslcaError):
    """The data do not support estimation (all equal, lower-dimensional, ...)."""


class ScaleError(MslcaError):
    """No scale satisfying the S-constraint could be bracketed."""


class EmptyWeightError(MslcaError):
    """Every observation lies beyond the cutoff; all weights vanish."""


class DegenerateSpectrumError(MslcaError):
    """Eigenvalues are too close for eigenvector influence functions."""


class DegenerateNormalizerError(MslcaError):
    """The chi-square normalizer is zero."""
