"""Error types raised by the harmonic-analysis toolkit.

Argument problems are plain ``ValueError``s. Everything below signals a
numerical or certification failure that a caller may want to catch as a
group via :class:`HarmonicAnalysisError`.
"""


class HarmonicAnalysisError(RuntimeError):
    """Base class for numerical failures of the toolkit."""


class QuadratureError(HarmonicAnalysisError):
    """An adaptive quadrature finished with an error estimate above tolerance."""


class TruncationError(HarmonicAnalysisError):
    """The analytic tail bound of a truncated integral exceeds the tolerance."""


class BranchError(HarmonicAnalysisError):
    """The principal square-root branch jumped between adjacent quadrature nodes."""


class UndefinedPhaseError(HarmonicAnalysisError, ValueError):
    """The phase arg(|z|^2 + i t) was requested at the identity."""


class CalibrationError(HarmonicAnalysisError):
    """The kernel constant fit is ill-conditioned or misses its residual gate."""


class KernelDegenerateError(HarmonicAnalysisError):
    """No sphere grid point carries a kernel value above threshold."""


class CertificateError(HarmonicAnalysisError):
    """A dyadic cube admits no inner containment ball.

    Attributes:
        cube: Description of the offending cube
    """

    def __init__(self, message: str, cube: object = None):
        super().__init__(message)
        self.cube = cube


class EvaluationError(HarmonicAnalysisError):
    """A function handed to the toolkit returned non-finite values."""


class VerificationError(HarmonicAnalysisError):
    """A sampled verification gate (sign constancy, lower bound) failed."""
