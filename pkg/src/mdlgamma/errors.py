"""Exception hierarchy.

Every error raised on purpose by the package derives from ``MdlGammaError``
so callers can catch the whole family at once.  Most also subclass
``ValueError`` because they signal a bad argument.
"""


class MdlGammaError(Exception):
    """Base class for all package errors."""


class ChartDomainExceeded(MdlGammaError, ValueError):
    """A chart offset lies outside the injectivity radius or the reach."""


class NoBoundary(MdlGammaError, ValueError):
    """A boundary quantity was requested on a closed geometry."""


class NonPositiveScale(MdlGammaError, ValueError):
    pass


class UnsupportedDimension(MdlGammaError, ValueError):
    pass


class MeshsizeTooLarge(MdlGammaError, ValueError):
    pass


class InterfaceTouchesBoundary(MdlGammaError, ValueError):
    pass


class NegativeProfile(MdlGammaError, ValueError):
    pass


class ZeroMass(MdlGammaError, ValueError):
    pass


class FeatureOutOfRange(MdlGammaError, ValueError):
    """A cell feature fell outside the compact feature set."""


class NotFirstLayer(MdlGammaError, ValueError):
    pass


class RadiusExceedsReach(MdlGammaError, ValueError):
    pass


class ResolutionTooCoarse(MdlGammaError, ValueError):
    pass


class GridTooSmall(MdlGammaError, ValueError):
    pass


class InconclusiveFit(MdlGammaError):
    """A log-log fit had too few points or too low a coefficient of determination."""


class ConfigError(MdlGammaError, ValueError):
    """Invalid run configuration.  ``lineno`` points into the source file when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
