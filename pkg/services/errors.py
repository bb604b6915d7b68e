"""
Exception hierarchy for the workspace analysis services.

Everything raised for bad input derives from KinematicsError, itself a
ValueError, so callers that only care about "invalid input" can catch
ValueError the way the rest of the code base does.
"""


class KinematicsError(ValueError):
    """Base class for invalid geometries, targets and analysis requests"""


class NonPositiveD4Error(KinematicsError):
    pass


class NegativeParameterError(KinematicsError):
    pass


class NonFiniteParameterError(KinematicsError):
    pass


class DegenerateGeometryError(KinematicsError):
    """d2 = d3 = r2 = 0: the reachable set collapses to a sphere"""


class ZeroD2PathError(KinematicsError):
    """The quartic needs d2 > 0; use the reduced solver instead"""


class DegenerateReducedError(KinematicsError):
    pass


class UnknownTypeError(KinematicsError):
    pass


class UnresolvedRegionError(KinematicsError):
    """Interior samples of a region kept disagreeing after refinement"""


class GeometryFileError(KinematicsError):
    """Malformed geometry or settings document"""


class CertificationFailure(Exception):
    """
    A geometric candidate failed its algebraic certificate.

    Never propagated out of the detectors: candidates are dropped and the
    failure is logged.
    """

    def __init__(self, kind, location, residuals):
        self.kind = kind
        self.location = location
        self.residuals = residuals
        super().__init__(
            f"{kind} candidate at rho={location[0]:.6g}, z={location[1]:.6g} "
            f"failed certification (max residual {max(abs(r) for r in residuals):.3g})"
        )
