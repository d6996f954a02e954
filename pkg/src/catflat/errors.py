"""Exception types shared across the package."""


class CatflatError(Exception):
    """Base class for all package errors."""


class InvalidComplex(CatflatError):
    """Structural problem in a complex description."""


class InvalidLocation(CatflatError):
    """A point location that does not name a point of the complex."""


class FrontierLink(CatflatError):
    """Link requested at a frontier point, where it is only partial."""


class InvalidChain(CatflatError):
    """A face chain that is malformed or fails to be a relative cycle."""


class NotVerifiedCat0(CatflatError):
    """Operation requires a complex whose CAT(0) validation passed."""


class GeodesicExitsTruncation(CatflatError):
    """A shortest path touches the frontier, so the answer is truncation-dependent."""


class NoAntipode(CatflatError):
    """Extension failed: the incoming direction has no antipode in the sub-link."""

    def __init__(self, message, location=None, direction=None):
        super().__init__(message)
        self.location = location
        self.direction = direction


class TruncationTooSmall(CatflatError):
    """Requested radius is not safely inside the truncated complex."""


class NotSquareComplex(CatflatError):
    """Operation is only defined on complexes all of whose faces are unit squares."""
