"""Exception types raised across the package."""


class BiplaneRegError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(BiplaneRegError):
    """Two images that must share dimensions do not."""


class InvalidKernel(BiplaneRegError):
    """A filter kernel size is out of range."""


class DegenerateProjection(BiplaneRegError):
    """A projection has non-positive depth or a rank-deficient camera."""


class ParallelRays(BiplaneRegError):
    """Two back-projected rays are parallel and define no midpoint."""


class ConstantImage(BiplaneRegError):
    """An image has (numerically) zero variance; correlation is undefined."""


class NoUncontrastedFrame(BiplaneRegError):
    """Reference selection found no uncontrasted frame to choose from."""


class NotWatertight(BiplaneRegError):
    """A mesh fails the closed-surface checks needed for inside tests."""


class OutOfView(BiplaneRegError):
    """A rendered model does not intersect the image at all.

    Optimizers catch this and score the candidate as worst case; it is
    not a fatal condition.
    """


class EmptySearch(BiplaneRegError):
    """The optimizer could not construct a search grid."""


class TooFewPairs(BiplaneRegError):
    """The signed-rank test needs more paired samples."""


class InvalidSpec(BiplaneRegError):
    """A phantom specification is inconsistent."""
