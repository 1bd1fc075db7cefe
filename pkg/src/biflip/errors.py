"""Domain errors with stable names.

The ``name`` attribute is part of the external contract: the CLI prints it
on the diagnostic stream and the HTTP service returns it verbatim in error
payloads, so client code can match on it.
"""


class BiflipError(Exception):
    name = "BiflipError"

    @property
    def message(self) -> str:
        return str(self)


class SpaceMismatch(BiflipError):
    name = "SpaceMismatch"


class UnsupportedSpace(BiflipError):
    name = "UnsupportedSpace"


class DegenerateRestriction(BiflipError):
    name = "DegenerateRestriction"


class OutOfDomain(BiflipError):
    name = "OutOfDomain"


class InvalidFlipper(BiflipError):
    name = "InvalidFlipper"


class NotInvolution(BiflipError):
    name = "NotInvolution"


class EmptyFixedSet(BiflipError):
    name = "EmptyFixedSet"


class NotCommuting(BiflipError):
    name = "NotCommuting"


class NotInCentralizer(BiflipError):
    name = "NotInCentralizer"


class NotCompatible(BiflipError):
    name = "NotCompatible"


class NotLinked(BiflipError):
    name = "NotLinked"


class IdentityHasNoPencil(BiflipError):
    name = "IdentityHasNoPencil"


class NonEuclideanFactor(BiflipError):
    name = "NonEuclideanFactor"


class WrongFlipperKind(BiflipError):
    name = "WrongFlipperKind"


class NotPerpendicular(BiflipError):
    name = "NotPerpendicular"


class NonUnit(BiflipError):
    name = "NonUnit"


class NotDecomposable(BiflipError):
    name = "NotDecomposable"


class DegenerateAxes(BiflipError):
    name = "DegenerateAxes"


class MalformedScene(BiflipError):
    name = "MalformedScene"
