"""Exception hierarchy shared by every stage of the generator."""


class EcgSynthError(Exception):
    """Base class for all errors raised by ecgsynth."""


# ingest
class MalformedHeader(EcgSynthError):
    pass


class UnsupportedFormat(EcgSynthError):
    pass


class LengthMismatch(EcgSynthError):
    pass


class InvalidLead(EcgSynthError):
    pass


class MissingColumn(EcgSynthError):
    pass


class UnparseableRow(EcgSynthError):
    pass


class InvalidFold(EcgSynthError):
    pass


# dsp
class InvalidBand(EcgSynthError):
    pass


class UnstableResult(EcgSynthError):
    pass


class TooShort(EcgSynthError):
    pass


class NonFiniteInput(EcgSynthError):
    pass


class ZeroVariance(EcgSynthError):
    pass


# geometry
class NonPositiveWidth(EcgSynthError):
    pass


class LayoutOverflow(EcgSynthError):
    pass


# render
class PathOutOfBounds(EcgSynthError):
    pass


class UnsupportedGlyph(EcgSynthError):
    pass


class EmptyText(EcgSynthError):
    pass


class AmplitudeOverflow(EcgSynthError):
    """More than the tolerated fraction of a lead's samples had to be clipped."""


# annotate
class DegenerateBox(EcgSynthError):
    pass


class CountMismatch(EcgSynthError):
    pass


class ShapeMismatch(EcgSynthError):
    pass


class NonFinite(EcgSynthError):
    pass


# pipeline
class ConfigSyntaxError(EcgSynthError):
    pass


class UnknownKey(EcgSynthError):
    pass


class DomainViolation(EcgSynthError):
    pass


# validate
class EmptyLead(EcgSynthError):
    pass


class ConstantSeries(EcgSynthError):
    pass


class MissingArtifact(EcgSynthError):
    pass


class UnknownKind(EcgSynthError):
    pass
