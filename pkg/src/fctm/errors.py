"""Exception hierarchy.

Every failure raised by the library derives from :class:`FcmError`, so callers
(and the CLI) can catch one type. Subclasses also derive from the closest
builtin where that helps ordinary Python code.
"""


class FcmError(Exception):
    """Base class for all library errors."""


# -- feature files / tensors -------------------------------------------------

class FormatError(FcmError, ValueError):
    """A byte stream (feature file or container) is not well formed."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class Truncated(FormatError):
    """Input ended before a complete structure could be read."""


class TruncatedFile(Truncated):
    pass


class ShapeMismatch(FcmError, ValueError):
    pass


class NonFiniteValue(FcmError, ValueError):
    pass


class EmptySequence(FcmError, ValueError):
    pass


class EmptyLayer(FcmError, ValueError):
    pass


class EmptyTensor(FcmError, ValueError):
    pass


# -- temporal / transform / channel adjustment -------------------------------

class PlanMismatch(FcmError, ValueError):
    pass


class NonDyadicPyramid(FcmError, ValueError):
    pass


class IdentityWithMultipleLayers(FcmError, ValueError):
    pass


class TargetChannelsTooLarge(FcmError, ValueError):
    pass


class SideInfoMismatch(FcmError, ValueError):
    pass


class InvalidAlpha(FcmError, ValueError):
    pass


class LengthMismatch(FcmError, ValueError):
    pass


class LayoutMismatch(FcmError, ValueError):
    pass


# -- inner codec -------------------------------------------------------------

class CodecError(FcmError):
    pass


class EmptyInput(CodecError, ValueError):
    pass


class CorruptPayload(CodecError, ValueError):
    pass


class ExternalCodecFailure(CodecError, RuntimeError):
    pass


class OddByteLength(CodecError, ValueError):
    pass


class SampleOutOfRange(CodecError, ValueError):
    pass


# -- container ---------------------------------------------------------------

class BitstreamError(FormatError):
    pass


class OverlongLength(BitstreamError):
    pass


class InconsistentRecordCount(BitstreamError):
    pass


class MalformedRecord(BitstreamError):
    pass


# -- evaluation / config -----------------------------------------------------

class EvalError(FcmError, ValueError):
    pass


class TooFewPoints(EvalError):
    pass


class NoQualityOverlap(EvalError):
    pass


class ZeroTiming(EvalError):
    pass


class ConfigError(FcmError, ValueError):
    pass
