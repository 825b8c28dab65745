"""Exception hierarchy shared by all bvpseg modules."""


class BVPError(Exception):
    """Base class for data errors raised by bvpseg."""


class InvalidConfig(BVPError, ValueError):
    pass


class ParseError(BVPError, ValueError):
    pass


class MissingHeader(ParseError):
    pass


class EmptySignal(BVPError, ValueError):
    pass


class IncrementOutOfRange(BVPError, ValueError):
    pass


class ConfigExceedsSignal(BVPError, ValueError):
    pass


class CutoffAboveNyquist(BVPError, ValueError):
    pass


class LengthMismatch(BVPError, ValueError):
    pass


class InvalidBand(BVPError, ValueError):
    pass


class UnsupportedOrder(BVPError, ValueError):
    pass


class SampleRateMismatch(BVPError, ValueError):
    pass


class SegmentTooShort(BVPError, ValueError):
    pass


class FrequencyOutOfRange(BVPError, ValueError):
    pass


class SignalTooShort(BVPError, ValueError):
    pass


class KeyMismatch(BVPError, KeyError):
    pass


class TooShort(BVPError, ValueError):
    pass


class ZeroVariance(BVPError, ValueError):
    pass


class NoValidSegments(BVPError):
    """Every candidate segment was rejected; the observation is missing."""


class TargetOutOfRange(BVPError, ValueError):
    pass


class TooFewPairs(BVPError, ValueError):
    pass


class InvalidAlpha(BVPError, ValueError):
    pass
