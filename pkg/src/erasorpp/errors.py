"""Exception types raised across the package."""


class ErasorError(Exception):
    """Base class for every error raised by erasorpp."""


class InvalidPose(ErasorError):
    pass


class MalformedScan(ErasorError):
    pass


class LabelCountMismatch(ErasorError):
    pass


class MalformedPoseLine(ErasorError):
    pass


class OutOfVoi(ErasorError):
    """A point lies outside the volume of interest it is being binned into."""


class NotComparable(ErasorError):
    """Scan and map bins cannot be compared by the ratio test."""


class ParamMismatch(ErasorError):
    pass


class DegeneratePlane(ErasorError):
    pass


class EmptyGroundTruth(ErasorError):
    pass


class ConfigError(ErasorError):
    pass
