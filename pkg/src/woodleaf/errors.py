"""Exception hierarchy for the wood/leaf classification library."""


class WoodLeafError(Exception):
    """Base class for every error raised by this library."""


class ParameterError(WoodLeafError, ValueError):
    """A parameter or input value violates its documented contract."""


class CloudFormatError(WoodLeafError, ValueError):
    """A point-cloud or label file failed to parse or validate."""


class EmptyClassError(WoodLeafError, RuntimeError):
    """Density sampling could not produce both a wood and a leaf training set."""
