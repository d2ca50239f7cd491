"""Exception hierarchy shared by all modules."""


class OamThermalError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(OamThermalError, ValueError):
    """A physical or numerical parameter is outside its valid range."""


class GridError(OamThermalError, ValueError):
    """Fields or phases live on incompatible grids."""


class TruncationError(OamThermalError):
    """The grid window clips too much of a mode's energy."""


class ResolutionError(OamThermalError):
    """The grid is too coarse for the requested feature."""


class FitError(OamThermalError):
    """The data cannot constrain a thermal fit."""


class DomainError(OamThermalError, ValueError):
    """Distributions have incompatible support."""


class ConfigError(OamThermalError):
    """An experiment configuration is malformed or inconsistent."""
