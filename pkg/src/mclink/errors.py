"""Exception hierarchy shared by all simulator modules.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical degeneracies (zero pilot energy, singular training,
undefined ratios) exit with 3.
"""


class McLinkError(Exception):
    """Base class for all simulator errors."""


class ConfigError(McLinkError):
    """Invalid or inconsistent configuration values."""


class BoundsError(McLinkError):
    """A trace or window does not cover the requested time span."""


class DegenerateDataError(McLinkError):
    """Data renders a quantity undefined (zero energy, zero ratio base, ...)."""


class SingularTrainingError(DegenerateDataError):
    """Equalizer training hit a singular normal matrix; a nonzero ridge is needed."""
