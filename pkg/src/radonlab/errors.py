"""Exception types shared across the package."""


class SupportError(ValueError):
    """A field's support violates the compact-support-in-grid convention."""


class EmptySupportError(ValueError):
    """An operation found no support above threshold."""


class SingularPointError(ValueError):
    """Tangent data requested at a non-smooth point of a center set."""


class SizeCapError(ValueError):
    """A dense-operator request exceeded the configured node cap."""


class CflError(ValueError):
    """Time step violates the stability bound of the wave scheme."""


class CalibrationError(RuntimeError):
    """Formula calibration fit residual too large; indicates a fault."""


class ConfigError(ValueError):
    """Invalid experiment configuration; message cites the offending line."""
