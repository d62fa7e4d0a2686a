"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or incomplete configuration (maps to CLI exit code 1)."""


class FormatError(ValueError):
    """Malformed input file."""


class ChecksumError(RuntimeError):
    """A stored row does not match its recorded checksum."""


class OracleError(RuntimeError):
    """The quadrature likelihood oracle did not converge."""


class TrainingError(RuntimeError):
    """A model fit diverged (non-finite loss or parameters)."""


class PredictiveFailure(RuntimeError):
    """A posterior could not be turned into predictive draws."""
