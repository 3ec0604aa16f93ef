"""Exception types shared across the toolkit."""


class ConfigurationError(ValueError):
    """Invalid model or experiment configuration (bad law parameters,
    dimension mismatches, unachievable calibration targets)."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation, e.g. an
    arrival rate vector outside the stability region."""


class TraceOrderError(RuntimeError):
    """Step records fed to a sequential consumer out of slot order."""
