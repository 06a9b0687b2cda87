"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """A setting, flag, or derived shape is inconsistent with the contract."""


class ProtocolError(ValueError):
    """Dataset cannot support the requested split/evaluation protocol."""


class DataQualityWarning(UserWarning):
    """Non-fatal data problem (e.g. too many outliers in one record)."""
