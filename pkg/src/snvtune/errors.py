"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and input problems exit
with 2, runtime range/domain violations with 3.
"""


class SnvTuneError(Exception):
    """Base class for all package errors."""


class ConfigError(SnvTuneError):
    """A configuration file or run setup failed validation."""


class InputError(SnvTuneError):
    """An operation received data that violates its preconditions."""


class ContractError(SnvTuneError):
    """An internal contract was violated (frame mismatch, bad rotation)."""


class RangeError(SnvTuneError):
    """A physical quantity is outside its safe operating range."""


class DomainError(SnvTuneError):
    """A spatial coordinate lies outside the modeled geometry."""
