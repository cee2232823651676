"""Exception types shared across the package."""


class BankfairError(Exception):
    """Base class for all package errors."""


class ConfigError(BankfairError):
    """Invalid configuration or unknown option value."""


class ParseError(BankfairError):
    """Malformed input file; message carries the offending row number."""


class ConsistencyError(BankfairError):
    """Input data contradicts itself (e.g. one item under two providers)."""


class InfeasibleAllocationError(BankfairError):
    """An allocation instance cannot be satisfied.

    Carries the provider index and interval (1-based) when raised from the
    interval loop, so callers can report exactly where a run broke down.
    """

    def __init__(self, message, provider=None, interval=None):
        super().__init__(message)
        self.provider = provider
        self.interval = interval
