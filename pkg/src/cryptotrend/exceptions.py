"""Exception hierarchy. Each top-level family maps to a CLI exit code."""


class CryptoTrendError(Exception):
    """Base class for all package errors."""


class ConfigError(CryptoTrendError):
    """Invalid or incomplete run configuration."""


class DataError(CryptoTrendError):
    """Input data failed parsing or validation."""


class CandleParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PipelineError(CryptoTrendError):
    """The agent pipeline could not produce a complete prediction set."""


class BusError(PipelineError):
    pass


class GatewayError(CryptoTrendError):
    """Scoring backend failure (transport, timeout or malformed output)."""


class BackendTimeout(GatewayError):
    pass


class ResponseParseError(GatewayError):
    pass


class BackendExhausted(GatewayError):
    """All attempts allowed by the retry policy failed."""

    def __init__(self, article_id, attempts, last_error):
        self.article_id = article_id
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(
            f"article {article_id!r}: backend failed after {attempts} attempt(s): {last_error}"
        )


class EvaluationError(CryptoTrendError):
    """Predictions and labels cannot be evaluated together."""
