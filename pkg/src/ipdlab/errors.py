"""Exception taxonomy shared across the package.

Errors that cross module boundaries (an agent failing mid-match surfaces in
the tournament report; a bad payoff ordering surfaces as a CLI exit code)
live here so every layer raises and catches the same types.
"""

from __future__ import annotations


class IpdLabError(Exception):
    """Base class for all package-specific errors."""


class OrderingViolation(IpdLabError):
    """Payoff values do not satisfy the required strict inequalities."""

    def __init__(self, inequality: str, message: str | None = None):
        self.inequality = inequality
        super().__init__(message or f"payoff ordering violated: {inequality}")


class UnknownStrategy(IpdLabError):
    """Strategy name not present in the catalog."""


class InvalidParams(IpdLabError):
    """Strategy parameters failed validation."""


class UnknownPlayer(IpdLabError):
    """Player id does not participate in the given records."""


class AgentFailure(IpdLabError):
    """An external agent violated the protocol, timed out, or exhausted retries.

    Carries the partial match record when the failure aborted a running match.
    """

    def __init__(self, message: str, partial_record=None, raw: str | None = None):
        super().__init__(message)
        self.partial_record = partial_record
        self.raw = raw


class UnparseableResponse(IpdLabError):
    """No recognizable action token in an agent's response text."""

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no action token found in response: {raw[:120]!r}")


class TemplateError(IpdLabError):
    """Prompt template contains an unresolved or unknown placeholder."""


class InsufficientData(IpdLabError):
    """Not enough records to build the requested aggregate."""


class NoConvergence(IpdLabError):
    """Power iteration failed to converge within the iteration budget."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class MissingSwitchMetadata(IpdLabError):
    """Records lack a consistent switch_round metadata entry."""


class InsufficientRounds(IpdLabError):
    """Switch round too close to the match boundary for one full window."""


class MixedHorizons(IpdLabError):
    """Operation requires all records to share one fixed horizon."""


class MissingSeries(IpdLabError):
    """The result does not contain the series this plot kind requires."""


class ConfigError(IpdLabError):
    """Invalid experiment, session, or CLI configuration."""


class PersistenceError(IpdLabError):
    """Run directory could not be read or written."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"{message} (line {line})")


class SchemaVersionMismatch(IpdLabError):
    """Persisted file carries a schema version this reader does not support."""

    def __init__(self, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(f"schema version {found} not supported (reader supports {supported})")


class SessionNotFound(IpdLabError):
    """No live or persisted session with the given id."""


class WrongRound(IpdLabError):
    """Move submitted for a round that is not the pending one."""


class SessionFinished(IpdLabError):
    """Move submitted to a session that already ended."""


class SessionStillActive(IpdLabError):
    """Finalize requested while the session is still awaiting moves."""
