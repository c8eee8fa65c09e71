"""Exception types shared across the engine.

``DomainError`` subclasses abort the enclosing transaction; the engine
guarantees no state change when one escapes a handler. Everything else
signals malformed artifacts (files, metadata documents, event logs) and
is raised outside transaction scope.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EngineError):
    """A rejected state transition. Transactions fail atomically with these."""


# -- content store ------------------------------------------------------------

class NotFound(DomainError):
    pass


# -- ledger --------------------------------------------------------------------

class ClockRegression(DomainError):
    pass


class InsufficientFunds(DomainError):
    pass


class InvalidParams(DomainError):
    """Transaction parameters missing, extraneous or of the wrong shape."""


class CorruptLog(EngineError):
    """Event log has sequence gaps or undecodable records."""


# -- registry ------------------------------------------------------------------

class DuplicateContent(DomainError):
    """The content id is already claimed; only exact copies collide."""


class UnknownContent(DomainError):
    pass


class UnknownManifestation(DomainError):
    pass


class VerificationFailed(DomainError):
    """Fetched asset description does not contain the claim's content id."""


class OracleUnavailable(DomainError):
    pass


# -- tokenomics ------------------------------------------------------------------

class ZeroAmount(DomainError):
    pass


class UnknownTarget(DomainError):
    pass


class TargetResolved(DomainError):
    pass


class InsufficientStake(DomainError):
    pass


class ConflictPending(DomainError):
    """Stakes are locked while a complaint on the target is unresolved."""


class UnknownComplaint(DomainError):
    pass


class AlreadyDefeated(DomainError):
    pass


class BeforeDeadline(DomainError):
    pass


class AlreadyResolved(DomainError):
    pass


class PendingAppeal(DomainError):
    pass


class AfterDeadline(DomainError):
    pass


class NotAParty(DomainError):
    pass


class AlreadyAppealed(DomainError):
    pass


class NotAppealed(DomainError):
    pass


# -- licensing -------------------------------------------------------------------

class NotClaimant(DomainError):
    pass


class NoStake(DomainError):
    pass


class GracePeriodActive(DomainError):
    pass


class MonetizationBlocked(DomainError):
    pass


class NotOwner(DomainError):
    pass


class UnknownToken(DomainError):
    pass


class InvalidTerms(DomainError):
    pass


class MalformedMetadata(EngineError):
    """License metadata document cannot be decoded; message carries position."""


class MissingField(MalformedMetadata):
    def __init__(self, field: str):
        super().__init__(f"missing required field {field!r}")
        self.field = field


# -- rights ------------------------------------------------------------------------

class CyclicContainment(EngineError):
    pass


class MalformedGeometry(EngineError):
    pass


class UnknownParcel(EngineError):
    pass


class WorldNotLoaded(EngineError):
    pass


# -- scenario / world files ----------------------------------------------------------

class ParseError(EngineError):
    """Structured text file rejected; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
