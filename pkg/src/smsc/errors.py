"""Exception types shared across the cell runtime and simulator."""

from __future__ import annotations


class SmscError(Exception):
    """Base class for all errors raised by this package."""


# --- message bus ---------------------------------------------------------

class MalformedTopic(SmscError):
    pass


class MalformedFilter(SmscError):
    pass


class ClockRegression(SmscError):
    pass


class DuplicateSubscription(SmscError):
    pass


class UnknownSubscriber(SmscError):
    pass


# --- policy engine and tokens -------------------------------------------

class PolicyError(SmscError):
    pass


class DuplicateRuleId(PolicyError):
    pass


class TokenVerificationError(PolicyError):
    """Base for the three token checks; the subclass names which failed."""


class UntrustedIssuer(TokenVerificationError):
    pass


class Expired(TokenVerificationError):
    pass


class BadSignature(TokenVerificationError):
    """Digest mismatch on a token or an update package."""


# --- governance ----------------------------------------------------------

class UnknownAttributeDomain(SmscError):
    pass


class MalformedUpdate(SmscError):
    pass


# --- catalogue and discovery ---------------------------------------------

class SelfRegistration(SmscError):
    pass


class TrustedQueryWithoutContext(SmscError):
    pass


# --- cell ----------------------------------------------------------------

class MalformedCommand(SmscError):
    pass


class UnknownResourceKind(SmscError):
    pass


# --- scenario loading and simulation --------------------------------------

class ParseError(SmscError):
    """Scenario, policy, or request document failed validation.

    The message names the offending field.
    """


class UnknownCellRef(ParseError):
    pass


class InvalidProbability(ParseError):
    pass


class UnknownLink(SmscError):
    pass


class UnknownCell(SmscError):
    pass
