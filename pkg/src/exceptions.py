"""Exception hierarchy for the commitment simulator"""


class QBSCError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QBSCError, ValueError):
    """A parameter lies outside the domain an operation is defined on."""


class ProtocolOrderError(QBSCError):
    """A protocol message arrived in the wrong phase or out of order."""


class MessageDecodeError(QBSCError, ValueError):
    """Wire bytes or a transcript line could not be decoded."""


class ConfigError(QBSCError):
    """Configuration file or environment value is invalid."""
