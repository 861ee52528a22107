"""Exception types shared across the toolkit."""

from __future__ import annotations

__all__ = [
    "SemrelError",
    "OddLengthError",
    "NonHexCharacterError",
    "NetworkError",
    "RpcError",
    "EmptyCodeError",
    "ParseError",
    "DuplicateIdError",
    "MissingFileError",
    "SchemaError",
    "UnknownOpcodeError",
    "MissingTimestampError",
    "EmptyGraphError",
]


class SemrelError(Exception):
    """Base class for all toolkit errors."""


class OddLengthError(SemrelError, ValueError):
    """Hex input with an odd number of nibbles."""


class NonHexCharacterError(SemrelError, ValueError):
    """Hex input containing a character outside [0-9a-fA-F]."""


class NetworkError(SemrelError):
    """Transport-level failure talking to a node endpoint."""


class RpcError(SemrelError):
    """JSON-RPC level error returned by the node."""

    def __init__(self, code: int, message: str):
        super().__init__(f"RPC error {code}: {message}")
        self.code = code
        self.message = message


class EmptyCodeError(SemrelError):
    """The queried account has no code (externally owned account)."""


class ParseError(SemrelError, ValueError):
    """Malformed manifest content."""


class DuplicateIdError(ParseError):
    """Manifest contains the same contract id twice."""


class MissingFileError(SemrelError, FileNotFoundError):
    """A referenced file does not exist."""


class SchemaError(SemrelError, ValueError):
    """Serialized graph violates the JSON schema.

    ``path`` points at the offending field, e.g. ``edges[3].src``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownOpcodeError(SemrelError, KeyError):
    """A node opcode is missing from the encoding vocabulary."""


class MissingTimestampError(SemrelError, ValueError):
    """Age-ordered split requested but a record lacks a timestamp."""


class EmptyGraphError(SemrelError, ValueError):
    """Statistics requested for a graph with no nodes."""
