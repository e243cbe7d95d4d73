"""
errors.py - exception hierarchy for trustfabric.

Denials on the bus are values (see `policy.Verdict` and
`transmon.BusResponse`); the exceptions here cover malformed input and
misuse of the trusted configuration path.
"""

from __future__ import annotations


class TrustFabricError(Exception):
    """Base class for every error raised by trustfabric."""


class ScenarioError(TrustFabricError, ValueError):
    """A scenario could not be loaded."""


class ParseError(ScenarioError):
    """A scenario file is malformed or fails validation."""

    def __init__(self, line: int, token: str, message: str):
        self.line = line
        self.token = token
        self.message = message
        super().__init__(f"line {line}: {message} (near {token!r})")


class TcuError(TrustFabricError, ValueError):
    """A trusted configuration command was rejected."""


class CapacityExceeded(TcuError):
    pass


class MalformedPolicy(TcuError):
    pass


class AddressUnmapped(TcuError):
    pass


class DecodeError(TrustFabricError, LookupError):
    """No memory map window contains the address."""

    def __init__(self, addr: int):
        self.addr = addr
        super().__init__(f"address 0x{addr:08x} is not mapped")


class FabricStateError(TrustFabricError, RuntimeError):
    """The fabric was driven out of order (e.g. stepped before Start)."""
