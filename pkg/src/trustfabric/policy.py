"""
policy.py - APU/DPU policy records and the pure matching logic.

Every function here is a pure function of its arguments. The APU is an
allow-list (a request passes when at least one entry matches), the DPU a
deny-list over write data (a write is dropped when any entry matches).

Address ranges are derived from an address and a mask:

    lo = addr AND NOT(mask)
    hi = addr OR mask

and an address matches when lo <= address <= hi (inclusive). With a
non-contiguous mask the interval is wider than the set of addresses that
agree with `addr` outside the mask bits; the interval is what is checked.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

MASK32 = 0xFFFF_FFFF


def word(value: int, name: str = "value") -> int:
    """Return `value` unchanged if it fits in 32 unsigned bits."""
    if not 0 <= value <= MASK32:
        raise ValueError(f"{name} does not fit in 32 bits: {value:#x}")
    return value


def inv32(value: int) -> int:
    return ~value & MASK32


class AccessKind(enum.Enum):
    READ = "R"
    WRITE = "W"

    @property
    def bit(self) -> int:
        return 0b01 if self is AccessKind.READ else 0b10


class Permission(enum.IntEnum):
    """2-bit APUPERM encoding."""

    RESERVED = 0b00
    RO = 0b01
    WO = 0b10
    RW = 0b11


class Decision(enum.Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class Reason(enum.Enum):
    NONE = "None"
    APU_NO_MATCH = "ApuNoMatch"
    APU_PERMISSION = "ApuPermission"
    DPU_DATA_BLOCKED = "DpuDataBlocked"
    DECODE_ERROR = "DecodeError"


DENIAL_REASONS = tuple(r for r in Reason if r is not Reason.NONE)


@dataclass(frozen=True, slots=True)
class Verdict:
    decision: Decision
    reason: Reason = Reason.NONE

    def __post_init__(self) -> None:
        if (self.decision is Decision.ALLOW) != (self.reason is Reason.NONE):
            raise ValueError(f"inconsistent verdict: {self.decision.value}/{self.reason.value}")

    @property
    def allowed(self) -> bool:
        return self.decision is Decision.ALLOW

    @classmethod
    def deny(cls, reason: Reason) -> "Verdict":
        return cls(Decision.DENY, reason)


ALLOW = Verdict(Decision.ALLOW)


@dataclass(frozen=True, slots=True)
class ApuPolicy:
    mid: int
    addr: int
    mask: int
    perm: Permission

    def __post_init__(self) -> None:
        if self.mid < 0:
            raise ValueError(f"negative master id: {self.mid}")
        word(self.addr, "APUADDR")
        word(self.mask, "APUMASK")

    @property
    def bounds(self) -> tuple[int, int]:
        return range_of(self.addr, self.mask)


@dataclass(frozen=True, slots=True)
class DpuPolicy:
    mid: int
    addr: int
    data: int
    dmask: int
    amask: int

    def __post_init__(self) -> None:
        if self.mid < 0:
            raise ValueError(f"negative master id: {self.mid}")
        word(self.addr, "DPUADDR")
        word(self.data, "DPUDATA")
        word(self.dmask, "DPUDMASK")
        word(self.amask, "DPUAMASK")

    @property
    def bounds(self) -> tuple[int, int]:
        return range_of(self.addr, self.amask)

    @property
    def sensitive_value(self) -> int:
        return self.data & inv32(self.dmask)


def range_of(addr: int, mask: int) -> tuple[int, int]:
    """Return the inclusive (lo, hi) range selected by `addr` and `mask`."""
    return addr & inv32(mask), (addr | mask) & MASK32


def perm_covers(perm: Permission, kind: AccessKind) -> bool:
    if perm is Permission.RESERVED:
        raise ValueError("reserved permission encoding '00' reached the matcher")
    return bool(perm & kind.bit)


def _in_range(addr: int, mask: int, target: int) -> bool:
    lo, hi = range_of(addr, mask)
    return lo <= target <= hi


def apu_match(p: ApuPolicy, mid: int, addr: int, kind: AccessKind) -> bool:
    return p.mid == mid and _in_range(p.addr, p.mask, addr) and perm_covers(p.perm, kind)


def apu_check(prs: Iterable[ApuPolicy], mid: int, addr: int, kind: AccessKind) -> Verdict:
    """Allow iff some entry matches; tell a permission miss apart from a range miss."""
    reason = Reason.APU_NO_MATCH
    for p in prs:
        if p.mid != mid or not _in_range(p.addr, p.mask, addr):
            continue
        if perm_covers(p.perm, kind):
            return ALLOW
        reason = Reason.APU_PERMISSION
    return Verdict.deny(reason)


def dpu_match(p: DpuPolicy, mid: int, addr: int, wdata: int) -> bool:
    keep = inv32(p.dmask)
    return (
        p.mid == mid
        and _in_range(p.addr, p.amask, addr)
        and (wdata & keep) == (p.data & keep)
    )


def dpu_check(prs: Iterable[DpuPolicy], mid: int, addr: int, wdata: int) -> Verdict:
    if any(dpu_match(p, mid, addr, wdata) for p in prs):
        return Verdict.deny(Reason.DPU_DATA_BLOCKED)
    return ALLOW
