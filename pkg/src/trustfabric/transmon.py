"""
transmon.py - the per-slave transaction monitor.

A TRANSMON sits between the bus matrix and one slave. It runs the APU
check in the address phase, holds writes for one extra cycle so the DPU
can inspect the write data, and drives the Slave Access Filter: allowed
accesses reach the slave, denied ones are dropped and answered with an
Error response for the initiating master only.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .errors import CapacityExceeded, FabricStateError, MalformedPolicy
from .policy import (
    AccessKind,
    ApuPolicy,
    DpuPolicy,
    Permission,
    Reason,
    Verdict,
    apu_check,
    dpu_check,
    word,
)

logger = logging.getLogger(__name__)


class ResponseCode(enum.Enum):
    OKAY = "OKAY"
    ERROR = "ERR"


@dataclass(slots=True)
class Transaction:
    mid: int
    kind: AccessKind
    addr: int
    wdata: Optional[int] = None
    issue_cycle: int = 0
    complete_cycle: Optional[int] = None

    def __post_init__(self) -> None:
        word(self.addr, "address")
        if (self.kind is AccessKind.WRITE) != (self.wdata is not None):
            raise ValueError("write data must be present exactly for writes")
        if self.wdata is not None:
            word(self.wdata, "write data")


@dataclass(frozen=True, slots=True)
class BusResponse:
    code: ResponseCode
    reason: Reason
    cycle: int
    data: int = 0

    def __post_init__(self) -> None:
        if (self.code is ResponseCode.OKAY) != (self.reason is Reason.NONE):
            raise ValueError(f"inconsistent response: {self.code.value}/{self.reason.value}")

    @property
    def okay(self) -> bool:
        return self.code is ResponseCode.OKAY


@dataclass(frozen=True, slots=True)
class PendingWrite:
    """Address/control of an APU-approved write, registered for the DPU cycle."""

    txn: Transaction
    registered_cycle: int


class SlaveDevice(Protocol):
    def access(self, kind: AccessKind, local_addr: int, wdata: Optional[int], cycle: int) -> int: ...


@dataclass
class PolicyRegisterSpace:
    slave_id: int
    apu_capacity: int = 16
    dpu_capacity: int = 16
    apu_entries: list[ApuPolicy] = field(default_factory=list)
    dpu_entries: list[DpuPolicy] = field(default_factory=list)

    def load_apu(self, policy: ApuPolicy) -> None:
        if policy.perm is Permission.RESERVED:
            raise MalformedPolicy(f"slave {self.slave_id}: APU permission '00' is reserved")
        if len(self.apu_entries) >= self.apu_capacity:
            raise CapacityExceeded(
                f"slave {self.slave_id}: APU PRS holds at most {self.apu_capacity} entries"
            )
        self.apu_entries.append(policy)

    def load_dpu(self, policy: DpuPolicy) -> None:
        if len(self.dpu_entries) >= self.dpu_capacity:
            raise CapacityExceeded(
                f"slave {self.slave_id}: DPU PRS holds at most {self.dpu_capacity} entries"
            )
        self.dpu_entries.append(policy)


def check_address_phase(prs: PolicyRegisterSpace, txn: Transaction) -> Verdict:
    return apu_check(prs.apu_entries, txn.mid, txn.addr, txn.kind)


def check_data_phase(prs: PolicyRegisterSpace, pw: PendingWrite, wdata: int) -> Verdict:
    return dpu_check(prs.dpu_entries, pw.txn.mid, pw.txn.addr, wdata)


def filter_and_respond(
    verdict: Verdict,
    txn: Transaction,
    slave: SlaveDevice,
    base: int,
    cycle: int,
    respond_at: int,
) -> BusResponse:
    """
    Gate the access and build the response for the initiating master.

    `cycle` is when the slave is touched, `respond_at` when the master
    sees the response. A denied access never reaches the slave; a denied
    read carries all-zero data.
    """
    if not verdict.allowed:
        return BusResponse(ResponseCode.ERROR, verdict.reason, respond_at)

    data = slave.access(txn.kind, txn.addr - base, txn.wdata, cycle)
    return BusResponse(ResponseCode.OKAY, Reason.NONE, respond_at, data)


class TransactionMonitor:
    """One TRANSMON: PRS + phase sequencing in front of a single slave."""

    # Cycles from the deciding phase to the response reaching the master.
    RESPONSE_DELAY = 2

    def __init__(self, prs: PolicyRegisterSpace, slave: SlaveDevice, base: int):
        self.prs = prs
        self.slave = slave
        self.base = base
        self.pending: Optional[PendingWrite] = None

    @property
    def slave_id(self) -> int:
        return self.prs.slave_id

    def address_phase(self, txn: Transaction, cycle: int) -> Optional[BusResponse]:
        """
        Run the APU check for a freshly granted transaction.

        Returns the response when the transaction is decided here (every
        read, and writes the APU denies). Approved writes are registered
        and decided by `data_phase` in the next cycle.
        """
        verdict = check_address_phase(self.prs, txn)
        logger.debug(
            "cycle %d slave %d: address phase mid=%#x %s %#010x -> %s",
            cycle, self.slave_id, txn.mid, txn.kind.value, txn.addr, verdict.reason.value,
        )
        if txn.kind is AccessKind.WRITE and verdict.allowed:
            if self.pending is not None:
                raise FabricStateError(f"slave {self.slave_id}: data phase already occupied")
            self.pending = PendingWrite(txn, cycle)
            return None
        return filter_and_respond(verdict, txn, self.slave, self.base, cycle, cycle + self.RESPONSE_DELAY)

    def data_phase(self, cycle: int) -> Optional[tuple[Transaction, BusResponse]]:
        """Resolve the write registered in the previous cycle, if any."""
        pw = self.pending
        if pw is None:
            return None
        if pw.registered_cycle != cycle - 1:
            raise FabricStateError(f"slave {self.slave_id}: pending write held for more than one cycle")
        self.pending = None

        verdict = check_data_phase(self.prs, pw, pw.txn.wdata)
        logger.debug(
            "cycle %d slave %d: data phase mid=%#x %#010x data=%#010x -> %s",
            cycle, self.slave_id, pw.txn.mid, pw.txn.addr, pw.txn.wdata, verdict.reason.value,
        )
        response = filter_and_respond(verdict, pw.txn, self.slave, self.base, cycle, cycle + self.RESPONSE_DELAY)
        return pw.txn, response
