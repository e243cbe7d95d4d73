"""
devices.py - trace-driven masters and word-addressed memory slaves.

Masters replay a fixed list of bus transactions, one at a time, and
check each response against the expectation written in the scenario.
Slaves are plain word stores that log every access reaching them; the
log is what the Slave Access Filter tests inspect.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

from .errors import FabricStateError
from .policy import AccessKind, word
from .transmon import BusResponse, ResponseCode, Transaction

logger = logging.getLogger(__name__)


class Expect(enum.Enum):
    OKAY = "OKAY"
    ERROR = "ERROR"
    ANY = "ANY"

    def accepts(self, code: ResponseCode) -> bool:
        if self is Expect.ANY:
            return True
        return (self is Expect.OKAY) == (code is ResponseCode.OKAY)


@dataclass(frozen=True)
class ProgramStep:
    kind: AccessKind
    addr: int
    wdata: Optional[int] = None
    expect: Expect = Expect.ANY
    expect_rdata: Optional[int] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Mismatch:
    mid: int
    step: int
    expected: str
    observed: str

    def __str__(self) -> str:
        return f"mid=0x{self.mid:x} step={self.step}: expected {self.expected}, observed {self.observed}"


@dataclass
class MasterPort:
    """A master's physical port on the fabric. `mid` is the port index."""

    mid: int
    program: tuple[ProgramStep, ...] = ()
    pc: int = 0
    outstanding: Optional[Transaction] = None
    mismatches: list[Mismatch] = field(default_factory=list)
    history: list[tuple[Transaction, BusResponse]] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.outstanding is None and self.pc >= len(self.program)

    @property
    def remaining(self) -> int:
        return len(self.program) - self.pc

    def issue(self, cycle: int) -> Optional[Transaction]:
        if self.outstanding is not None or self.pc >= len(self.program):
            return None
        step = self.program[self.pc]
        self.outstanding = Transaction(
            mid=self.mid,
            kind=step.kind,
            addr=step.addr,
            wdata=step.wdata,
            issue_cycle=cycle,
        )
        return self.outstanding

    def observe(self, response: BusResponse) -> None:
        txn = self.outstanding
        if txn is None:
            raise FabricStateError(f"mid {self.mid:#x}: response without an outstanding transaction")
        step = self.program[self.pc]
        txn.complete_cycle = response.cycle
        self.history.append((txn, response))

        if not step.expect.accepts(response.code):
            self._mismatch(step.expect.value, response.code.value)
        elif (
            step.expect_rdata is not None
            and response.okay
            and response.data != step.expect_rdata
        ):
            self._mismatch(f"RDATA 0x{step.expect_rdata:08x}", f"0x{response.data:08x}")

        self.outstanding = None
        self.pc += 1

    def expire(self) -> None:
        """Close the run: steps never completed fail whatever they expected."""
        for index in range(self.pc, len(self.program)):
            step = self.program[index]
            if step.expect is not Expect.ANY:
                self._mismatch(step.expect.value, "not executed", index)
            elif step.expect_rdata is not None:
                self._mismatch(f"RDATA 0x{step.expect_rdata:08x}", "not executed", index)

    def _mismatch(self, expected: str, observed: str, index: Optional[int] = None) -> None:
        mismatch = Mismatch(self.mid, self.pc if index is None else index, expected, observed)
        logger.warning("expectation mismatch: %s", mismatch)
        self.mismatches.append(mismatch)


def master_next(
    port: MasterPort,
    cycle: int,
    last_response: Optional[BusResponse] = None,
) -> Optional[Transaction]:
    """Feed the last response (if any) to the port and issue its next step."""
    if last_response is not None:
        port.observe(last_response)
    return port.issue(cycle)


@dataclass(frozen=True)
class AccessRecord:
    cycle: int
    kind: AccessKind
    addr: int
    data: int


class SramModel:
    """Zero-initialised word store with an append-only access log."""

    def __init__(self, size: int):
        if size <= 0 or size % 4:
            raise ValueError(f"size must be a positive multiple of 4: {size:#x}")
        self.size = size
        self._words: dict[int, int] = {}
        self.log: list[AccessRecord] = []

    def _check(self, local_addr: int) -> None:
        if local_addr % 4:
            raise ValueError(f"misaligned access at local address {local_addr:#x}")
        if not 0 <= local_addr < self.size:
            raise ValueError(f"local address {local_addr:#x} outside a {self.size:#x}-byte slave")

    def access(self, kind: AccessKind, local_addr: int, wdata: Optional[int], cycle: int) -> int:
        self._check(local_addr)
        if kind is AccessKind.READ:
            data = self._words.get(local_addr, 0)
        else:
            data = word(wdata, "write data")
            self._words[local_addr] = data
        self.log.append(AccessRecord(cycle, kind, local_addr, data))
        return data

    def load(self, local_addr: int, values: list[int]) -> None:
        """Backdoor initialisation for the configuration path; not logged."""
        for i, value in enumerate(values):
            addr = local_addr + 4 * i
            self._check(addr)
            self._words[addr] = word(value)

    def peek(self, local_addr: int) -> int:
        self._check(local_addr)
        return self._words.get(local_addr, 0)

    def snapshot(self) -> dict[int, int]:
        return {a: v for a, v in self._words.items() if v}


def sram_access(model: SramModel, kind: AccessKind, local_addr: int, wdata: Optional[int] = None, cycle: int = 0) -> int:
    return model.access(kind, local_addr, wdata, cycle)


class SharedRegisterSpace(SramModel):
    """The general-purpose register block gpcfg0..gpcfgN-1, one word each."""

    def __init__(self, regs: int = 64):
        super().__init__(regs * 4)
        self.regs = regs

    @staticmethod
    def register_name(index: int) -> str:
        return f"gpcfg{index}"

    def set_register(self, index: int, value: int) -> None:
        if not 0 <= index < self.regs:
            raise ValueError(f"no register gpcfg{index} in a {self.regs}-register block")
        self.load(4 * index, [value])

    def get_register(self, index: int) -> int:
        return self.peek(4 * index)
