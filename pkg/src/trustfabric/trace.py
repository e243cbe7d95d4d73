"""
trace.py - trace events, run reports and golden trace comparison.

One trace line per delivered response:

    cycle=6 slave=0 mid=0x1 op=R addr=0x2000f800 data=0x00000000 resp=ERR reason=ApuNoMatch

Lines are sorted by (cycle, slave, mid). Transactions that decode to no
slave carry `slave=-1`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .devices import Mismatch
from .policy import DENIAL_REASONS, AccessKind, Reason
from .transmon import BusResponse, ResponseCode, Transaction

DECODE_SLAVE = -1


@dataclass(frozen=True, slots=True)
class TraceEvent:
    cycle: int
    slave_id: int
    mid: int
    kind: AccessKind
    addr: int
    data: int
    code: ResponseCode
    reason: Reason

    @classmethod
    def from_response(cls, slave_id: int, txn: Transaction, response: BusResponse) -> "TraceEvent":
        data = txn.wdata if txn.kind is AccessKind.WRITE else response.data
        return cls(
            cycle=response.cycle,
            slave_id=slave_id,
            mid=txn.mid,
            kind=txn.kind,
            addr=txn.addr,
            data=data,
            code=response.code,
            reason=response.reason,
        )

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return self.cycle, self.slave_id, self.mid

    def __str__(self) -> str:
        return (
            f"cycle={self.cycle} slave={self.slave_id} mid=0x{self.mid:x} "
            f"op={self.kind.value} addr=0x{self.addr:08x} data=0x{self.data:08x} "
            f"resp={self.code.value} reason={self.reason.value}"
        )


def render_trace(events: Iterable[TraceEvent]) -> str:
    return "".join(f"{event}\n" for event in events)


def write_trace(events: Iterable[TraceEvent], path: Path) -> None:
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(render_trace(events))


@dataclass(frozen=True)
class TraceMismatch:
    line: int
    expected: str | None
    actual: str | None

    def __str__(self) -> str:
        return f"line {self.line}: expected {self.expected!r}, got {self.actual!r}"


def compare_traces(expected: Sequence[str], actual: Sequence[str]) -> list[TraceMismatch]:
    """Compare two traces line by line; a length difference shows up as None entries."""
    mismatches: list[TraceMismatch] = []
    for i in range(max(len(expected), len(actual))):
        exp = expected[i].rstrip("\n") if i < len(expected) else None
        act = actual[i].rstrip("\n") if i < len(actual) else None
        if exp != act:
            mismatches.append(TraceMismatch(i + 1, exp, act))
    return mismatches


@dataclass
class RunReport:
    scenario: str
    total: int = 0
    allowed: int = 0
    denied_by_reason: dict[Reason, int] = field(default_factory=lambda: {r: 0 for r in DENIAL_REASONS})
    mismatches: list[Mismatch] = field(default_factory=list)
    unfinished: int = 0
    final_cycle: int = 0

    @classmethod
    def from_events(
        cls,
        scenario: str,
        events: Iterable[TraceEvent],
        mismatches: Iterable[Mismatch] = (),
        unfinished: int = 0,
        final_cycle: int = 0,
    ) -> "RunReport":
        report = cls(scenario, mismatches=list(mismatches), unfinished=unfinished, final_cycle=final_cycle)
        for event in events:
            report.total += 1
            if event.code is ResponseCode.OKAY:
                report.allowed += 1
            else:
                report.denied_by_reason[event.reason] += 1
        return report

    @property
    def denied(self) -> int:
        return sum(self.denied_by_reason.values())

    @property
    def exit_code(self) -> int:
        return 0 if not self.mismatches else 1

    def lines(self) -> list[str]:
        out = [
            f"scenario: {self.scenario}",
            f"total: {self.total}",
            f"allowed: {self.allowed}",
            f"denied: {self.denied}",
        ]
        out += [f"denied.{reason.value}: {self.denied_by_reason[reason]}" for reason in DENIAL_REASONS]
        out += [
            f"mismatches: {len(self.mismatches)}",
            f"unfinished: {self.unfinished}",
            f"final_cycle: {self.final_cycle}",
        ]
        out += [f"  mismatch {m}" for m in self.mismatches]
        return out

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"
