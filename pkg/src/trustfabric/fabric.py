"""
fabric.py - the interposer bus matrix.

The fabric owns everything inside the root of trust: the memory map and
decoder, one round-robin arbiter and one TRANSMON per slave, the shared
register space, and the trusted configuration path (TCU commands). It
drives the global cycle loop.

Timing, per transaction granted at cycle g:

    read, or write denied by the APU   -> response at g + 2
    write reaching the DPU             -> response at g + 3
    address that decodes to no slave   -> response at issue + 2

Within one cycle the loop runs: scheduled TCU commands, response
delivery, DPU data phases of writes registered in the previous cycle,
request issue by idle masters, then per-slave arbitration and APU
address phases.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional, Union

from .config import SRS_BASE, SRS_REGS, SRAM_SIZE, Topology
from .devices import MasterPort, ProgramStep, SharedRegisterSpace, SramModel, master_next
from .errors import AddressUnmapped, DecodeError, FabricStateError, MalformedPolicy, TcuError
from .policy import ApuPolicy, DpuPolicy, Reason
from .trace import DECODE_SLAVE, TraceEvent
from .transmon import (
    BusResponse,
    PolicyRegisterSpace,
    ResponseCode,
    Transaction,
    TransactionMonitor,
)

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------- #
# Memory map
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class Window:
    slave_id: int
    base: int
    size: int

    @property
    def hi(self) -> int:
        return self.base + self.size - 1

    def contains(self, addr: int) -> bool:
        return self.base <= addr <= self.hi

    def overlaps(self, other: "Window") -> bool:
        return self.base <= other.hi and other.base <= self.hi

    def __str__(self) -> str:
        return f"slave {self.slave_id} [0x{self.base:08x}, 0x{self.hi:08x}]"


@dataclass(frozen=True)
class MemoryMap:
    windows: tuple[Window, ...]
    srs: Window

    @classmethod
    def default(cls, topology: Topology, srs_base: int = SRS_BASE, srs_regs: int = SRS_REGS) -> "MemoryMap":
        windows = tuple(
            Window(i, topology.default_sram_base(i), SRAM_SIZE) for i in range(topology.num_slaves)
        )
        return cls(windows, Window(topology.srs_slave_id, srs_base, srs_regs * 4))

    @property
    def all_windows(self) -> tuple[Window, ...]:
        return self.windows + (self.srs,)

    @property
    def srs_regs(self) -> int:
        return self.srs.size // 4

    def window(self, slave_id: int) -> Window:
        for w in self.all_windows:
            if w.slave_id == slave_id:
                return w
        raise KeyError(f"no slave {slave_id} in the memory map")

    def locate(self, addr: int) -> Window:
        for w in self.all_windows:
            if w.contains(addr):
                return w
        raise DecodeError(addr)

    def decode(self, addr: int) -> int:
        """Return the slave id whose window holds `addr`; raise DecodeError otherwise."""
        return self.locate(addr).slave_id

    def register_index(self, addr: int) -> int:
        """Index n of the SRS register gpcfg<n> at `addr`."""
        if not self.srs.contains(addr):
            raise DecodeError(addr)
        return (addr - self.srs.base) // 4

    def intersecting(self, lo: int, hi: int) -> list[tuple[Window, int, int]]:
        """Every window touching [lo, hi], with the range clipped to it."""
        hits = []
        for w in sorted(self.all_windows, key=lambda w: w.base):
            if w.base <= hi and lo <= w.hi:
                hits.append((w, max(lo, w.base), min(hi, w.hi)))
        return hits

    def overlapping_pairs(self) -> list[tuple[Window, Window]]:
        ws = self.all_windows
        return [(a, b) for i, a in enumerate(ws) for b in ws[i + 1:] if a.overlaps(b)]


# --------------------------------------------------------------------- #
# Trusted configuration unit commands
# --------------------------------------------------------------------- #
@dataclass(frozen=True)
class LoadApu:
    slave: Optional[int]  # None: every window the range touches
    policy: ApuPolicy
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LoadDpu:
    slave: Optional[int]
    policy: DpuPolicy
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LoadMem:
    addr: int
    words: tuple[int, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SetSrs:
    reg: int
    value: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Start:
    line: int = field(default=0, compare=False)


TcuCommand = Union[LoadApu, LoadDpu, LoadMem, SetSrs, Start]


@dataclass(frozen=True)
class Scheduled:
    cycle: int
    command: TcuCommand


# --------------------------------------------------------------------- #
# Arbitration
# --------------------------------------------------------------------- #
@dataclass
class ArbiterState:
    num_masters: int
    pointers: dict[int, int] = field(default_factory=dict)

    def pointer(self, slave_id: int) -> int:
        return self.pointers.get(slave_id, 0)


def arbitrate(requests: Iterable[int], state: ArbiterState, slave_id: int) -> int:
    """Grant the first requester at or after the slave's round-robin pointer."""
    requests = set(requests)
    if not requests:
        raise ValueError("arbitrate() needs at least one request")
    n = state.num_masters
    start = state.pointer(slave_id)
    granted = min(requests, key=lambda mid: (mid - start) % n)
    state.pointers[slave_id] = (granted + 1) % n
    return granted


# --------------------------------------------------------------------- #
# The fabric
# --------------------------------------------------------------------- #
class Fabric:
    def __init__(self, topology: Topology, memory_map: MemoryMap):
        self.topology = topology
        self.memory_map = memory_map
        self.arbiter = ArbiterState(topology.num_masters)
        self.devices: dict[int, SramModel] = {}
        self.monitors: dict[int, TransactionMonitor] = {}

        for w in memory_map.windows:
            self.devices[w.slave_id] = SramModel(w.size)
        self.srs = SharedRegisterSpace(memory_map.srs_regs)
        self.devices[memory_map.srs.slave_id] = self.srs

        for w in memory_map.all_windows:
            prs = PolicyRegisterSpace(w.slave_id, topology.prs_apu, topology.prs_dpu)
            self.monitors[w.slave_id] = TransactionMonitor(prs, self.devices[w.slave_id], w.base)

        self.ports: dict[int, MasterPort] = {}
        self.cycle = 0
        self.started = False
        self.events: list[TraceEvent] = []
        self._scheduled: dict[int, list[TcuCommand]] = defaultdict(list)
        self._queues: dict[int, list[Transaction]] = defaultdict(list)
        self._inflight: dict[int, list[tuple[int, Transaction, BusResponse]]] = defaultdict(list)

    @classmethod
    def from_scenario(cls, scenario: "Scenario") -> "Fabric":
        """Build the system and run the scenario's setup commands; Start is left to the caller."""
        fabric = cls(scenario.topology, scenario.memory_map)
        for cmd in scenario.setup:
            fabric.tcu_execute(cmd)
        for item in scenario.reconfigurations:
            fabric.schedule(item.cycle, item.command)
        for mid, program in scenario.programs.items():
            fabric.attach_program(mid, program)
        return fabric

    # ----------------------------------------------------------------- #
    # Configuration path
    # ----------------------------------------------------------------- #
    def attach_program(self, mid: int, program: Iterable[ProgramStep]) -> MasterPort:
        if not 0 <= mid < self.topology.num_masters:
            raise ValueError(f"no master port {mid:#x} in a {self.topology.num_masters}-master system")
        port = MasterPort(mid, tuple(program))
        self.ports[mid] = port
        return port

    def schedule(self, cycle: int, cmd: TcuCommand) -> None:
        if isinstance(cmd, Start):
            raise TcuError("Start cannot be scheduled")
        self._scheduled[cycle].append(cmd)

    def tcu_execute(self, cmd: TcuCommand) -> None:
        if isinstance(cmd, (LoadApu, LoadDpu)):
            self._load_policy(cmd)
        elif isinstance(cmd, LoadMem):
            self._load_mem(cmd)
        elif isinstance(cmd, SetSrs):
            try:
                self.srs.set_register(cmd.reg, cmd.value)
            except ValueError as exc:
                raise TcuError(str(exc)) from exc
            logger.info("TCU: gpcfg%d <- 0x%08x", cmd.reg, cmd.value)
        elif isinstance(cmd, Start):
            self.started = True
            logger.info("TCU: start, %d master program(s) released", len(self.ports))
        else:
            raise TypeError(f"not a TCU command: {cmd!r}")

    def _load_policy(self, cmd: Union[LoadApu, LoadDpu]) -> None:
        policy = cmd.policy
        if policy.mid >= self.topology.num_masters:
            raise MalformedPolicy(f"policy names master {policy.mid:#x} beyond the topology")

        if cmd.slave is None:
            lo, hi = policy.bounds
            targets = [w.slave_id for w, _, _ in self.memory_map.intersecting(lo, hi)]
            if not targets:
                logger.warning("TCU: policy range 0x%08x-0x%08x touches no slave; not loaded", lo, hi)
        elif cmd.slave in self.monitors:
            targets = [cmd.slave]
        else:
            raise MalformedPolicy(f"no slave {cmd.slave} in the topology")

        for slave_id in targets:
            prs = self.monitors[slave_id].prs
            if isinstance(cmd, LoadApu):
                prs.load_apu(policy)
            else:
                prs.load_dpu(policy)
            logger.info("TCU: slave %d <- %s", slave_id, policy)

    def _load_mem(self, cmd: LoadMem) -> None:
        for i, value in enumerate(cmd.words):
            addr = cmd.addr + 4 * i
            try:
                w = self.memory_map.locate(addr)
            except DecodeError as exc:
                raise AddressUnmapped(f"LOADMEM target 0x{addr:08x} is not mapped") from exc
            try:
                self.devices[w.slave_id].load(addr - w.base, [value])
            except ValueError as exc:
                raise TcuError(str(exc)) from exc
        logger.info("TCU: loaded %d word(s) at 0x%08x", len(cmd.words), cmd.addr)

    # ----------------------------------------------------------------- #
    # Cycle loop
    # ----------------------------------------------------------------- #
    @property
    def idle(self) -> bool:
        return (
            all(port.done for port in self.ports.values())
            and not any(self._inflight.values())
            and not any(self._queues.values())
            and all(m.pending is None for m in self.monitors.values())
        )

    def _deliver_at(self, cycle: int, slave_id: int, txn: Transaction, response: BusResponse) -> None:
        self._inflight[cycle].append((slave_id, txn, response))

    def _route(self, txn: Transaction, cycle: int) -> None:
        try:
            slave_id = self.memory_map.decode(txn.addr)
        except DecodeError:
            logger.debug("cycle %d: mid=%#x address 0x%08x decodes to no slave", cycle, txn.mid, txn.addr)
            respond_at = cycle + TransactionMonitor.RESPONSE_DELAY
            response = BusResponse(ResponseCode.ERROR, Reason.DECODE_ERROR, respond_at)
            self._deliver_at(respond_at, DECODE_SLAVE, txn, response)
            return
        self._queues[slave_id].append(txn)

    def step(self) -> list[TraceEvent]:
        if not self.started:
            raise FabricStateError("the TCU has not issued Start")
        c = self.cycle

        for cmd in self._scheduled.pop(c, []):
            logger.info("cycle %d: scheduled reconfiguration", c)
            self.tcu_execute(cmd)

        events: list[TraceEvent] = []
        delivered = sorted(self._inflight.pop(c, []), key=lambda d: (d[0], d[1].mid))
        for slave_id, txn, response in delivered:
            events.append(TraceEvent.from_response(slave_id, txn, response))
            issued = master_next(self.ports[txn.mid], c, response)
            if issued is not None:
                self._route(issued, c)

        for slave_id in sorted(self.monitors):
            resolved = self.monitors[slave_id].data_phase(c)
            if resolved is not None:
                txn, response = resolved
                self._deliver_at(response.cycle, slave_id, txn, response)

        for mid in sorted(self.ports):
            issued = master_next(self.ports[mid], c)
            if issued is not None:
                self._route(issued, c)

        for slave_id in sorted(self._queues):
            queue = self._queues[slave_id]
            if not queue:
                continue
            granted = arbitrate((t.mid for t in queue), self.arbiter, slave_id)
            txn = next(t for t in queue if t.mid == granted)
            queue.remove(txn)
            logger.debug("cycle %d slave %d: grant mid=%#x (%d waiting)", c, slave_id, granted, len(queue))
            response = self.monitors[slave_id].address_phase(txn, c)
            if response is not None:
                self._deliver_at(response.cycle, slave_id, txn, response)

        self.cycle += 1
        self.events.extend(events)
        return events

    def run(self, limit: int) -> list[TraceEvent]:
        if not self.started:
            self.tcu_execute(Start())
        while not self.idle and self.cycle < limit:
            self.step()
        if not self.idle:
            logger.warning("run stopped by the %d-cycle limit with work outstanding", limit)
        return self.events

    @property
    def final_cycle(self) -> int:
        return max(self.cycle - 1, 0)

    @property
    def unfinished(self) -> int:
        return sum(port.remaining for port in self.ports.values())
