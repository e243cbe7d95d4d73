"""
scenario.py - scenario files: parse, validate, render.

A scenario is a line-oriented text file (`#` starts a comment, keywords
are case-insensitive, numbers are `0x` hex with optional `_` separators
except where a decimal count is expected):

    TOPOLOGY masters <int> slaves <int> prs_apu <int> prs_dpu <int>
    MEMMAP slave <int> base <hex> size <hex>
    SRS base <hex> regs <int>
    APU slave <int|auto> mid <hex> addr <hex> mask <hex> perm RO|WO|RW
    DPU slave <int|auto> mid <hex> addr <hex> amask <hex> data <hex> dmask <hex>
    LOADMEM <hex-addr> <hex-word> [<hex-word> ...]
    SETSRS <int> <hex>
    AT <int> APU|DPU|LOADMEM|SETSRS ...
    MASTER <hex-mid> READ <hex> EXPECT OKAY|ERROR|ANY [RDATA <hex>]
    MASTER <hex-mid> WRITE <hex> <hex> EXPECT OKAY|ERROR|ANY
    LIMIT <int>

The MASTER id names the physical port a program is attached to. There is
no way to stamp a transaction with some other id.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Protocol

from .config import DEFAULT_LIMIT, SRS_BASE, SRS_REGS, Topology
from .devices import Expect, ProgramStep
from .errors import ParseError
from .fabric import LoadApu, LoadDpu, LoadMem, MemoryMap, Scheduled, SetSrs, TcuCommand, Window
from .policy import MASK32, AccessKind, ApuPolicy, DpuPolicy, Permission

logger = logging.getLogger(__name__)

Severity = Literal["warning", "error"]

_HEX_RE = re.compile(r"0[xX][0-9a-fA-F_]+")
_INT_RE = re.compile(r"[0-9]+")

_PERMISSIONS = {
    "RO": Permission.RO,
    "WO": Permission.WO,
    "RW": Permission.RW,
    "01": Permission.RO,
    "10": Permission.WO,
    "11": Permission.RW,
}
_PERM_NAMES = {Permission.RO: "RO", Permission.WO: "WO", Permission.RW: "RW"}

# Tokens that would let a program claim a master id other than its port.
_SPOOF_TOKENS = {"MID", "ID", "HMASTER", "MASTER", "SRC", "SOURCE", "AS"}

_SCHEDULABLE = {"APU", "DPU", "LOADMEM", "SETSRS"}


@dataclass(frozen=True)
class Finding:
    severity: Severity
    line: int
    message: str
    token: str = ""

    def __str__(self) -> str:
        return f"{self.severity}: line {self.line}: {self.message}"


@dataclass
class Scenario:
    topology: Topology = field(default_factory=Topology)
    memory_map: Optional[MemoryMap] = None
    setup: tuple[TcuCommand, ...] = ()
    reconfigurations: tuple[Scheduled, ...] = ()
    programs: dict[int, tuple[ProgramStep, ...]] = field(default_factory=dict)
    limit: int = DEFAULT_LIMIT
    lines: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.memory_map is None:
            self.memory_map = MemoryMap.default(self.topology)

    @property
    def commands(self) -> list[tuple[Optional[int], TcuCommand]]:
        """Setup commands (cycle None) followed by scheduled ones in cycle order."""
        items: list[tuple[Optional[int], TcuCommand]] = [(None, cmd) for cmd in self.setup]
        items += [(s.cycle, s.command) for s in sorted(self.reconfigurations, key=lambda s: s.cycle)]
        return items


# --------------------------------------------------------------------- #
# Tokens
# --------------------------------------------------------------------- #
class _Tokens:
    def __init__(self, lineno: int, tokens: list[str]):
        self.lineno = lineno
        self.tokens = tokens
        self.pos = 0

    def error(self, message: str, token: Optional[str] = None) -> ParseError:
        if token is None:
            token = self.tokens[self.pos] if self.pos < len(self.tokens) else "<end of line>"
        return ParseError(self.lineno, token, message)

    def take(self, what: str) -> str:
        if self.pos >= len(self.tokens):
            raise self.error(f"missing {what}")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def keyword(self, *expected: str) -> str:
        token = self.take(" or ".join(expected))
        if token.upper() not in expected:
            raise self.error(f"expected {' or '.join(expected)}", token)
        return token.upper()

    def hexnum(self, what: str) -> int:
        return _hex(self.take(what), self)

    def decimal(self, what: str) -> int:
        return _int(self.take(what), self)

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def end(self) -> None:
        if not self.at_end():
            raise self.error("unexpected token")

    def pairs(self, required: set[str], optional: set[str] = frozenset()) -> dict[str, str]:
        found: dict[str, str] = {}
        while not self.at_end():
            key = self.take("key").lower()
            if key not in required | optional:
                raise self.error(f"unknown field {key!r}", key)
            if key in found:
                raise self.error(f"duplicate field {key!r}", key)
            found[key] = self.take(f"value for {key!r}")
        missing = sorted(required - found.keys())
        if missing:
            raise self.error(f"missing field(s): {', '.join(missing)}")
        return found


def _hex(token: str, where: _Tokens) -> int:
    if not _HEX_RE.fullmatch(token) or token.endswith("_"):
        raise where.error("expected a 0x-prefixed hexadecimal number", token)
    value = int(token[2:].replace("_", ""), 16)
    if value > MASK32:
        raise where.error("value does not fit in 32 bits", token)
    return value


def _int(token: str, where: _Tokens) -> int:
    if not _INT_RE.fullmatch(token):
        raise where.error("expected a decimal number", token)
    return int(token)


# --------------------------------------------------------------------- #
# Parser
# --------------------------------------------------------------------- #
class _ScenarioParser:
    def __init__(self) -> None:
        self.topology: Optional[Topology] = None
        self.memmap: dict[int, tuple[int, int, int]] = {}
        self.srs: Optional[tuple[int, int]] = None
        self.setup: list[TcuCommand] = []
        self.reconfigurations: list[Scheduled] = []
        self.programs: dict[int, list[ProgramStep]] = {}
        self.limit: Optional[int] = None
        self.lines: dict[str, int] = {}
        self._handlers: dict[str, Callable[[_Tokens], Optional[TcuCommand]]] = {
            "TOPOLOGY": self._topology,
            "MEMMAP": self._memmap,
            "SRS": self._srs,
            "APU": self._apu,
            "DPU": self._dpu,
            "LOADMEM": self._loadmem,
            "SETSRS": self._setsrs,
            "MASTER": self._master,
            "LIMIT": self._limit,
        }

    def feed(self, text: str) -> None:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            tokens = raw.split("#", 1)[0].split()
            if tokens:
                self._line(_Tokens(lineno, tokens))

    def _line(self, tk: _Tokens) -> None:
        keyword = tk.take("keyword").upper()
        at: Optional[int] = None
        if keyword == "AT":
            at = tk.decimal("cycle")
            keyword = tk.take("command").upper()
            if keyword not in _SCHEDULABLE:
                raise tk.error(f"{keyword} cannot be scheduled", keyword)

        handler = self._handlers.get(keyword)
        if handler is None:
            raise ParseError(tk.lineno, tk.tokens[tk.pos - 1], f"unknown keyword {keyword!r}")

        command = handler(tk)
        if command is None:
            return
        if at is None:
            self.setup.append(command)
        else:
            self.reconfigurations.append(Scheduled(at, command))

    def _once(self, key: str, tk: _Tokens) -> None:
        if key in self.lines:
            raise tk.error(f"duplicate {key.upper()} line (first on line {self.lines[key]})", tk.tokens[0])
        self.lines[key] = tk.lineno

    def _topology(self, tk: _Tokens) -> None:
        self._once("topology", tk)
        fields = tk.pairs(set(), {"masters", "slaves", "prs_apu", "prs_dpu"})
        values = {k: _int(v, tk) for k, v in fields.items()}
        defaults = Topology()
        self.topology = Topology(
            num_masters=values.get("masters", defaults.num_masters),
            num_slaves=values.get("slaves", defaults.num_slaves),
            prs_apu=values.get("prs_apu", defaults.prs_apu),
            prs_dpu=values.get("prs_dpu", defaults.prs_dpu),
        )

    def _memmap(self, tk: _Tokens) -> None:
        fields = tk.pairs({"slave", "base", "size"})
        slave = _int(fields["slave"], tk)
        if slave in self.memmap:
            raise tk.error(f"slave {slave} mapped twice", fields["slave"])
        self.memmap[slave] = (_hex(fields["base"], tk), _hex(fields["size"], tk), tk.lineno)
        self.lines[f"memmap:{slave}"] = tk.lineno

    def _srs(self, tk: _Tokens) -> None:
        self._once("srs", tk)
        fields = tk.pairs({"base", "regs"})
        self.srs = (_hex(fields["base"], tk), _int(fields["regs"], tk))

    def _slave(self, token: str, tk: _Tokens) -> Optional[int]:
        if token.lower() == "auto":
            return None
        return _int(token, tk)

    def _apu(self, tk: _Tokens) -> LoadApu:
        fields = tk.pairs({"slave", "mid", "addr", "mask", "perm"})
        perm_token = fields["perm"].upper()
        if perm_token == "00":
            raise tk.error("permission '00' is reserved", fields["perm"])
        if perm_token not in _PERMISSIONS:
            raise tk.error("permission must be RO, WO or RW", fields["perm"])
        policy = ApuPolicy(
            mid=_hex(fields["mid"], tk),
            addr=_hex(fields["addr"], tk),
            mask=_hex(fields["mask"], tk),
            perm=_PERMISSIONS[perm_token],
        )
        return LoadApu(self._slave(fields["slave"], tk), policy, tk.lineno)

    def _dpu(self, tk: _Tokens) -> LoadDpu:
        fields = tk.pairs({"slave", "mid", "addr", "amask", "data", "dmask"})
        policy = DpuPolicy(
            mid=_hex(fields["mid"], tk),
            addr=_hex(fields["addr"], tk),
            data=_hex(fields["data"], tk),
            dmask=_hex(fields["dmask"], tk),
            amask=_hex(fields["amask"], tk),
        )
        return LoadDpu(self._slave(fields["slave"], tk), policy, tk.lineno)

    def _loadmem(self, tk: _Tokens) -> LoadMem:
        addr = tk.hexnum("address")
        words = [tk.hexnum("word")]
        while not tk.at_end():
            words.append(tk.hexnum("word"))
        return LoadMem(addr, tuple(words), tk.lineno)

    def _setsrs(self, tk: _Tokens) -> SetSrs:
        reg = tk.decimal("register index")
        value = tk.hexnum("value")
        tk.end()
        return SetSrs(reg, value, tk.lineno)

    def _master(self, tk: _Tokens) -> None:
        for token in tk.tokens[2:]:
            if token.upper() in _SPOOF_TOKENS:
                raise tk.error("a transaction's master id is fixed by its port and cannot be set", token)

        mid = tk.hexnum("master port id")
        op = tk.keyword("READ", "WRITE")
        kind = AccessKind.READ if op == "READ" else AccessKind.WRITE
        addr = tk.hexnum("address")
        wdata = tk.hexnum("write data") if kind is AccessKind.WRITE else None
        tk.keyword("EXPECT")
        expect = Expect(tk.keyword("OKAY", "ERROR", "ANY"))

        rdata: Optional[int] = None
        if not tk.at_end():
            if kind is AccessKind.WRITE:
                raise tk.error("RDATA only applies to reads")
            tk.keyword("RDATA")
            rdata = tk.hexnum("expected read data")
        tk.end()

        step = ProgramStep(kind, addr, wdata, expect, rdata, tk.lineno)
        self.programs.setdefault(mid, []).append(step)
        self.lines.setdefault(f"master:{mid}", tk.lineno)

    def _limit(self, tk: _Tokens) -> None:
        self._once("limit", tk)
        self.limit = tk.decimal("cycle count")
        tk.end()

    def build(self) -> Scenario:
        topology = self.topology or Topology()
        srs_base, srs_regs = self.srs or (SRS_BASE, SRS_REGS)
        defaults = MemoryMap.default(topology, srs_base, srs_regs)

        windows = list(defaults.windows)
        for slave, (base, size, lineno) in sorted(self.memmap.items()):
            if slave >= topology.num_slaves:
                raise ParseError(
                    lineno, str(slave),
                    f"MEMMAP names slave {slave} in a {topology.num_slaves}-slave topology",
                )
            windows[slave] = Window(slave, base, size)

        return Scenario(
            topology=topology,
            memory_map=MemoryMap(tuple(windows), defaults.srs),
            setup=tuple(self.setup),
            reconfigurations=tuple(self.reconfigurations),
            programs={mid: tuple(steps) for mid, steps in self.programs.items()},
            limit=DEFAULT_LIMIT if self.limit is None else self.limit,
            lines=dict(self.lines),
        )


def parse(text: str, *, strict: bool = True) -> Scenario:
    """
    Parse scenario text.

    With `strict` (the default) the scenario is validated as well: warnings
    are logged and the first error is raised as a ParseError.
    """
    parser = _ScenarioParser()
    parser.feed(text)
    scenario = parser.build()
    logger.info(
        "parsed scenario: %d setup command(s), %d scheduled, %d master program(s)",
        len(scenario.setup), len(scenario.reconfigurations), len(scenario.programs),
    )
    if strict:
        for finding in validate(scenario):
            if finding.severity == "error":
                raise ParseError(finding.line, finding.token, finding.message)
            logger.warning("%s", finding)
    return scenario


# --------------------------------------------------------------------- #
# Validation
# --------------------------------------------------------------------- #
class _Report(Protocol):
    def __call__(self, line: int, message: str, token: str = "") -> None: ...


def _fmt_range(lo: int, hi: int) -> str:
    return f"0x{lo:08x}-0x{hi:08x}"


def validate(sc: Scenario) -> list[Finding]:
    """Return warnings and errors for a parsed scenario, in file order where possible."""
    findings: list[Finding] = []

    def error(line: int, message: str, token: str = "") -> None:
        findings.append(Finding("error", line, message, token))

    def warning(line: int, message: str, token: str = "") -> None:
        findings.append(Finding("warning", line, message, token))

    topo = sc.topology
    mm = sc.memory_map

    def window_line(w: Window) -> int:
        key = "srs" if w.slave_id == topo.srs_slave_id else f"memmap:{w.slave_id}"
        return sc.lines.get(key, 0)

    if topo.num_masters < 1:
        error(sc.lines.get("topology", 0), "a topology needs at least one master", str(topo.num_masters))
    if sc.limit <= 0:
        error(sc.lines.get("limit", 0), "LIMIT must be positive", str(sc.limit))

    for w in mm.all_windows:
        if w.size <= 0 or w.size % 4:
            error(window_line(w), f"{w}: size must be a positive multiple of 4", f"0x{w.size:x}")
        if w.base % 4:
            error(window_line(w), f"{w}: base must be word-aligned", f"0x{w.base:x}")
        if w.hi > MASK32:
            error(window_line(w), f"{w}: window runs past the 32-bit address space")
    for a, b in mm.overlapping_pairs():
        error(max(window_line(a), window_line(b)), f"windows overlap: {a} and {b}")

    load_counts: dict[tuple[str, int], int] = {}
    for cycle, cmd in sc.commands:
        if isinstance(cmd, (LoadApu, LoadDpu)):
            _validate_policy(sc, cmd, error, warning, load_counts)
        elif isinstance(cmd, LoadMem):
            if cmd.addr % 4:
                error(cmd.line, "LOADMEM address must be word-aligned", f"0x{cmd.addr:x}")
            for i in range(len(cmd.words)):
                addr = cmd.addr + 4 * i
                if not any(w.contains(addr) for w in mm.all_windows):
                    error(cmd.line, f"LOADMEM target 0x{addr:08x} is not mapped", f"0x{addr:x}")
                    break
        elif isinstance(cmd, SetSrs):
            if cmd.reg >= mm.srs_regs:
                error(cmd.line, f"no register gpcfg{cmd.reg} in a {mm.srs_regs}-register SRS", str(cmd.reg))

    for mid, program in sc.programs.items():
        if mid >= topo.num_masters:
            error(sc.lines.get(f"master:{mid}", 0), f"no master port 0x{mid:x} in a {topo.num_masters}-master topology", f"0x{mid:x}")
        for step in program:
            if step.addr % 4:
                error(step.line, "accesses must be word-aligned", f"0x{step.addr:x}")
            elif not any(w.contains(step.addr) for w in mm.all_windows):
                warning(step.line, f"address 0x{step.addr:08x} decodes to no slave", f"0x{step.addr:x}")

    return findings


def _validate_policy(
    sc: Scenario,
    cmd: LoadApu | LoadDpu,
    error: _Report,
    warning: _Report,
    load_counts: dict[tuple[str, int], int],
) -> None:
    topo = sc.topology
    mm = sc.memory_map
    policy = cmd.policy
    kind = "APU" if isinstance(cmd, LoadApu) else "DPU"

    if policy.mid >= topo.num_masters:
        error(cmd.line, f"{kind} policy names master 0x{policy.mid:x} in a {topo.num_masters}-master topology", f"0x{policy.mid:x}")
    if isinstance(cmd, LoadApu) and policy.perm is Permission.RESERVED:
        error(cmd.line, "permission '00' is reserved", "00")

    lo, hi = policy.bounds
    if cmd.slave is None:
        hits = mm.intersecting(lo, hi)
        targets = [w.slave_id for w, _, _ in hits]
        if not hits:
            warning(cmd.line, f"{kind} range {_fmt_range(lo, hi)} touches no slave window; it is not loaded")
        else:
            if len(hits) > 1:
                warning(cmd.line, f"{kind} range {_fmt_range(lo, hi)} split across slaves {', '.join(map(str, targets))}")
            if sum(c_hi - c_lo + 1 for _, c_lo, c_hi in hits) < hi - lo + 1:
                warning(cmd.line, f"{kind} range {_fmt_range(lo, hi)} clipped to mapped space")
    else:
        if cmd.slave not in topo.slave_ids:
            error(cmd.line, f"{kind} policy names slave {cmd.slave} in a {topo.num_slaves}-slave topology", str(cmd.slave))
            return
        w = mm.window(cmd.slave)
        targets = [cmd.slave]
        if hi < w.base or lo > w.hi:
            warning(cmd.line, f"{kind} range {_fmt_range(lo, hi)} lies outside {w} and can never match")
        elif lo < w.base or hi > w.hi:
            warning(cmd.line, f"{kind} range {_fmt_range(lo, hi)} clipped to {w}")

    capacity = topo.prs_apu if kind == "APU" else topo.prs_dpu
    for slave_id in targets:
        key = (kind, slave_id)
        load_counts[key] = load_counts.get(key, 0) + 1
        if load_counts[key] == capacity + 1:
            error(cmd.line, f"slave {slave_id}: {kind} PRS capacity of {capacity} exceeded")


# --------------------------------------------------------------------- #
# Rendering
# --------------------------------------------------------------------- #
def _h(value: int) -> str:
    return f"0x{value >> 16:04X}_{value & 0xFFFF:04X}"


def _render_command(cmd: TcuCommand) -> str:
    if isinstance(cmd, LoadApu):
        p = cmd.policy
        slave = "auto" if cmd.slave is None else str(cmd.slave)
        return f"APU slave {slave} mid 0x{p.mid:x} addr {_h(p.addr)} mask {_h(p.mask)} perm {_PERM_NAMES[p.perm]}"
    if isinstance(cmd, LoadDpu):
        p = cmd.policy
        slave = "auto" if cmd.slave is None else str(cmd.slave)
        return (
            f"DPU slave {slave} mid 0x{p.mid:x} addr {_h(p.addr)} amask {_h(p.amask)} "
            f"data {_h(p.data)} dmask {_h(p.dmask)}"
        )
    if isinstance(cmd, LoadMem):
        return f"LOADMEM {_h(cmd.addr)} " + " ".join(_h(v) for v in cmd.words)
    if isinstance(cmd, SetSrs):
        return f"SETSRS {cmd.reg} {_h(cmd.value)}"
    raise TypeError(f"cannot render {cmd!r}")


def _render_step(mid: int, step: ProgramStep) -> str:
    if step.kind is AccessKind.READ:
        text = f"MASTER 0x{mid:x} READ {_h(step.addr)} EXPECT {step.expect.value}"
        if step.expect_rdata is not None:
            text += f" RDATA {_h(step.expect_rdata)}"
        return text
    return f"MASTER 0x{mid:x} WRITE {_h(step.addr)} {_h(step.wdata)} EXPECT {step.expect.value}"


def render(sc: Scenario) -> str:
    """Canonical text form; `parse(render(sc)) == sc`."""
    t = sc.topology
    out = [
        f"TOPOLOGY masters {t.num_masters} slaves {t.num_slaves} prs_apu {t.prs_apu} prs_dpu {t.prs_dpu}",
        f"SRS base {_h(sc.memory_map.srs.base)} regs {sc.memory_map.srs_regs}",
    ]
    out += [f"MEMMAP slave {w.slave_id} base {_h(w.base)} size {_h(w.size)}" for w in sc.memory_map.windows]
    out += [_render_command(cmd) for cmd in sc.setup]
    out += [f"AT {s.cycle} {_render_command(s.command)}" for s in sc.reconfigurations]
    for mid in sorted(sc.programs):
        out += [_render_step(mid, step) for step in sc.programs[mid]]
    out.append(f"LIMIT {sc.limit}")
    return "\n".join(out) + "\n"
