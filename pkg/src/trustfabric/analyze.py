"""
analyze.py - static analysis of the policies loaded in each TRANSMON.

Reports, per slave:
- the address intervals each master may read and write,
- APU entries that never decide anything because earlier entries already
  allow everything they allow (shadowed),
- DPU entries that can never fire because the APU never lets that master
  write anywhere in their range (dead deny rules).

All ranges are clipped to the slave window, since a TRANSMON only ever
sees addresses that decode to its own slave.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .fabric import Fabric, LoadApu, LoadDpu, LoadMem, Scheduled, SetSrs
from .policy import AccessKind, ApuPolicy, DpuPolicy, Permission, perm_covers
from .scenario import Scenario

Interval = tuple[int, int]  # inclusive


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Merge overlapping or adjacent inclusive intervals."""
    merged: list[Interval] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def covered(lo: int, hi: int, intervals: Iterable[Interval]) -> bool:
    """True if [lo, hi] lies inside the union of `intervals`."""
    for m_lo, m_hi in merge_intervals(intervals):
        if m_lo <= lo and hi <= m_hi:
            return True
    return False


def intersects(lo: int, hi: int, intervals: Iterable[Interval]) -> bool:
    return any(m_lo <= hi and lo <= m_hi for m_lo, m_hi in intervals)


def _clip(bounds: Interval, window: Interval) -> Interval | None:
    lo, hi = max(bounds[0], window[0]), min(bounds[1], window[1])
    return (lo, hi) if lo <= hi else None


def _kinds(perm: Permission) -> list[AccessKind]:
    return [k for k in AccessKind if perm_covers(perm, k)]


def allowed_regions(
    policies: Sequence[ApuPolicy],
    window: Interval,
    mid: int,
    kind: AccessKind,
) -> list[Interval]:
    clipped = (
        _clip(p.bounds, window)
        for p in policies
        if p.mid == mid and perm_covers(p.perm, kind)
    )
    return merge_intervals(c for c in clipped if c is not None)


def shadowed_entries(policies: Sequence[ApuPolicy], window: Interval) -> list[int]:
    """Indexes of entries whose every permitted access is already allowed by earlier entries."""
    shadowed = []
    for i, p in enumerate(policies):
        own = _clip(p.bounds, window)
        if own is None:
            shadowed.append(i)
            continue
        earlier = policies[:i]
        if all(covered(*own, allowed_regions(earlier, window, p.mid, k)) for k in _kinds(p.perm)):
            shadowed.append(i)
    return shadowed


def dead_deny_rules(apu: Sequence[ApuPolicy], dpu: Sequence[DpuPolicy], window: Interval) -> list[int]:
    dead = []
    for i, d in enumerate(dpu):
        own = _clip(d.bounds, window)
        writable = allowed_regions(apu, window, d.mid, AccessKind.WRITE)
        if own is None or not intersects(*own, writable):
            dead.append(i)
    return dead


@dataclass(frozen=True)
class AllowedRegion:
    slave_id: int
    mid: int
    kind: AccessKind
    intervals: tuple[Interval, ...]


@dataclass(frozen=True)
class FlaggedEntry:
    slave_id: int
    index: int
    policy: ApuPolicy | DpuPolicy


@dataclass
class Analysis:
    regions: list[AllowedRegion] = field(default_factory=list)
    shadowed: list[FlaggedEntry] = field(default_factory=list)
    dead_rules: list[FlaggedEntry] = field(default_factory=list)
    scheduled: list[Scheduled] = field(default_factory=list)

    def regions_for(self, slave_id: int, mid: int, kind: AccessKind) -> list[Interval]:
        for r in self.regions:
            if (r.slave_id, r.mid, r.kind) == (slave_id, mid, kind):
                return list(r.intervals)
        return []

    def lines(self) -> list[str]:
        out = ["allowed regions:"]
        for r in self.regions:
            spans = " ".join(f"[0x{lo:08x}, 0x{hi:08x}]" for lo, hi in r.intervals)
            out.append(f"  slave {r.slave_id} mid 0x{r.mid:x} {r.kind.value}: {spans}")
        out.append(f"shadowed apu entries: {len(self.shadowed)}")
        out += [f"  slave {e.slave_id} entry {e.index}: {_describe(e.policy)}" for e in self.shadowed]
        out.append(f"dead dpu entries: {len(self.dead_rules)}")
        out += [f"  slave {e.slave_id} entry {e.index}: {_describe(e.policy)}" for e in self.dead_rules]
        out.append(f"scheduled reconfigurations: {len(self.scheduled)}")
        out += [f"  cycle {s.cycle}: {_describe_command(s.command)}" for s in self.scheduled]
        return out

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _describe(p: ApuPolicy | DpuPolicy) -> str:
    lo, hi = p.bounds
    if isinstance(p, ApuPolicy):
        return f"mid 0x{p.mid:x} 0x{lo:08x}-0x{hi:08x} {p.perm.name}"
    return f"mid 0x{p.mid:x} 0x{lo:08x}-0x{hi:08x} data 0x{p.sensitive_value:08x}"


def _describe_command(cmd) -> str:
    if isinstance(cmd, (LoadApu, LoadDpu)):
        slave = "auto" if cmd.slave is None else cmd.slave
        return f"{'APU' if isinstance(cmd, LoadApu) else 'DPU'} slave {slave} {_describe(cmd.policy)}"
    if isinstance(cmd, LoadMem):
        return f"LOADMEM 0x{cmd.addr:08x} ({len(cmd.words)} word(s))"
    if isinstance(cmd, SetSrs):
        return f"SETSRS gpcfg{cmd.reg} 0x{cmd.value:08x}"
    return repr(cmd)


def analyze_fabric(fabric: Fabric) -> Analysis:
    analysis = Analysis()
    for w in sorted(fabric.memory_map.all_windows, key=lambda w: w.slave_id):
        prs = fabric.monitors[w.slave_id].prs
        window = (w.base, w.hi)
        for mid in sorted({p.mid for p in prs.apu_entries}):
            for kind in AccessKind:
                intervals = allowed_regions(prs.apu_entries, window, mid, kind)
                if intervals:
                    analysis.regions.append(AllowedRegion(w.slave_id, mid, kind, tuple(intervals)))
        for i in shadowed_entries(prs.apu_entries, window):
            analysis.shadowed.append(FlaggedEntry(w.slave_id, i, prs.apu_entries[i]))
        for i in dead_deny_rules(prs.apu_entries, prs.dpu_entries, window):
            analysis.dead_rules.append(FlaggedEntry(w.slave_id, i, prs.dpu_entries[i]))
    return analysis


def analyze(scenario: Scenario) -> Analysis:
    """Analyse the policy state the TCU sets up before Start."""
    analysis = analyze_fabric(Fabric.from_scenario(scenario))
    analysis.scheduled = sorted(scenario.reconfigurations, key=lambda s: s.cycle)
    return analysis
