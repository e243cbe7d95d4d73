"""
engine.py - orchestration layer.

Connects:
- scenario.parse()
- fabric.Fabric (setup, Start, cycle loop)
- trace.RunReport / trace.write_trace()

into a "job" per scenario file. Jobs are independent, each with its own
fabric, so several can run side by side.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import ParseError, ScenarioError, TcuError
from .fabric import Fabric
from .scenario import Scenario, parse
from .trace import RunReport, TraceEvent, write_trace

logger = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    report: RunReport
    events: list[TraceEvent] = field(default_factory=list)
    fabric: Optional[Fabric] = field(default=None, repr=False)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path).expanduser()
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw.count(b"\n", 0, exc.start) + 1
        raise ParseError(line, "<invalid utf-8>", f"byte 0x{raw[exc.start]:02x} is not valid UTF-8") from exc
    return parse(text)


def simulate(scenario: Scenario, name: str = "<scenario>", limit: Optional[int] = None) -> SimulationResult:
    """Build a fabric for `scenario`, run it to completion or the cycle limit."""
    fabric = Fabric.from_scenario(scenario)
    limit = scenario.limit if limit is None else limit
    logger.info("%s: running for at most %d cycles", name, limit)
    events = fabric.run(limit)
    unfinished = fabric.unfinished
    for port in fabric.ports.values():
        port.expire()

    mismatches = [m for mid in sorted(fabric.ports) for m in fabric.ports[mid].mismatches]
    report = RunReport.from_events(
        name,
        events,
        mismatches=mismatches,
        unfinished=unfinished,
        final_cycle=fabric.final_cycle,
    )
    logger.info("%s: %d transaction(s), %d denied", name, report.total, report.denied)
    return SimulationResult(report, events, fabric)


@dataclass
class SimulationJob:
    scenario_path: Path
    trace_path: Optional[Path] = None
    limit: Optional[int] = None

    def run(self) -> SimulationResult:
        scenario = load_scenario(self.scenario_path)
        result = simulate(scenario, str(self.scenario_path), self.limit)
        if self.trace_path is not None:
            write_trace(result.events, self.trace_path)
        return result


def _run_job(job: SimulationJob) -> Union[SimulationResult, Exception]:
    try:
        return job.run()
    except (ScenarioError, TcuError, OSError) as exc:
        logger.debug("%s: rejected: %s", job.scenario_path, exc)
        return exc


def run_jobs(jobs: Sequence[SimulationJob], workers: int = 1) -> list[Union[SimulationResult, Exception]]:
    """Run independent jobs; results come back in input order."""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))
