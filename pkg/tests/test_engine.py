from pathlib import Path

import pytest

from trustfabric.engine import SimulationJob, SimulationResult, load_scenario, run_jobs, simulate
from trustfabric.errors import ParseError
from trustfabric.fabric import Fabric, Start
from trustfabric.policy import AccessKind, Reason
from trustfabric.trace import compare_traces, render_trace
from trustfabric.transmon import ResponseCode

ATTACKS = ["apu_range", "dpu_secret", "apu_isolation", "srs_semaphore"]
SHIPPED = [*ATTACKS, "empty"]


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios_match_golden_traces(shipped, golden_dir, name):
    result = SimulationJob(shipped(name)).run()
    expected = (golden_dir / f"{name}.trace").read_text().splitlines()
    actual = render_trace(result.events).splitlines()
    assert compare_traces(expected, actual) == []
    assert result.report.mismatches == []
    assert result.report.exit_code == 0


@pytest.mark.parametrize("name", SHIPPED)
def test_runs_are_deterministic(shipped, name):
    first = SimulationJob(shipped(name)).run()
    second = SimulationJob(shipped(name)).run()
    assert render_trace(first.events) == render_trace(second.events)
    assert first.report.render() == second.report.render()


@pytest.mark.parametrize("name", ATTACKS)
def test_denied_writes_leave_the_slave_untouched(shipped, name):
    fabric = Fabric.from_scenario(load_scenario(shipped(name)))
    fabric.tcu_execute(Start())
    before_after = {}
    while not fabric.idle:
        cycle = fabric.cycle
        before = {s: d.snapshot() for s, d in fabric.devices.items()}
        fabric.step()
        before_after[cycle] = (before, {s: d.snapshot() for s, d in fabric.devices.items()})

    denied = [e for e in fabric.events if e.kind is AccessKind.WRITE and e.code is ResponseCode.ERROR]
    assert denied
    for event in denied:
        decided = event.cycle - 2
        before, after = before_after[decided]
        assert before[event.slave_id] == after[event.slave_id]
        assert not any(
            r.cycle == decided and r.kind is AccessKind.WRITE for r in fabric.devices[event.slave_id].log
        )


def test_apu_range_report(shipped):
    report = SimulationJob(shipped("apu_range")).run().report
    assert (report.total, report.allowed) == (4, 2)
    assert report.denied_by_reason[Reason.APU_NO_MATCH] == 2
    assert report.final_cycle == 8


def test_protected_word_stays_in_memory(shipped):
    result = SimulationJob(shipped("apu_range")).run()
    assert result.fabric.devices[0].peek(0xF800) == 0xFEED_F00D
    assert all(e.data != 0xFEED_F00D for e in result.events)


def test_srs_semaphore_stays_claimed(shipped):
    result = SimulationJob(shipped("srs_semaphore")).run()
    assert result.fabric.srs.get_register(39) == 0x1
    assert result.report.denied_by_reason[Reason.DPU_DATA_BLOCKED] == 1


def test_empty_scenario(run_text):
    result = run_text("")
    assert result.events == []
    assert result.report.total == 0
    assert result.report.final_cycle == 0
    assert result.report.exit_code == 0


def test_expectation_mismatch_sets_exit_code(run_text):
    result = run_text("MASTER 0x1 READ 0x2000_0000 EXPECT OKAY\n")
    assert len(result.report.mismatches) == 1
    assert result.report.exit_code == 1


def test_limit_override_leaves_work_unfinished(shipped):
    result = simulate(load_scenario(shipped("dpu_secret")), "dpu_secret", limit=4)
    assert result.report.unfinished == 3
    assert [(m.step, m.observed) for m in result.report.mismatches] == [
        (1, "not executed"),
        (2, "not executed"),
        (3, "not executed"),
    ]
    assert result.report.exit_code == 1


ALLOW_SRAM0 = "APU slave 0 mid 0x1 addr 0x2000_0000 mask 0xFF perm RW\n"


def test_unexecuted_expectations_are_mismatches(run_text):
    result = run_text(ALLOW_SRAM0 + "MASTER 0x1 READ 0x2000_0000 EXPECT OKAY\n" * 10 + "LIMIT 5\n")
    report = result.report
    assert (report.total, report.unfinished) == (2, 8)
    assert len(report.mismatches) == 8
    assert report.mismatches[0].step == 2
    assert report.mismatches[0].expected == "OKAY"
    assert report.exit_code == 1


def test_unexecuted_steps_without_expectations_pass(run_text):
    result = run_text(ALLOW_SRAM0 + "MASTER 0x1 READ 0x2000_0000 EXPECT ANY\n" * 10 + "LIMIT 5\n")
    assert result.report.unfinished == 8
    assert result.report.mismatches == []
    assert result.report.exit_code == 0


def test_unexecuted_rdata_check_is_a_mismatch(run_text):
    result = run_text(
        ALLOW_SRAM0
        + "MASTER 0x1 READ 0x2000_0000 EXPECT ANY\n"
        + "MASTER 0x1 READ 0x2000_0000 EXPECT ANY RDATA 0x0\n"
        + "LIMIT 2\n"
    )
    assert [(m.step, m.expected) for m in result.report.mismatches] == [(1, "RDATA 0x00000000")]


def test_invalid_utf8_is_a_parse_error(tmp_path: Path):
    scn = tmp_path / "binary.scn"
    scn.write_bytes(b"LIMIT 10\n\xff\xfe\n")
    with pytest.raises(ParseError) as excinfo:
        load_scenario(scn)
    assert excinfo.value.line == 2
    assert excinfo.value.token == "<invalid utf-8>"


def test_job_writes_trace(shipped, golden_dir, tmp_path: Path):
    target = tmp_path / "traces" / "dpu.trace"
    SimulationJob(shipped("dpu_secret"), trace_path=target).run()
    assert target.read_text() == (golden_dir / "dpu_secret.trace").read_text()


def test_run_jobs_keeps_input_order_and_reports_failures(shipped, tmp_path: Path):
    broken = tmp_path / "broken.scn"
    broken.write_text("APU slave 0 mid 0x1 addr 0x2000_0000 mask 0x0 perm 00\n")
    binary = tmp_path / "binary.scn"
    binary.write_bytes(b"\xff")
    jobs = [
        SimulationJob(shipped("apu_range")),
        SimulationJob(broken),
        SimulationJob(tmp_path / "missing.scn"),
        SimulationJob(binary),
        SimulationJob(shipped("srs_semaphore")),
    ]
    results = run_jobs(jobs, workers=3)
    assert isinstance(results[0], SimulationResult)
    assert isinstance(results[1], ParseError)
    assert isinstance(results[2], OSError)
    assert isinstance(results[3], ParseError)
    assert isinstance(results[4], SimulationResult)
    assert results[4].events[0].slave_id == 4
