from pathlib import Path

from trustfabric.devices import Mismatch
from trustfabric.policy import AccessKind, Reason
from trustfabric.trace import RunReport, TraceEvent, TraceMismatch, compare_traces, render_trace, write_trace
from trustfabric.transmon import BusResponse, ResponseCode, Transaction


def _event(cycle, code=ResponseCode.OKAY, reason=Reason.NONE, kind=AccessKind.READ, data=0):
    return TraceEvent(cycle, 0, 0x1, kind, 0x2000_F800, data, code, reason)


def test_event_format():
    txn = Transaction(0x1, AccessKind.READ, 0x2000_F800)
    event = TraceEvent.from_response(0, txn, BusResponse(ResponseCode.ERROR, Reason.APU_NO_MATCH, 6))
    assert str(event) == (
        "cycle=6 slave=0 mid=0x1 op=R addr=0x2000f800 data=0x00000000 resp=ERR reason=ApuNoMatch"
    )


def test_write_events_carry_the_write_data():
    txn = Transaction(0x2a, AccessKind.WRITE, 0x5000_009C, 0x1)
    event = TraceEvent.from_response(4, txn, BusResponse(ResponseCode.OKAY, Reason.NONE, 3))
    assert str(event) == (
        "cycle=3 slave=4 mid=0x2a op=W addr=0x5000009c data=0x00000001 resp=OKAY reason=None"
    )


def test_write_trace(tmp_path: Path):
    events = [_event(2), _event(4, ResponseCode.ERROR, Reason.APU_NO_MATCH)]
    target = tmp_path / "out" / "run.trace"
    write_trace(events, target)
    raw = target.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("ascii") == render_trace(events)
    assert raw.count(b"\n") == 2


def test_compare_traces():
    lines = ["a\n", "b\n", "c\n"]
    assert compare_traces(lines, ["a", "b", "c"]) == []
    assert compare_traces(lines, ["a", "x", "c"]) == [TraceMismatch(2, "b", "x")]
    assert compare_traces(lines, ["a", "b"]) == [TraceMismatch(3, "c", None)]
    assert compare_traces([], ["z"]) == [TraceMismatch(1, None, "z")]


def test_report_counts_and_key_order():
    events = [
        _event(2),
        _event(4, ResponseCode.ERROR, Reason.APU_NO_MATCH),
        _event(6, ResponseCode.ERROR, Reason.DPU_DATA_BLOCKED, AccessKind.WRITE, 0x0BAD_BEEF),
        _event(8, ResponseCode.ERROR, Reason.DPU_DATA_BLOCKED, AccessKind.WRITE, 0x0BAD_BEEF),
    ]
    report = RunReport.from_events("demo", events, final_cycle=8)
    assert (report.total, report.allowed, report.denied) == (4, 1, 3)
    assert report.denied_by_reason[Reason.DPU_DATA_BLOCKED] == 2
    assert report.exit_code == 0
    assert [line.split(":")[0] for line in report.lines()] == [
        "scenario",
        "total",
        "allowed",
        "denied",
        "denied.ApuNoMatch",
        "denied.ApuPermission",
        "denied.DpuDataBlocked",
        "denied.DecodeError",
        "mismatches",
        "unfinished",
        "final_cycle",
    ]
    assert "denied.DpuDataBlocked: 2\n" in report.render()


def test_report_exit_code():
    mismatch = Mismatch(0x1, 0, "OKAY", "ERR")
    assert RunReport.from_events("x", [], mismatches=[mismatch]).exit_code == 1
    assert RunReport.from_events("x", [], unfinished=3).exit_code == 0
    report = RunReport.from_events("x", [], mismatches=[mismatch])
    assert report.lines()[-1] == "  mismatch mid=0x1 step=0: expected OKAY, observed ERR"
