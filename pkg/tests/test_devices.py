import pytest

from trustfabric.devices import (
    Expect,
    MasterPort,
    ProgramStep,
    SharedRegisterSpace,
    SramModel,
    master_next,
    sram_access,
)
from trustfabric.errors import FabricStateError
from trustfabric.policy import AccessKind, Reason
from trustfabric.transmon import BusResponse, ResponseCode

R, W = AccessKind.READ, AccessKind.WRITE
OK = BusResponse(ResponseCode.OKAY, Reason.NONE, 2, 0x1234)
ERR = BusResponse(ResponseCode.ERROR, Reason.APU_NO_MATCH, 2)


def test_sram_is_zero_initialised():
    sram = SramModel(0x100)
    assert sram_access(sram, R, 0x40) == 0
    assert sram.snapshot() == {}


def test_sram_write_then_read():
    sram = SramModel(0x100)
    sram_access(sram, W, 0x10, 0xCAFE_F00D, cycle=3)
    assert sram_access(sram, R, 0x10, cycle=5) == 0xCAFE_F00D
    assert [(r.cycle, r.kind) for r in sram.log] == [(3, W), (5, R)]
    assert sram.snapshot() == {0x10: 0xCAFE_F00D}


def test_sram_rejects_bad_addresses():
    sram = SramModel(0x100)
    with pytest.raises(ValueError):
        sram_access(sram, R, 0x2)
    with pytest.raises(ValueError):
        sram_access(sram, R, 0x100)
    with pytest.raises(ValueError):
        SramModel(6)


def test_sram_backdoor_load_is_not_logged():
    sram = SramModel(0x100)
    sram.load(0x8, [1, 2, 3])
    assert [sram.peek(a) for a in (0x8, 0xC, 0x10)] == [1, 2, 3]
    assert sram.log == []


def test_shared_register_space():
    srs = SharedRegisterSpace(64)
    assert srs.size == 0x100
    assert srs.register_name(39) == "gpcfg39"
    srs.set_register(39, 0x1)
    assert srs.get_register(39) == 0x1
    assert srs.peek(39 * 4) == 0x1
    with pytest.raises(ValueError):
        srs.set_register(64, 0)


def test_expect_accepts():
    assert Expect.ANY.accepts(ResponseCode.ERROR)
    assert Expect.OKAY.accepts(ResponseCode.OKAY)
    assert not Expect.OKAY.accepts(ResponseCode.ERROR)
    assert Expect.ERROR.accepts(ResponseCode.ERROR)


def test_master_next_walks_the_program():
    port = MasterPort(3, (ProgramStep(R, 0x100, expect=Expect.OKAY), ProgramStep(W, 0x104, 7)))
    first = master_next(port, 0)
    assert first.mid == 3 and first.addr == 0x100 and first.issue_cycle == 0
    # one outstanding transaction at a time
    assert master_next(port, 1) is None

    second = master_next(port, 2, OK)
    assert second.kind is W and second.wdata == 7 and second.issue_cycle == 2
    assert first.complete_cycle == 2

    assert master_next(port, 4, ERR) is None
    assert port.done and port.remaining == 0
    assert port.mismatches == []


def test_master_counts_code_mismatches():
    port = MasterPort(1, (ProgramStep(R, 0x2000_F800, expect=Expect.ERROR),))
    master_next(port, 0)
    master_next(port, 2, OK)
    assert len(port.mismatches) == 1
    assert port.mismatches[0].expected == "ERROR"
    assert port.mismatches[0].observed == "OKAY"


def test_master_counts_read_data_mismatches():
    port = MasterPort(1, (ProgramStep(R, 0x0, expect=Expect.OKAY, expect_rdata=0x1234),
                          ProgramStep(R, 0x0, expect=Expect.OKAY, expect_rdata=0x9999)))
    master_next(port, 0)
    master_next(port, 2, OK)
    assert port.mismatches == []
    master_next(port, 4, OK)
    assert len(port.mismatches) == 1
    assert "0x00009999" in str(port.mismatches[0])


def test_empty_program_never_issues():
    port = MasterPort(0)
    assert port.done
    assert master_next(port, 0) is None
    assert master_next(port, 100) is None


def test_response_without_outstanding_transaction():
    port = MasterPort(0, (ProgramStep(R, 0),))
    with pytest.raises(FabricStateError):
        port.observe(OK)


def test_expire_records_steps_that_never_completed():
    port = MasterPort(
        1,
        (
            ProgramStep(R, 0x0, expect=Expect.OKAY),
            ProgramStep(R, 0x4, expect=Expect.ERROR),
            ProgramStep(R, 0x8),
            ProgramStep(R, 0xC, expect_rdata=0x7),
        ),
    )
    master_next(port, 0)
    master_next(port, 2, OK)
    port.expire()
    assert [(m.step, m.expected, m.observed) for m in port.mismatches] == [
        (1, "ERROR", "not executed"),
        (3, "RDATA 0x00000007", "not executed"),
    ]
