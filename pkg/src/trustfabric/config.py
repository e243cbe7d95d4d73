"""
config.py - topology defaults.

The default system is four core chiplets of 16 cores each (64 masters)
and four 1 MB SRAM chiplets, plus the shared register space.
Scenario files override any of these values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

MIB = 1 << 20

DEFAULT_MASTERS = 64
DEFAULT_SLAVES = 4
DEFAULT_PRS_APU = 16
DEFAULT_PRS_DPU = 16

SRAM_BASE = 0x2000_0000
SRAM_SIZE = MIB
SRAM_STRIDE = MIB

SRS_BASE = 0x5000_0000
SRS_REGS = 64

DEFAULT_LIMIT = 10_000


@dataclass(frozen=True)
class Topology:
    num_masters: int = DEFAULT_MASTERS
    num_slaves: int = DEFAULT_SLAVES
    prs_apu: int = DEFAULT_PRS_APU
    prs_dpu: int = DEFAULT_PRS_DPU

    @property
    def srs_slave_id(self) -> int:
        """The SRS block sits behind its own TRANSMON, numbered after the SRAMs."""
        return self.num_slaves

    @property
    def slave_ids(self) -> range:
        return range(self.num_slaves + 1)

    def default_sram_base(self, slave_id: int) -> int:
        return SRAM_BASE + slave_id * SRAM_STRIDE


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    """Root logger setup for the command-line tools; logs go to stderr."""
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)
