from importlib.resources import files
from pathlib import Path

import pytest

from trustfabric.engine import simulate
from trustfabric.scenario import parse


@pytest.fixture
def shipped():
    """Return the path of a scenario file shipped with the package."""

    def _path(name: str) -> Path:
        return Path(str(files("trustfabric") / "scenarios" / f"{name}.scn"))

    return _path


@pytest.fixture
def run_text():
    def _run(text: str, limit=None):
        return simulate(parse(text), "<test>", limit)

    return _run


@pytest.fixture
def golden_dir() -> Path:
    return Path(__file__).parent / "golden"
