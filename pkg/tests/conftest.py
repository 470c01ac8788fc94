from pathlib import Path

import pytest

from psafe import MonitorConfig, compile_source, lower

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_PROGRAM = REPO_ROOT / "programs" / "demo.psafe"
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture(scope="session")
def demo_source() -> str:
    return DEMO_PROGRAM.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def demo_typed(demo_source):
    return compile_source(demo_source, str(DEMO_PROGRAM))


@pytest.fixture(scope="session")
def demo_table(demo_typed):
    return lower(demo_typed, MonitorConfig())
