import os
from pathlib import Path

import pytest


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\n[acceptance] {name}: {outcome}", flush=True)


def benchmark_dir(name: str) -> Path | None:
    """Locate a real benchmark dataset directory, if the user provided one."""
    candidates = []
    root = os.environ.get("GGF_DATA_DIR")
    if root:
        candidates.append(Path(root) / name)
    candidates.append(Path(__file__).parent / "data" / name)
    for cand in candidates:
        if cand.is_dir() and any(cand.iterdir()):
            return cand
    return None


@pytest.fixture
def agree_dir(tmp_path):
    from helpers import write_agree_fixture
    return write_agree_fixture(tmp_path / "agree")
