from __future__ import annotations

import pytest

from nwdaf_testbed import harness
from nwdaf_testbed.scenario import load_scenario

ONE_DAY_S = 86_400.0


@pytest.fixture(scope="session")
def default_14d(tmp_path_factory):
    """The bundled two-week scenario at seed 42, run once per session."""
    out = tmp_path_factory.mktemp("default14")
    return harness.run(load_scenario("default"), out), out


@pytest.fixture(scope="session")
def default_1d(tmp_path_factory):
    out = tmp_path_factory.mktemp("default1")
    return harness.run(load_scenario("default", duration_s=ONE_DAY_S), out), out


@pytest.fixture(scope="session")
def cyclic_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cyclic")
    return harness.run(load_scenario("cyclic"), out), out


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(tag: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{tag}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, f"{tag}: {detail}"

    return report
