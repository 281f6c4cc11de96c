import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def oracles():
    return json.loads((HERE / "data" / "oracles.json").read_text())


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """A small synthetic market world plus a fast config, written once per session."""
    from fieldattr.cli import main

    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d), "--n-stocks", "8", "--n-days", "900", "--seed", "3"]) == 0
    cfg = json.loads((d / "config.json").read_text())
    cfg.update({"placebo_count": 10, "bootstrap_draws": 100, "windows": [30, 60], "granger_max_lag": 5,
                "horizons": [20, 40]})
    (d / "fast.json").write_text(json.dumps(cfg))
    return d


ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict(request):
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""
    def record(tag: str, ok: bool, detail: str):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES[tag] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[tag])
