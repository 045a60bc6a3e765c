"""Shared fixtures and the acceptance summary printer."""

import numpy as np
import pytest

from vidprint.preprocess import PreprocessConfig
from vidprint.synthetic import SyntheticSpec, easy_pair, gen_synthetic_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """12 classes x 3 trials on the easy pair, 240 s; fast enough for most
    orchestration tests."""
    spec = SyntheticSpec(
        n_classes=12, trials_per_class=3, platform_models=easy_pair(),
        duration_s=240.0, seed=7,
    )
    return gen_synthetic_dataset(spec)


@pytest.fixture(scope="session")
def small_pre_config():
    return PreprocessConfig(bin_s=10.0, duration_s=240.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((name, status))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
