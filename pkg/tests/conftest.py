import pytest

from dpsqkd.detector import DetectorModel, JitterModel
from dpsqkd.params import preset

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for the acceptance summary."""
    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def preset_a():
    return preset("a")


@pytest.fixture
def preset_b():
    return preset("b")


@pytest.fixture
def noiseless():
    """Lossless link, perfect detector timing, no dark counts or interferometer error."""
    det = DetectorModel(quantum_efficiency=1.0, dark_rate=0.0, window=200e-12,
                        jitter=JitterModel(1e-12))
    return preset("a", detector=det, fiber_length=0.0, extra_loss_db=0.0,
                  baseline_error=0.0, mean_photon_number=0.01)
