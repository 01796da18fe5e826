import pytest

from rhoperfect.synth import SynthSpec, generate


@pytest.fixture(scope="session")
def default_synth():
    """n=2000, m ~ U{3..20}, mu ~ U(1,5), sigma ~ U(0.2,1.5)."""
    return generate(SynthSpec(seed=20240601))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in RESULTS:
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {crit}: {detail}")
