import pytest

from sfnsleep.config import load_config


@pytest.fixture(scope="session")
def video_a():
    return load_config("videoA.cfg")


@pytest.fixture(scope="session")
def video_b():
    return load_config("videoB.cfg")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
