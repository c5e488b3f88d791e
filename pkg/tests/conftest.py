import pytest

from lapt import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or load cached) JIT kernels once so timed criteria measure
    # the operations, not compilation.
    _kernels.warm_up()


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    print(f"\n[acceptance] {'PASS' if report.passed else 'FAIL'}: {name}")
