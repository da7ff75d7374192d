import numpy as np
import pytest

from sehfs._kernels import _fallback

try:
    from sehfs._kernels import _core
except ImportError:  # compiled core not built
    _core = None

KERNEL_BACKENDS = [pytest.param(_fallback, id="python")]
if _core is not None:
    KERNEL_BACKENDS.append(pytest.param(_core, id="cython"))

_ACCEPTANCE = []


@pytest.fixture(params=KERNEL_BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    # skipif/skip marks resolve during setup; everything else during call
    if not (report.when == "call" or (report.when == "setup" and report.skipped)):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    _ACCEPTANCE.append((marker.kwargs.get("id", item.name), status, marker.kwargs.get("title", ""), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, title, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0][2:])):
        line = f"{cid:<5} {status:<4} {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
