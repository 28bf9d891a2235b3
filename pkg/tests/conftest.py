import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from opencavity.spectrum import make_model

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_model(rng, n, m, scale=0.05, n_abs=0, n_amp=0, complex_w=False, spread=1.0):
    freqs = np.sort(1.0 + spread * rng.random(n))
    w = scale * rng.standard_normal((n, m))
    if complex_w:
        w = w + 1j * scale * rng.standard_normal((n, m))
    kappa = scale * rng.standard_normal((n, n_abs)) if n_abs else None
    gamma = None
    if n_amp:
        # keep amplification weaker than the escape + absorption damping
        gamma = 0.3 * scale * rng.standard_normal((n, n_amp)) / np.sqrt(n_amp)
    return make_model(freqs, w, kappa=kappa, gamma=gamma)


@st.composite
def model_params(draw, max_n=6, max_m=3):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    scale = draw(st.floats(1e-3, 0.2))
    return n, m, seed, scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report: one line per criterion in the terminal summary ----------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and report.passed:
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if report.failed:
        _CRITERIA[number] = (title, "FAIL", detail or str(report.longrepr).splitlines()[-1])
    elif report.skipped:
        _CRITERIA[number] = (title, "SKIP", "")
    elif report.when == "call":
        _CRITERIA[number] = (title, "PASS", f"{detail} [{report.duration:.1f} s]")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}: {detail}")
