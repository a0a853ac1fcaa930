import numpy as np
import pytest

from neuralfx import AudioBuffer, render_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_corpus(n_items=3, seconds=0.25, sr=8000, seed=0):
    r = np.random.default_rng(seed)
    n = int(seconds * sr)
    t = np.arange(n) / sr
    return [AudioBuffer(0.5 * np.sin(2 * np.pi * (110 + 50 * i) * t)
                        + 0.05 * r.standard_normal(n), sr) for i in range(n_items)]


@pytest.fixture
def small_dataset(tmp_path):
    """Tiny tanh_drive dataset: 5 items x 2 knob settings at 8 kHz."""
    manifest = render_dataset("tanh_drive", [0.0, 1.0], make_corpus(5), tmp_path / "data",
                              (0.6, 0.2, 0.2), seed=0)
    return tmp_path / "data" / "manifest.json", manifest


# ------------------------------------------------------- acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "details": []})
    if not rep.passed:
        entry["ok"] = False
    if rep.when == "call":
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        detail = "; ".join(e["details"])
        line = f"criterion {n:>2} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def detail(request):
    """Attach a measured value to the acceptance line of the current test."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add
