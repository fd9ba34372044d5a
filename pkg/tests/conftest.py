import pytest

from occbench.occluders import OccluderSet
from occbench.toy import toy_sprites, toy_video, write_toy_dataset

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def sprites():
    return toy_sprites()


@pytest.fixture(scope="session")
def occluder_set(sprites):
    return OccluderSet(tuple(sprites))


@pytest.fixture(scope="session")
def video():
    return toy_video("v00")


@pytest.fixture()
def toy_dataset(tmp_path):
    return write_toy_dataset(tmp_path / "data", n_videos=2, frame_count=6)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.get_closest_marker("acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE.append((doc, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    merged = {}
    for doc, outcome in _ACCEPTANCE:
        merged[doc] = merged.get(doc, True) and outcome == "passed"
    number = lambda doc: int("".join(ch for ch in doc.split(":")[0] if ch.isdigit()) or 0)
    terminalreporter.section("acceptance criteria")
    for doc in sorted(merged, key=number):
        terminalreporter.write_line(f"{'PASS' if merged[doc] else 'FAIL'}  {doc}")
