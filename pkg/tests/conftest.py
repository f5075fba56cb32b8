import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n): acceptance criterion number reported in the summary")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    results = item.config._acceptance
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(item.user_properties).get("detail", "")
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        prev = results.get(n)
        # a criterion fails if any of its tests fails
        if prev is None or status == "FAIL" or prev[0] == "SKIP":
            results[n] = (status, item.name, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, name, detail = results[n]
        line = f"criterion {n:>2}: {status}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Six fixture records (two of each kind) on disk, plus their index."""
    from ecgsynth.fixtures import write_fixture_dataset
    root = tmp_path_factory.mktemp("small")
    index = write_fixture_dataset(root, 6, seed=3)
    return root, index


def fixture_config(root, index, out, **overrides):
    from ecgsynth.config import Config
    cfg = Config(records_dir=str(root / "records"), index_csv=str(index),
                 output_root=str(out))
    return cfg.with_overrides(**overrides) if overrides else cfg


@pytest.fixture(scope="session")
def generated_small(small_dataset, tmp_path_factory):
    """The six-record dataset rendered once; treat the tree as read-only."""
    from ecgsynth.pipeline import run
    root, index = small_dataset
    out = tmp_path_factory.mktemp("small_out")
    report = run(fixture_config(root, index, out))
    return out, report
