"""Trainer test fixtures: a real export bundle, plus the acceptance summary.

The bundle is produced by driving the core pipeline (installed alongside in
this repo) over a synthetic database whose own-table cohort signatures are
noisy, so the cohort signal lives mostly in graph context: the regime where
pretraining and shortcut edges have headroom to help.
"""

from __future__ import annotations

import pytest

_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _results[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and (report.failed or report.skipped):
        _results[name] = "SKIP" if report.skipped else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria (trainer)")
    for name, outcome in _results.items():
        terminalreporter.write_line(f"[{outcome}] {name}")


@pytest.fixture(scope="session")
def export_bundle(tmp_path_factory):
    from relaug.cli import main as relaug_main
    from relaug.synth import SynthConfig, write_cohort_db

    root = tmp_path_factory.mktemp("bundle")
    data_dir = root / "data"
    out_dir = root / "out"
    write_cohort_db(
        data_dir, SynthConfig(seed=20, signature_noise=0.5, label_noise=0.05)
    )
    code = relaug_main([
        "all",
        "--manifest", str(data_dir / "manifest.json"),
        "--data-dir", str(data_dir),
        "--out-dir", str(out_dir),
        "--steps", "800",
        "--seed", "4",
    ])
    assert code == 0
    return out_dir / "export"
