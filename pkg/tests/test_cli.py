from pathlib import Path

import pandas as pd
import pytest

from setid import cli, selftest
from setid.core import NumericError
from setid.selftest import CheckResult

HERE = Path(__file__).parent
CONFIGS = HERE / "example_configs"


def test_selftest_passes():
    assert cli.main(["selftest"]) == 0


def test_selftest_failure(monkeypatch):
    monkeypatch.setattr(
        cli, "run_selftest", lambda: [CheckResult(name="broken", passed=False, detail="x")]
    )
    assert cli.main(["selftest"]) == 1


def test_numeric_failure(monkeypatch):
    def fail():
        raise NumericError("barrier continuation did not converge")

    monkeypatch.setattr(cli, "run_selftest", fail)
    assert cli.main(["selftest"]) == 3


def test_coverage_command(tmp_path):
    code = cli.main(
        ["coverage", "-c", str(CONFIGS / "coverage.yml"), "--out", str(tmp_path), "--seed", "5"]
    )
    assert code == 0
    rows = pd.read_csv(tmp_path / "coverage_quick" / "coverage_rows.csv")
    assert len(rows) == 8
    assert (tmp_path / "coverage_quick" / "summary.txt").exists()


def test_hj_command(tmp_path):
    code = cli.main(
        ["hj", "-c", str(CONFIGS / "hj.yml"), "--out", str(tmp_path), "--run-id", "app"]
    )
    assert code == 0
    for name in ("hj_theta_draws", "hj_support", "hj_boundary", "hj_coverage"):
        assert (tmp_path / "app" / f"{name}.csv").exists()


def test_experiment_mismatch(tmp_path):
    code = cli.main(["hj", "-c", str(CONFIGS / "coverage.yml"), "--out", str(tmp_path)])
    assert code == 2


def test_invalid_config(tmp_path):
    code = cli.main(["coverage", "-c", str(CONFIGS / "bad_coverage.yml"), "--out", str(tmp_path)])
    assert code == 2


def test_config_must_be_mapping(tmp_path):
    path = tmp_path / "list.yml"
    path.write_text("- 1\n- 2\n")
    assert cli.main(["coverage", "-c", str(path), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "argv",
    [["coverage", "--unknown"], ["coverage", "--threads", "0"], ["nonsense"]],
)
def test_usage_errors(argv):
    assert cli.main(argv) == 2


def test_selftest_reports_failed_check(monkeypatch):
    monkeypatch.setitem(
        selftest.CHECKS, "broken", lambda: selftest._require(False, "largest gap 0.1")
    )
    results = selftest.run_selftest()
    failed = [res for res in results if not res.passed]
    assert [res.name for res in failed] == ["broken"]
    assert failed[0].detail == "largest gap 0.1"


@pytest.mark.parametrize("grid", ["full", "paper"])
def test_bench_full_grid(monkeypatch, tmp_path, grid):
    seen = []

    class Recorder:
        def __init__(self, experiment, **kwargs):
            seen.append(experiment)

        def __call__(self):
            return {}

    monkeypatch.setattr(cli, "ExperimentRun", Recorder)
    assert cli.main(["bench", "--grid", grid, "--out", str(tmp_path)]) == 0
    assert seen[0]["experiment"] == "timing"
    assert len(seen[0]["points"]) == 18
