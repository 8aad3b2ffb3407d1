import pandas as pd
import pytest

from harness.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_OK, build_parser, main
from storage import duck

BASE = """
[scenario]
name = "{name}"
kind = "scalar"
duration_s = {duration}
sample_period_s = 0.01
settle_skip_s = 0.5

[scalar]
a = {a}
x0 = 1.0

[trajectories.x]
kind = "constant"
breakpoints = [[0.0, 1.0]]
"""


def write(tmp_path, text, name="case.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def scenario_file(tmp_path, name="cli_case", duration=1.0, a=-0.5, extra=""):
    return write(tmp_path, BASE.format(name=name, duration=duration, a=a) + extra, f"{name}.toml")


def test_run_writes_trace_and_metrics(tmp_path, capsys):
    path = scenario_file(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == EXIT_OK
    assert (out / "cli_case_single_trace.csv").exists()
    assert (out / "cli_case_single_metrics.json").exists()
    assert "cli_case_single_trace.csv" in capsys.readouterr().out


def test_run_json_format(tmp_path):
    path = scenario_file(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out), "--format", "json"]) == EXIT_OK
    assert (out / "cli_case_single_trace.json").exists()


def test_ab_writes_summary(tmp_path):
    path = scenario_file(tmp_path, extra='\n[adc.x]\nbits = 10\nfsr = 4.0\nrange_min = -2.0\n')
    out = tmp_path / "out"
    assert main(["ab", str(path), "--out", str(out), "--skip-settle", "0.2"]) == EXIT_OK
    summary = pd.read_csv(out / "cli_case_ab_summary.csv")
    assert list(summary["variant"]) == ["baseline", "compensated"]


def test_sweep_writes_summary(tmp_path):
    src = tmp_path / "scenarios"
    src.mkdir()
    scenario_file(src, name="first")
    scenario_file(src, name="second")
    out = tmp_path / "out"
    assert main(["sweep", str(src), "--out", str(out)]) == EXIT_OK
    summary = pd.read_csv(out / "sweep_summary.csv")
    assert set(summary["scenario"]) == {"first", "second"}


@pytest.mark.parametrize(
    "text",
    [
        "[scenario\nname = ",
        BASE.format(name="bad", duration=1.005, a=0.0),
        BASE.format(name="bad", duration=1.0, a=0.0) + "\n[engine]\ntau_e = 0.5\n",
        BASE.format(name="bad", duration=1.0, a=0.0) + "\n[loops.x]\nrho = 1.5\n",
    ],
)
def test_configuration_errors_exit_1(tmp_path, text):
    path = write(tmp_path, text)
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_missing_file_exits_1(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_numeric_failure_exits_2(tmp_path):
    extra = '\n[injection.x]\nmode = "multiplicative"\nbeta = 3.0\n'
    path = scenario_file(tmp_path, duration=10.0, a=500.0, extra=extra)
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_NUMERIC


def test_strict_invariant_violation_exits_3(tmp_path):
    extra = (
        '\n[loops.x.adapt]\nmode = "additive"\ngain = 0.02\nbound = 1.0\n'
        '\n[injection.x]\nmode = "additive"\nalpha = 5.0\n'
    )
    path = scenario_file(tmp_path, extra=extra)
    out = str(tmp_path / "out")
    assert main(["run", str(path), "--out", out, "--strict-invariants"]) == EXIT_INVARIANT
    assert main(["run", str(path), "--out", out]) == EXIT_OK


def test_db_flag_registers_runs(tmp_path, tmp_db):
    path = scenario_file(tmp_path)
    assert main(["run", str(path), "--out", str(tmp_path / "out"), "--db", str(tmp_db)]) == EXIT_OK
    runs = duck.list_runs()
    assert list(runs["run_id"]) == ["cli_case_single"]


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
