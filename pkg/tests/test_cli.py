import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from optochaos.cli import build_parser, main, read_input
from optochaos.errors import PreconditionError
from optochaos.model import Trajectory
from optochaos.synthesis import TimeSeries

SHORT = """\
[system]
delta_per_omega_m = {delta}
drive_amplitude_per_omega_m = {drive}
noise_sigma_per_sqrt_omega_m = 0.03

[integration]
steps_per_period = 128
decimation = 5
t_transient_periods = 100
t_record_periods = 400
seed = 4
"""


@pytest.fixture
def short_cfg(tmp_path):
    def make(name="short", delta=-1.6, drive=3.5, record=400):
        path = tmp_path / f"{name}.cfg"
        text = SHORT.format(delta=delta, drive=drive)
        path.write_text(text.replace("t_record_periods = 400", f"t_record_periods = {record}"))
        return str(path)
    return make


def run(*argv):
    return main([str(a) for a in argv])


def test_parser_lists_subcommands():
    choices = build_parser()._subparsers._group_actions[0].choices
    assert set(choices) == {"simulate", "synthesize", "segment", "spectrum", "portrait",
                            "classify", "sense", "sweep", "report"}


def test_global_flags_after_subcommand(tmp_path):
    args = build_parser().parse_args(["synthesize", "--duty", "0.5", "--ts", "1", "--duration", "4",
                                      "--seed", "3", "--out", str(tmp_path), "--jobs", "2"])
    assert (args.seed, args.out, args.jobs) == (3, str(tmp_path), 2)


def test_simulate_and_reload(tmp_path, short_cfg):
    assert run("simulate", "--config", short_cfg(), "--out", tmp_path) == 0
    traj = read_input(tmp_path / "trajectory.csv")
    assert isinstance(traj, Trajectory) and traj.seed == 4
    assert run("simulate", "--config", short_cfg(), "--seed", 9, "--out", tmp_path / "b") == 0
    assert read_input(tmp_path / "b" / "trajectory.csv").seed == 9


def test_simulate_divergence_exit_code(tmp_path, short_cfg):
    assert run("simulate", "--config", short_cfg(drive=1e9), "--out", tmp_path) == 3


def test_precondition_exit_codes(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path) == 2
    assert run("simulate", "--config", tmp_path / "missing.cfg", "--out", tmp_path) == 2
    assert run("synthesize", "--duty", "1.5", "--ts", "1", "--duration", "4", "--out", tmp_path) == 2
    assert run("synthesize", "--duty", "0.5", "--ts", "1", "--duration", "4", "--seed", -1) == 2
    assert "error:" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["segment"])
    assert exc.value.code == 2


def test_synthesize_segment_pipeline(tmp_path):
    assert run("synthesize", "--duty", "0.3", "--ts", "1", "--duration", "10", "--fs", "20480",
               "--seed", 3, "--out", tmp_path) == 0
    series = read_input(tmp_path / "synthetic.csv")
    assert isinstance(series, TimeSeries) and series.fs == 20480.0
    assert run("segment", "--input", tmp_path / "synthetic.csv", "--window", 256 / 20480,
               "--fit-duty-cycle", "--out", tmp_path / "seg") == 0
    doc = json.loads((tmp_path / "seg" / "segments.json").read_text())
    assert doc["chaotic_fraction"] == pytest.approx(0.3, abs=0.05)
    assert doc["duty_cycle"]["status"] == "ok"
    labels = np.loadtxt(tmp_path / "seg" / "labels.csv", delimiter=",", skiprows=1)
    assert set(np.unique(labels[:, 1])) == {0, 1}


def test_fit_duty_cycle_insufficient_epochs(tmp_path):
    run("synthesize", "--duty", "0", "--ts", "1000", "--duration", "4096", "--out", tmp_path)
    assert run("segment", "--input", tmp_path / "synthetic.csv", "--fit-duty-cycle",
               "--out", tmp_path / "seg") == 4


def test_spectrum_and_portrait(tmp_path):
    run("synthesize", "--duty", "0.5", "--ts", "1024", "--duration", "8192", "--out", tmp_path)
    assert run("spectrum", "--input", tmp_path / "synthetic.csv", "--nfft", 512, "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "spectrum.csv")))
    assert len(rows) == 1 + 257
    assert run("portrait", "--input", tmp_path / "synthetic.csv", "--bins", 32, "--out", tmp_path) == 0
    assert (tmp_path / "density.csv").is_file()


def test_classify_config(tmp_path, short_cfg):
    assert run("classify", "--config", short_cfg(), "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "regime.json").read_text())
    assert doc["regime"] == "periodic"


def test_classify_input(tmp_path):
    run("synthesize", "--duty", "1", "--ts", "1024", "--duration", "8192", "--out", tmp_path)
    assert run("classify", "--input", tmp_path / "synthetic.csv", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "regime.json").read_text())["regime"] == "chaotic"


def test_unreadable_input(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(PreconditionError):
        read_input(bad)
    assert run("spectrum", "--input", bad, "--out", tmp_path) == 2


def test_sense(tmp_path, short_cfg):
    cfgs = [short_cfg("calm", -1.6, record=800), short_cfg("wild", -1.9, record=800)]
    assert run("sense", "--configs", *cfgs, "--amplitude-per-omega-m", 0.03, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "sensing.json").read_text())
    assert [r["name"] for r in doc["reports"]] == ["calm", "wild"]
    assert doc["summary"]["chaotic_below_periodic"] is True
    assert (tmp_path / "ranking.csv").read_text().startswith("rank,name,regime,snr_db")


def test_sense_failures_set_exit_code(tmp_path, short_cfg, capsys):
    cfgs = [short_cfg("calm", -1.6), short_cfg("wild", -1.9)]
    assert run("sense", "--configs", *cfgs, "--out", tmp_path) == 2
    assert "cannot resolve" in capsys.readouterr().out
    doc = json.loads((tmp_path / "sensing.json").read_text())
    assert [r["status"] for r in doc["reports"]] == ["failed", "failed"]


def test_sweep_and_report(tmp_path):
    cfg = tmp_path / "sw.cfg"
    cfg.write_text("[sweep]\nfield = delta_per_omega_m\nvalues = -1.6, -1.9\nlyapunov = false\n"
                   "save_trajectory = false\n\n" + SHORT.format(delta=-1.6, drive=3.5).replace("delta_per_omega_m = -1.6\n", ""))
    assert run("sweep", "--config", cfg, "--seed", 11, "--out", tmp_path / "sw") == 0
    doc = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert doc["plan"]["master_seed"] == 11 and len(doc["rows"]) == 2
    assert (tmp_path / "sw" / "report.md").is_file()
    assert run("report", "--input", tmp_path / "sw", "--out", tmp_path / "rep") == 0
    assert (tmp_path / "rep" / "fraction_vs_value.csv").is_file()
    assert run("report", "--input", tmp_path / "nothing", "--out", tmp_path / "rep") == 2


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "optochaos.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
