"""Command-line surface: happy paths and exit-code contract."""

import json

import numpy as np
import pytest

from pulsecancel.cli import main
from pulsecancel.ingest import read_raw_cube, read_reference_trace


def run_cli(*args):
    try:
        return main(list(args))
    except SystemExit as exc:  # argparse-level usage failures
        return int(exc.code)


SCENARIO = {
    "duration_s": 40.0,
    "breathing_bpm": 15.6,
    "heartbeat_bpm": 76.6,
    "breathing_harmonics": [[1.8e-3, 0.0], [7e-4, 0.3], [2e-4, 0.9],
                            [5.5e-4, 0.0]],
    "heartbeat_harmonics": [[3.2e-4, 0.0], [1.6e-4, 0.5]],
    "intermod_tones": [["HR-RR", 2.2e-4, 0.0], ["HR+RR", 1.2e-4, 0.7],
                       ["HR+2RR", 1.2e-4, 1.1]],
    "complex_noise_std": 0.05,
    "seed": 11,
}


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scen") / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return str(path)


@pytest.fixture(scope="module")
def synth_outputs(scenario_file, tmp_path_factory):
    """One cube + truth rendered once for the read-only CLI tests."""
    outdir = tmp_path_factory.mktemp("cube")
    cube = outdir / "cube.bin"
    truth = outdir / "truth.csv"
    code = run_cli("synth", "--scenario", scenario_file, "--out", str(cube),
                   "--truth", str(truth))
    assert code == 0
    return cube, truth


class TestSynth:
    def test_writes_cube_sidecar_and_truth(self, synth_outputs):
        cube_path, truth_path = synth_outputs
        assert cube_path.stat().st_size == 4000 * 200 * 4
        assert cube_path.with_suffix(".json").exists()
        cube = read_raw_cube(cube_path)
        assert cube.n_frames == 4000
        truth = read_reference_trace(truth_path)
        assert np.all(truth.bpm() == 76.6)
        assert truth.times()[0] == 10.0

    def test_seed_override_changes_the_noise(self, scenario_file, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.bin", "b.bin", "c.bin"))
        run_cli("synth", "--scenario", scenario_file, "--out", str(a))
        run_cli("synth", "--scenario", scenario_file, "--out", str(b),
                "--seed", "12")
        run_cli("synth", "--scenario", scenario_file, "--out", str(c),
                "--seed", "12")
        assert a.read_bytes() != b.read_bytes()
        assert b.read_bytes() == c.read_bytes()

    def test_outdir_env_names_the_default_output(self, scenario_file,
                                                 tmp_path, monkeypatch):
        outdir = tmp_path / "renders"
        outdir.mkdir()
        monkeypatch.setenv("PULSECANCEL_OUTDIR", str(outdir))
        assert run_cli("synth", "--scenario", scenario_file) == 0
        assert (outdir / "cube.bin").exists()


class TestRun:
    def test_trace_from_cube(self, synth_outputs, tmp_path):
        cube_path, _ = synth_outputs
        out = tmp_path / "trace.csv"
        code = run_cli("run", "--in", str(cube_path), "--method", "ahet",
                       "--out", str(out))
        assert code == 0
        trace = read_reference_trace(out)
        assert len(trace) == 21
        assert trace.times()[0] == 10.0
        assert abs(float(np.median(trace.bpm())) - 76.6) < 1.0

    def test_trace_to_stdout(self, synth_outputs, capsys):
        cube_path, _ = synth_outputs
        code = run_cli("run", "--in", str(cube_path), "--method",
                       "conventional", "--cpi", "30")
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "time_s,hr_bpm,tag,delta_hz"
        assert len(lines) == 12  # header + 11 sliding windows

    def test_scenario_source_synthesizes_on_the_fly(self, scenario_file,
                                                    tmp_path):
        out = tmp_path / "trace.csv"
        code = run_cli("run", "--scenario", scenario_file, "--method", "eca",
                       "--out", str(out))
        assert code == 0
        assert read_reference_trace(out).tags()[0] == "eca"


class TestCompare:
    def test_reports_per_method_rmse(self, synth_outputs, capsys):
        cube_path, truth_path = synth_outputs
        code = run_cli("compare", "--in", str(cube_path), "--truth",
                       str(truth_path))
        assert code == 0
        out = capsys.readouterr().out
        scores = {}
        for line in out.splitlines():
            method, value = line.split(" rmse_bpm=")
            scores[method.removeprefix("method=")] = float(value)
        assert set(scores) == {"conventional", "eca", "ahet"}
        # the masker fools plain peak tracking; the full pipeline holds on
        assert scores["ahet"] < 1.0
        assert scores["conventional"] > 5.0

    def test_truth_from_scenario_needs_no_csv(self, scenario_file, capsys):
        code = run_cli("compare", "--scenario", scenario_file, "--methods",
                       "ahet")
        assert code == 0
        assert "method=ahet rmse_bpm=" in capsys.readouterr().out


class TestBenchCommand:
    def test_writes_report_directory(self, tmp_path):
        outdir = tmp_path / "bench"
        code = run_cli("bench", "--family", "masking-b", "--seeds", "1",
                       "--cpis", "15", "--methods", "conventional",
                       "--duration", "60", "--no-timing",
                       "--out", str(outdir))
        assert code == 0
        assert (outdir / "rmse.csv").exists()
        assert (outdir / "intervals.csv").exists()
        assert not (outdir / "timing.csv").exists()
        summary = json.loads((outdir / "report.json").read_text())
        assert summary["family"] == "masking-b"
        assert summary["failed_runs"] == 0


class TestSpectra:
    def test_dumps_window_csvs(self, synth_outputs, tmp_path):
        cube_path, _ = synth_outputs
        outdir = tmp_path / "spectra"
        code = run_cli("spectra", "--in", str(cube_path), "--cancel",
                       "--max-windows", "2", "--out", str(outdir))
        assert code == 0
        files = sorted(p.name for p in outdir.iterdir())
        assert files == ["spectrum_00000.csv", "spectrum_00001.csv"]
        lines = (outdir / "spectrum_00000.csv").read_text().splitlines()
        assert lines[0] == "freq_hz,power"
        freq, power = lines[1].split(",")
        assert float(freq) == 0.0
        assert float(power) >= 0.0


class TestExitCodes:
    def test_both_sources_is_a_usage_error(self, scenario_file, tmp_path):
        code = run_cli("run", "--in", str(tmp_path / "x.bin"),
                       "--scenario", scenario_file)
        assert code == 1

    def test_missing_source_is_a_usage_error(self):
        assert run_cli("run") == 1

    def test_compare_from_cube_without_truth_is_a_usage_error(
            self, synth_outputs):
        cube_path, _ = synth_outputs
        assert run_cli("compare", "--in", str(cube_path)) == 1

    def test_missing_cube_file_is_a_data_error(self, tmp_path):
        assert run_cli("run", "--in", str(tmp_path / "ghost.bin")) == 2

    def test_invalid_scenario_json_is_a_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run_cli("run", "--scenario", str(bad)) == 2

    def test_unknown_scenario_key_is_a_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"breathing_rate": 0.26}))
        assert run_cli("synth", "--scenario", str(bad)) == 2

    def test_unknown_compare_method_is_a_data_error(self, scenario_file):
        code = run_cli("compare", "--scenario", scenario_file, "--methods",
                       "conventional,bogus")
        assert code == 2
