import pytest
import yaml

from ctstreak.cli import main

from .conftest import SMALL_GRID


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump({
        'phantom': 'builtin:two_disks',
        'grid': dict(SMALL_GRID),
        'physics': {'spectrum': {'e0': 0.06, 'delta': 0.02}},
        'artifact': {'n_controls': 50},
        'output_dir': str(tmp_path / "run"),
    }), encoding='utf-8')
    return path


def test_run_then_verify(config_file, tmp_path, capsys):
    assert main(["--config", str(config_file), "run"]) == 0
    output = capsys.readouterr().out
    assert "mode=beam-hardening predicted=4" in output

    run_dir = tmp_path / "run"
    assert main(["verify", str(run_dir)]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")

    (run_dir / "streaks.csv").write_text("tampered\n")
    assert main(["--out-dir", str(run_dir), "verify"]) == 1
    output = capsys.readouterr().out
    assert "checksum mismatch: streaks.csv" in output
    assert "1 problem(s)" in output


def test_predict_prints_lines(tmp_path, capsys):
    assert main(["--out-dir", str(tmp_path), "predict", "--phantom", "builtin:two_disks"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "4 predicted line(s)"
    assert len(lines) == 5
    assert (tmp_path / "streaks.csv").is_file()


def test_stage_commands_chain_through_files(config_file, tmp_path, capsys):
    out = tmp_path / "stages"
    base = ["--config", str(config_file), "--out-dir", str(out)]
    assert main(base + ["project"]) == 0
    assert main(base + ["recon", "--sinogram", str(out / "sinogram.csv")]) == 0
    assert main(base + ["predict"]) == 0
    assert main(base + ["score", "--image", str(out / "recon.raw"), "--streaks", str(out / "streaks.csv")]) == 0
    assert main(base + ["mar", "--sinogram", str(out / "sinogram.raw"), "--method", "poisson"]) == 0
    assert main(base + ["report", "--image", str(out / "recon.raw"), "--streaks", str(out / "streaks.csv")]) == 0
    for name in ("sinogram.raw", "recon.raw", "recon.pgm", "streaks.csv", "report.csv", "report.txt",
                 "mar_sinogram.raw", "overlay.png"):
        assert (out / name).is_file(), name
    assert "predicted lines: 4" in capsys.readouterr().out


def test_phantom_render(tmp_path):
    code = main(["--out-dir", str(tmp_path), "phantom-render", "--phantom", "builtin:quarter_disk",
                 "--n", "32", "--write-yaml", str(tmp_path / "quarter.yaml")])
    assert code == 0
    assert (tmp_path / "phantom.raw").is_file()
    assert (tmp_path / "quarter.yaml").is_file()


def test_usage_errors_exit_with_two(tmp_path, config_file, capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    code = main(["--out-dir", str(tmp_path), "score", "--image", "x.raw", "--streaks", "y.csv",
                 "--n-controls", "10"])
    assert code == 2
    assert "--n-controls must be >= 50" in capsys.readouterr().err
    assert main(["--out-dir", str(tmp_path), "predict", "--phantom", "builtin:two_disks", "--mode", "noise"]) == 2
    with pytest.raises(SystemExit) as excinfo:
        main(["--threads", "0", "run"])
    assert excinfo.value.code == 2


def test_processing_errors_exit_with_one(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "missing.yaml"), "run"]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(["--out-dir", str(tmp_path), "predict", "--phantom", "builtin:nothing"]) == 1
