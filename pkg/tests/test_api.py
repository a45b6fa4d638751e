import pytest

import ctstreak as cs


def test_public_workflow(write_config, tmp_path):
    config = write_config(grid={'n_phi': 90, 'n_s': 129, 's_max': 1.5, 'n': 48, 'fov': 1.0})
    phantom = cs.load_phantom("builtin:two_disks")
    sinogram, spikes = cs.simulate(phantom, config)
    assert spikes is None
    assert sinogram.values.shape == (90, 129)

    image = cs.reconstruct(sinogram, n=48)
    lines = cs.predict(phantom)
    assert len(lines) == 4
    report = cs.score(image, lines, phantom=phantom, n_controls=50)
    assert len(report.measured) == 4

    corrected = cs.reduce_metal_artifacts(sinogram, phantom, method='linear')
    assert corrected.metadata['mar'] == 'linear'

    result = cs.run(config, out_dir=tmp_path / "api_run")
    assert cs.verify(result.out_dir) == []


def test_set_logs_validates_levels(tmp_path):
    cs.set_logs(tmp_path / "logs", console_level="WARNING")
    assert (tmp_path / "logs").is_dir()
    with pytest.raises(cs.ConfigurationError):
        cs.set_logs(console_level="LOUD")
    cs.set_logs(console_level="INFO")


def test_errors_share_one_base():
    with pytest.raises(cs.CTStreakError):
        cs.load_phantom("builtin:missing")
    assert issubclass(cs.GeometryError, cs.ValidationError)
    assert issubclass(cs.SolverError, cs.ProcessingError)
    assert issubclass(cs.ConfigurationError, cs.CTStreakError)
