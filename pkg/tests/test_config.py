import pytest
import yaml

from ctstreak.core.config_loader import config_from_dict, dump_config, parse_config, resolve_threads
from ctstreak.core.exceptions import ConfigurationError, FileSystemError
from ctstreak.core.phantom_loader import load_phantom

from .conftest import CONFIG_DIR, SMALL_GRID


def _write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


def test_shipped_configs_parse():
    config = parse_config(CONFIG_DIR / "two_disks.yaml")
    assert config.physics.mode == 'beam-hardening'
    assert config.phantom_path() == (CONFIG_DIR / "phantoms" / "two_disks.yaml").resolve()
    assert config.grid.n_s == 512
    assert config.artifact.n_controls == 200

    modes = {path.stem: parse_config(path).physics.mode for path in CONFIG_DIR.glob("*.yaml")}
    assert modes['monochromatic'] == 'monochromatic'
    assert modes['scatter'] == 'scatter'
    assert modes['noise'] == 'noise'


def test_defaults_are_filled(tmp_path):
    config = parse_config(_write(tmp_path, "phantom: builtin:two_disks\nphysics:\n  spectrum: {}\n"))
    assert config.grid.n_phi == 360
    assert config.physics.spectrum.e0 == 0.06
    assert config.mar.method == 'linear'
    assert config.phantom_path() is None


def test_unknown_key_is_named_with_its_line(tmp_path):
    text = "phantom: builtin:two_disks\ngrid:\n  n_phi: 90\n  bogus: 1\nphysics:\n  spectrum: {}\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, text))
    error = excinfo.value
    assert error.config_key == "grid.bogus"
    assert "Unknown configuration key 'grid.bogus'" in error.message
    assert error.line == 4


def test_yaml_syntax_error_reports_the_line(tmp_path):
    text = "phantom: builtin:two_disks\n  physics: 1\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, text))
    assert excinfo.value.line == 2
    assert "line 2" in excinfo.value.message


def test_exactly_one_physics_block(tmp_path):
    text = "phantom: builtin:two_disks\nphysics:\n  spectrum: {}\n  scatter: {c: 0.01}\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, text))
    assert excinfo.value.config_key == "physics"
    with pytest.raises(ConfigurationError):
        parse_config(_write(tmp_path, "phantom: builtin:two_disks\nphysics: {}\n"))


def test_detector_must_contain_the_field_of_view(tmp_path):
    text = "phantom: builtin:two_disks\ngrid:\n  s_max: 1.2\nphysics:\n  spectrum: {}\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, text))
    assert excinfo.value.config_key == "grid.s_max"
    assert excinfo.value.line == 3


def test_too_few_controls(tmp_path):
    text = "phantom: builtin:two_disks\nphysics:\n  spectrum: {}\nartifact:\n  n_controls: 10\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, text))
    assert excinfo.value.config_key == "artifact.n_controls"


def test_phantom_reference_problems(tmp_path):
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, "phantom: nowhere.yaml\nphysics:\n  spectrum: {}\n"))
    assert excinfo.value.config_key == "phantom"
    assert excinfo.value.line == 1

    with pytest.raises(ConfigurationError) as excinfo:
        parse_config(_write(tmp_path, "physics:\n  spectrum: {}\n"))
    assert "Missing required configuration key 'phantom'" in excinfo.value.message

    with pytest.raises(FileSystemError):
        parse_config(tmp_path / "absent.yaml")


def test_zero_width_spectrum_is_monochromatic(write_config):
    config = write_config(physics={'spectrum': {'e0': 0.06, 'delta': 0.0}})
    assert config.physics.mode == 'monochromatic'


def test_seed_override(write_config):
    config = write_config(physics={'noise': {'count': 2, 'seed': 7}}, seed=11)
    assert config.noise_seed() == 11
    assert config.artifact_seed() == 11
    assert write_config(physics={'noise': {'seed': 7}}).noise_seed() == 7


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("CTSTREAK_THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("CTSTREAK_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(configured=2) == 2
    assert resolve_threads(configured=2, override=5) == 5
    monkeypatch.setenv("CTSTREAK_THREADS", "many")
    with pytest.raises(ConfigurationError):
        resolve_threads()
    with pytest.raises(ConfigurationError):
        resolve_threads(override=0)


def test_dump_config_round_trip(write_config):
    config = write_config(grid=dict(SMALL_GRID, n_phi=90))
    text = dump_config(config)
    again = config_from_dict(yaml.safe_load(text))
    assert again.model_dump() == config.model_dump()
    assert list(yaml.safe_load(text))[:3] == ['phantom', 'grid', 'physics']


def test_mar_defaults_and_validation(tmp_path):
    mar = parse_config(CONFIG_DIR / "poisson_mar.yaml").mar
    assert mar.method == 'poisson'
    assert mar.edge_margin == 0
    assert mar.metal_guard
    text = "phantom: builtin:two_disks\nphysics:\n  spectrum: {}\nmar:\n  metal_tolerance: -0.1\n"
    with pytest.raises(ConfigurationError):
        parse_config(_write(tmp_path, text))


@pytest.mark.parametrize("name", ["two_disks", "poisson_mar", "single_disk", "shepp_logan_metals"])
def test_demo_configs_use_a_strong_metal_slope(name):
    config = parse_config(CONFIG_DIR / f"{name}.yaml")
    spectrum = config.physics.spectrum
    if spectrum.alpha_delta is None:
        assert load_phantom(config.phantom_path()).alpha_delta(spectrum.delta) == pytest.approx(-15.0)
    else:
        assert spectrum.alpha_delta == -15.0
