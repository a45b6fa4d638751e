from pathlib import Path

import pytest
import yaml

from ctstreak.core.config_loader import parse_config
from ctstreak.core.grid_models import ImageGrid, SinogramGrid
from ctstreak.core.phantom_library import metal_and_bone, quarter_disk, single_disk, two_disks


REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"

SMALL_GRID = {'n_phi': 120, 'n_s': 257, 's_max': 1.5, 'n': 64, 'fov': 1.0}


@pytest.fixture
def two_disk_phantom():
    return two_disks()


@pytest.fixture
def single_disk_phantom():
    return single_disk()


@pytest.fixture
def quarter_disk_phantom():
    return quarter_disk()


@pytest.fixture
def bone_phantom():
    return metal_and_bone()


@pytest.fixture
def sino_grid():
    return SinogramGrid(n_phi=120, n_s=257, s_max=1.5)


@pytest.fixture
def image_grid():
    return ImageGrid(n=64, fov=1.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a small-grid pipeline config and return it parsed.

    Keyword overrides replace top-level keys of the default beam-hardening
    two-disk configuration.
    """
    def _write(name: str = "config.yaml", **overrides):
        data = {
            'phantom': 'builtin:two_disks',
            'grid': dict(SMALL_GRID),
            'physics': {'spectrum': {'e0': 0.06, 'delta': 0.02}},
            'artifact': {'n_controls': 50, 'seed': 0},
            'mar': {'method': 'linear'},
            'output_dir': str(tmp_path / "out"),
        }
        data.update(overrides)
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=False), encoding='utf-8')
        return parse_config(path)

    return _write
