import pytest

from ctstreak.core.exceptions import ConfigurationError
from ctstreak.core.logger import LOG_FILE_NAME, configure_logging, get_logger


@pytest.fixture
def console_only():
    yield
    configure_logging()


def test_fields_reach_the_log_file(tmp_path, console_only):
    configure_logging(log_dir=tmp_path / "logs", console_level='ERROR')
    get_logger("ctstreak.core.radon").info("FBP reconstruction complete", run_id="r1", n=64, duration_ms=1.5)
    configure_logging()
    text = (tmp_path / "logs" / LOG_FILE_NAME).read_text(encoding='utf-8')
    assert "r1" in text
    assert "| radon |" in text
    assert "FBP reconstruction complete (1.50ms) | n=64" in text


def test_unknown_level_is_rejected(console_only):
    with pytest.raises(ConfigurationError) as excinfo:
        configure_logging(console_level='LOUD')
    assert excinfo.value.config_key == "console_level"
