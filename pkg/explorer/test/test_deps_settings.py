import logging

import pytest

from ..deps import Settings, configure_logging, get_settings


@pytest.fixture(autouse=True)
def clear_settings_cache():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_environment_variable_overrides_toml(tmp_path, monkeypatch):
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    (config_dir / "appsettings.toml").write_text(
        """
[logging]
level = "DEBUG"

[runtime]
output_root = "file-runs"
max_workers = 3
        """.strip()
    )

    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("EXPLORER_OUTPUT_ROOT", "env-runs")

    settings = Settings()

    assert settings.output_root == "env-runs"
    assert settings.log_level == "DEBUG"
    assert settings.max_workers == 3

    monkeypatch.delenv("EXPLORER_OUTPUT_ROOT")
    settings_from_file = Settings()
    assert settings_from_file.output_root == "file-runs"


def test_defaults_without_config_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("EXPLORER_LOG_LEVEL", "EXPLORER_MAX_WORKERS", "EXPLORER_OUTPUT_ROOT"):
        monkeypatch.delenv(name, raising=False)

    settings = get_settings()

    assert settings.log_level == "WARNING"
    assert settings.max_workers is None
    assert settings.output_root == "runs"
    assert get_settings() is settings


def test_configure_logging_accepts_level_names(monkeypatch):
    root = logging.getLogger()
    previous = root.level
    try:
        configure_logging("debug")
        assert root.level == logging.DEBUG
        configure_logging("not-a-level")
        assert root.level == logging.WARNING
    finally:
        root.setLevel(previous)
