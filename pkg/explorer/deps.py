import logging
from functools import lru_cache
from pathlib import Path

import tomli
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseSettings):
    """Runtime settings loaded from file and environment.

    Nothing here changes simulation results; experiment parameters live in
    :class:`explorer.experiment.ExperimentConfig`.
    """

    log_level: str = "WARNING"
    max_workers: int | None = None
    output_root: str = "runs"

    model_config = SettingsConfigDict(
        extra="ignore",
        env_prefix="EXPLORER_",
        env_file=("config/.env", ".env"),
        env_file_encoding="utf-8",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings,
        env_settings,
        dotenv_settings,
        file_secret_settings,
    ):
        """Place the TOML file below environment and dotenv sources."""

        return (
            init_settings,
            env_settings,
            dotenv_settings,
            cls._toml_config_settings_source,
            file_secret_settings,
        )

    @classmethod
    def _toml_config_settings_source(cls, settings: BaseSettings | None = None):
        config_path = Path("config/appsettings.toml")
        if not config_path.exists():
            return {}
        data = tomli.loads(config_path.read_text())
        values = {
            "log_level": data.get("logging", {}).get("level"),
            "max_workers": data.get("runtime", {}).get("max_workers"),
            "output_root": data.get("runtime", {}).get("output_root"),
        }
        return {key: value for key, value in values.items() if value is not None}


@lru_cache
def get_settings() -> Settings:
    """Return cached runtime settings."""

    return Settings()


def configure_logging(level: str | int | None = None) -> None:
    """Configure the root logger once for command-line use."""

    if level is None:
        level = get_settings().log_level
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
