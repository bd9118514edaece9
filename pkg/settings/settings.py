from pathlib import Path
from typing import Optional

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from netreplica.exceptions import ConfigError
from .common import ConfigFileSource
from .evaluation import EvaluationSettings
from .grid import GridSettings
from .ingest import IngestSettings
from .pipeline import PipelineSettings
from .replay import ReplaySettings
from .simulation import SimulationSettings


class RunSettings(
    IngestSettings,
    PipelineSettings,
    ReplaySettings,
    SimulationSettings,
    EvaluationSettings,
    GridSettings,
):
    """
    Resolved parameters of one toolchain invocation.

    Sources, highest priority first: keyword arguments (CLI flags), the
    run configuration file, NETREPLICA_* environment variables (also read
    from .env), field defaults.
    """

    seed: int = Field(0, ge=0, lt=2**64)
    config_file: Optional[Path] = None

    model_config = SettingsConfigDict(env_prefix="NETREPLICA_", env_file=".env", extra="ignore")

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        return (
            init_settings,
            ConfigFileSource(settings_cls, init_settings.init_kwargs.get("config_file")),
            env_settings,
            dotenv_settings,
        )

    def as_parameters(self):
        """JSON-ready parameters for run manifests."""
        return self.model_dump(mode="json", exclude={"config_file"})


def load_run_settings(config_file=None, **overrides):
    """
    Build RunSettings, treating None overrides as "not given on the command line".

    Raises:
        ConfigError: naming the first invalid field
    """
    values = {key: value for key, value in overrides.items() if value is not None}
    if config_file is not None:
        values["config_file"] = config_file
    try:
        return RunSettings(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or None
        message = error["msg"].removeprefix("Value error, ")
        raise ConfigError(message, field=field)
