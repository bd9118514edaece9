from pathlib import Path
from typing import Any, Dict, Tuple

from dotenv import dotenv_values
from pydantic.fields import FieldInfo
from pydantic_settings import PydanticBaseSettingsSource

from netreplica.exceptions import ArtifactIOError, ConfigError


def split_list(value):
    """Comma separated text to a list; lists pass through unchanged."""
    if value is None:
        return []
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ConfigFileSource(PydanticBaseSettingsSource):
    """
    Flat `key=value` run configuration file (dotenv syntax).

    Keys are the snake-case field names, matched case-insensitively.
    Unknown keys are rejected so that typos do not silently fall back to
    defaults.
    """

    def __init__(self, settings_cls, path=None):
        super().__init__(settings_cls)
        self.path = Path(path) if path is not None else None
        self.values = self._read()

    def _read(self):
        if self.path is None:
            return {}
        if not self.path.is_file():
            raise ArtifactIOError(f"config file not found: {self.path}")
        values = {}
        for key, value in dotenv_values(self.path).items():
            name = key.strip().lower()
            if name == "config_file" or name not in self.settings_cls.model_fields:
                raise ConfigError(f"unknown key in {self.path.name}", field=name)
            if value is not None and value.strip() != "":
                values[name] = value.strip()
        return values

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return self.values.get(field_name), field_name, False

    def __call__(self) -> Dict[str, Any]:
        return dict(self.values)
