from .settings import RunSettings, load_run_settings

__all__ = ["RunSettings", "load_run_settings"]
