from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

# Nothing is served; the key only satisfies Django's startup checks.
SECRET_KEY = config("SECRET_KEY", default="netreplica-local-only")
DEBUG = config("NETREPLICA_DEBUG", default=False, cast=bool)
ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    # Third party apps
    "rest_framework",
    # Local apps
    "traces",  # trace ingest and host decomposition
    "profiles",  # time series, prefix tree, windows, metrics
    "store",  # indexed profile store
    "replay",  # filtering, trimming, sampling
    "simulator",  # bottleneck link simulation
    "evaluation",  # DTW, Jensen, Mahalanobis
    "runner",  # management commands
]

# Default database is only used by the test runner; profile stores attach
# their own sidecar SQLite files at runtime (see store.store).
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "netreplica.sqlite3",
    }
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "UNAUTHENTICATED_USER": None,
}

# NETREPLICA_SEED, NETREPLICA_JOBS and the other run parameters are read by settings.RunSettings.
NETREPLICA = {
    "DATA_DIR": Path(config("NETREPLICA_DATA_DIR", default=str(BASE_DIR / "data"))),
}

LOG_LEVEL = config("NETREPLICA_LOG_LEVEL", default="DEBUG" if DEBUG else "INFO")

# Logging configuration
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        app: {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        }
        for app in (
            "traces",
            "profiles",
            "store",
            "replay",
            "simulator",
            "evaluation",
            "runner",
        )
    },
}
