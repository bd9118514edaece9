from pathlib import Path
import json
import logging

from django.core.management.base import BaseCommand

from netreplica.exceptions import ArtifactIOError, handle_command_error
from settings import RunSettings, load_run_settings

logger = logging.getLogger("runner")


class NetReplicaCommand(BaseCommand):
    """
    Shared plumbing of the pipeline subcommands.

    Flags whose dest matches a RunSettings field are merged over the
    configuration file and environment; every failure leaves through
    handle_command_error so exit codes stay 1 (validation) or 2 (I/O).
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", dest="config_file", help="run configuration file (key=value)")
        parser.add_argument("--seed", type=int, help="random seed (falls back to the config file, then NETREPLICA_SEED)")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def load_settings(self, options):
        overrides = {name: options.get(name) for name in RunSettings.model_fields if name != "config_file"}
        return load_run_settings(options.get("config_file"), **overrides)

    def handle(self, *args, **options):
        try:
            settings = self.load_settings(options)
            self.run(settings, **options)
        except Exception as e:
            raise handle_command_error(e)

    def run(self, settings, /, **options):
        # positional-only: Django's own --settings option also arrives in options
        raise NotImplementedError

    def require_file(self, path, what):
        path = Path(path)
        if not path.is_file():
            raise ArtifactIOError(f"{what} not found: {path}")
        return path

    def emit_json(self, data, out=None):
        """Write a JSON document to `out`, or to stdout when no path is given."""
        text = json.dumps(data, indent=2, sort_keys=True)
        if out is None:
            self.stdout.write(text)
            return None
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
        return path

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
