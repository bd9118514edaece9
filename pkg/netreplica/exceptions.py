from django.core.management.base import CommandError
import logging

logger = logging.getLogger("runner")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class NetReplicaError(Exception):
    """Base class for every error the toolchain reports to its caller."""

    exit_code = EXIT_VALIDATION
    category = "Error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self):
        return self.message


class ConfigError(NetReplicaError):
    """Invalid configuration value; `field` names the offending key."""

    category = "Invalid configuration"

    def __init__(self, message, field=None):
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message, field=field)
        self.field = field


class TraceParseError(NetReplicaError):
    """Malformed capture; `offset` is a byte offset (PCAP) or line number (CSV)."""

    category = "Malformed trace"

    def __init__(self, message, offset=None, line=None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        elif line is not None:
            message = f"{message} on line {line}"
        super().__init__(message, offset=offset, line=line)
        self.offset = offset
        self.line = line


class SeriesMismatchError(NetReplicaError):
    category = "Series mismatch"


class ProfileFormatError(NetReplicaError):
    """Malformed CTP document; `line` is the 1-based JSONL line number."""

    category = "Malformed profile"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line)
        self.line = line


class QueryError(NetReplicaError):
    category = "Invalid query"


class SamplingError(NetReplicaError):
    category = "Sampling failed"


class SimulationConfigError(NetReplicaError):
    category = "Invalid simulation config"


class EvaluationInputError(NetReplicaError):
    category = "Invalid evaluation input"


class ArtifactIOError(NetReplicaError):
    exit_code = EXIT_IO
    category = "I/O error"


def flatten_serializer_errors(errors, prefix=""):
    """
    Flatten DRF serializer errors into "field: message" strings.

    Args:
        errors: serializer.errors (dict or list, possibly nested)
        prefix: dotted path of the enclosing field

    Returns:
        list: one string per leaf error
    """
    flat = []
    if isinstance(errors, dict):
        for field, value in errors.items():
            path = f"{prefix}.{field}" if prefix else str(field)
            flat.extend(flatten_serializer_errors(value, path))
    elif isinstance(errors, list):
        for value in errors:
            if isinstance(value, (dict, list)):
                flat.extend(flatten_serializer_errors(value, prefix))
            else:
                flat.append(f"{prefix}: {value}" if prefix else str(value))
    else:
        flat.append(f"{prefix}: {errors}" if prefix else str(errors))
    return flat


def handle_command_error(exc):
    """
    Map an exception raised by a pipeline stage to a CommandError.

    Exit codes: 1 for validation failures, 2 for I/O failures.
    Unexpected exceptions are logged with traceback and reported as exit 1.
    """
    if isinstance(exc, CommandError):
        return exc

    if isinstance(exc, NetReplicaError):
        error = exc
    elif isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError)):
        error = ArtifactIOError(f"{exc.strerror}: {exc.filename}")
    elif isinstance(exc, OSError):
        error = ArtifactIOError(str(exc))
    else:
        logger.error(f"Unexpected failure: {exc}", exc_info=True)
        error = NetReplicaError(f"{type(exc).__name__}: {exc}")

    if error.exit_code == EXIT_IO:
        logger.error(f"{error.category}: {error.message}")

    return CommandError(f"{error.category}: {error.message}", returncode=error.exit_code)
