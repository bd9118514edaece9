from dataclasses import asdict, dataclass, field
from pathlib import Path
import hashlib
import json
import logging
import time

from netreplica import __version__
from netreplica.exceptions import ArtifactIOError

logger = logging.getLogger("runner")

MANIFEST_SUFFIX = ".manifest.json"


def sha256_file(path):
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as e:
        raise ArtifactIOError(f"cannot hash {path} ({e.strerror})")
    return digest.hexdigest()


def manifest_path(artifact):
    """`<artifact>.manifest.json` next to the artifact (the artifact's suffix is replaced)."""
    artifact = Path(artifact)
    return artifact.with_name(artifact.stem + MANIFEST_SUFFIX)


@dataclass
class RunManifest:
    """Provenance of one artifact: what produced it, from what, with which parameters."""

    subcommand: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    tool_version: str = __version__

    def as_dict(self):
        return asdict(self)

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


class ManifestTracker:
    """Times a subcommand and records its inputs and outputs."""

    def __init__(self, subcommand, parameters):
        self.subcommand = subcommand
        self.parameters = parameters
        self.started = time.perf_counter()

    def track(self, artifact, inputs=(), outputs=None, path=None):
        """
        Write the manifest of `artifact`.

        Args:
            artifact: primary output; the manifest is named after it
            inputs: input paths to digest
            outputs: output paths to digest (defaults to the artifact alone)
            path: manifest location when it is not named after the artifact

        Returns:
            Path: the manifest written
        """
        outputs = [artifact] if outputs is None else outputs
        manifest = RunManifest(
            subcommand=self.subcommand,
            parameters=self.parameters,
            inputs={str(p): sha256_file(p) for p in inputs},
            outputs={str(p): sha256_file(p) for p in outputs},
            wall_clock_s=round(time.perf_counter() - self.started, 6),
        )
        path = manifest.write(path or manifest_path(artifact))
        logger.debug(f"Wrote {path}")
        return path
