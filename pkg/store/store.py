"""
Profile store: a JSONL file of CTPs plus a sidecar SQLite index.

The index is the `ProfileIndex` model attached to a per-store database
alias, so selections are ordinary ORM queries with one indexed column per
attribute.
"""
from pathlib import Path
import copy
import glob
import hashlib
import json
import logging
import os
import shutil

from django.db import connections, transaction

from netreplica.exceptions import ArtifactIOError, ProfileFormatError
from profiles.serializers import dumps_profile, loads_profile, profile_from_dict, profile_to_dict
from .models import ProfileIndex, StoreState
from .query import ProfileQuery

logger = logging.getLogger("store")

INDEX_SUFFIX = ".idx.sqlite3"


def store_paths(path):
    """(jsonl path, index path) for a store given with or without its .jsonl suffix."""
    path = Path(path)
    jsonl = path if path.suffix == ".jsonl" else path.with_name(path.name + ".jsonl")
    return jsonl, jsonl.with_suffix(INDEX_SUFFIX)


def _index_row(data, offset, length):
    """Index row from a profile document (the dict form of one JSONL line)."""
    return ProfileIndex(
        profile_id=data["id"],
        source_trace=data["source_trace"],
        prefix=data["prefix"],
        direction=data["direction"],
        window_start_s=data["window_start_s"],
        window_duration_s=data["window_duration_s"],
        bin_width_ms=data["bin_width_ms"],
        offset=offset,
        length=length,
        **data["metrics"],
    )


class ProfileStore:
    """
    Indexed CTP store.

    Single writer, many readers. Each `ingest` writes a new JSONL generation
    and commits its index rows together with the generation's file name, so
    readers always pair offsets with the file they were computed for. After
    the commit the canonical `<name>.jsonl` is refreshed from the new
    generation and generations older than the previous one are removed.
    """

    def __init__(self, path):
        self.jsonl_path, self.index_path = store_paths(path)
        digest = hashlib.sha1(str(self.jsonl_path.resolve()).encode()).hexdigest()[:12]
        self.alias = f"store_{digest}"
        self._attach()

    def _attach(self):
        if self.alias not in connections.databases:
            db = copy.deepcopy(connections.databases["default"])
            db.update({"ENGINE": "django.db.backends.sqlite3", "NAME": str(self.index_path)})
            connections.databases[self.alias] = db
        self.index_path.parent.mkdir(parents=True, exist_ok=True)
        connection = connections[self.alias]
        tables = connection.introspection.table_names()
        missing = [model for model in (ProfileIndex, StoreState) if model._meta.db_table not in tables]
        if missing:
            with connection.schema_editor() as editor:
                for model in missing:
                    editor.create_model(model)
            logger.debug(f"Created index tables {[m._meta.db_table for m in missing]} in {self.index_path}")

    def close(self):
        """Close and detach the index database."""
        if self.alias in connections.databases:
            connections[self.alias].close()
            del connections[self.alias]
            del connections.databases[self.alias]

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _rows(self):
        return ProfileIndex.objects.using(self.alias)

    def __len__(self):
        return self._rows().count()

    def _state(self):
        return StoreState.objects.using(self.alias).filter(pk=1).first()

    def _data_path(self, state):
        if state is None:
            return self.jsonl_path
        return self.jsonl_path.with_name(state.data_file)

    @property
    def data_path(self):
        """JSONL generation the committed index points into."""
        return self._data_path(self._state())

    def _generation_path(self, generation):
        return self.jsonl_path.with_name(f"{self.jsonl_path.name}.g{generation}")

    def ingest(self, source):
        """
        Add profiles; duplicate ids keep the last occurrence.

        Every line is validated before anything is written, so a malformed
        line leaves the store unchanged.

        Args:
            source: JSONL path, or an iterable of CrossTrafficProfiles

        Returns:
            int: number of profiles in the store afterwards

        Raises:
            ProfileFormatError: malformed line (line number attached)
            ArtifactIOError: source missing
        """
        lines = self._existing_lines()
        before = len(lines)
        added = 0
        for profile in self._incoming(source):
            lines[profile.id] = (dumps_profile(profile), profile_to_dict(profile))
            added += 1

        state = self._state()
        generation = state.generation + 1 if state is not None else 1
        data_path = self._generation_path(generation)
        rows = []
        offset = 0
        with open(data_path, "wb") as handle:
            for profile_id in sorted(lines):
                encoded = (lines[profile_id][0] + "\n").encode("utf-8")
                handle.write(encoded)
                rows.append((profile_id, offset, len(encoded)))
                offset += len(encoded)
            handle.flush()
            os.fsync(handle.fileno())

        try:
            with transaction.atomic(using=self.alias):
                self._rows().all().delete()
                ProfileIndex.objects.using(self.alias).bulk_create(
                    [
                        _index_row(lines[profile_id][1], start, length)
                        for profile_id, start, length in rows
                    ],
                    batch_size=500,
                )
                StoreState.objects.using(self.alias).update_or_create(
                    pk=1, defaults={"generation": generation, "data_file": data_path.name}
                )
                transaction.on_commit(lambda: self._publish(data_path, generation), using=self.alias)
        except Exception:
            data_path.unlink(missing_ok=True)
            raise

        logger.info(
            f"Ingested {added} profiles into {self.jsonl_path.name}: "
            f"{before} -> {len(lines)} stored ({added - (len(lines) - before)} duplicates)"
        )
        return len(lines)

    def _publish(self, data_path, generation):
        """Refresh the canonical JSONL and drop generations no reader can still need."""
        staging = self.jsonl_path.with_name(self.jsonl_path.name + ".tmp")
        try:
            shutil.copyfile(data_path, staging)
            os.replace(staging, self.jsonl_path)
        except OSError:
            # the index already points at data_path; only the canonical copy is stale
            logger.warning(f"Could not refresh {self.jsonl_path.name} from {data_path.name}", exc_info=True)
            return
        for old in self.jsonl_path.parent.glob(f"{glob.escape(self.jsonl_path.name)}.g*"):
            suffix = old.name[len(self.jsonl_path.name) + 2 :]
            if suffix.isdigit() and int(suffix) < generation - 1:
                old.unlink(missing_ok=True)

    def _existing_lines(self):
        data_path = self.data_path
        if not data_path.exists():
            return {}
        lines = {}
        with open(data_path, encoding="utf-8") as handle:
            for text in handle:
                text = text.rstrip("\n")
                if text:
                    data = json.loads(text)
                    lines[data["id"]] = (text, data)
        return lines

    def _incoming(self, source):
        if isinstance(source, (str, Path)):
            path = Path(source)
            if not path.is_file():
                raise ArtifactIOError(f"profile file not found: {path}")
            profiles = []
            with open(path, encoding="utf-8") as handle:
                for number, text in enumerate(handle, start=1):
                    if text.strip():
                        profiles.append(loads_profile(text, line=number))
            return profiles
        return list(source)

    def _locate(self, rows):
        """(data file, [(offset, length)]) read from one index snapshot."""
        with transaction.atomic(using=self.alias):
            locations = list(rows.values_list("offset", "length"))
            data_path = self.data_path
        return data_path, locations

    def _load(self, data_path, locations):
        with open(data_path, "rb") as handle:
            return [self._read_at(handle, data_path, offset, length) for offset, length in locations]

    def _read_at(self, handle, data_path, offset, length):
        handle.seek(offset)
        text = handle.read(length).decode("utf-8")
        try:
            return profile_from_dict(json.loads(text))
        except (ValueError, KeyError, TypeError) as e:
            raise ProfileFormatError(f"store {data_path.name} is corrupt at byte {offset}: {e}")

    def select(self, query=None):
        """Profiles matching every predicate, in query order, truncated to the limit."""
        query = query or ProfileQuery()
        rows = self._rows().filter(query.as_q()).order_by(*query.ordering())
        if query.limit is not None:
            rows = rows[: query.limit]
        data_path, locations = self._locate(rows)
        if not locations:
            return []
        profiles = self._load(data_path, locations)
        logger.debug(f"Selected {len(profiles)} profiles from {data_path.name}")
        return profiles

    def count(self, query=None):
        query = query or ProfileQuery()
        return self._rows().filter(query.as_q()).count()

    def get(self, profile_id):
        data_path, locations = self._locate(self._rows().filter(profile_id=profile_id))
        if not locations:
            return None
        return self._load(data_path, locations)[0]
