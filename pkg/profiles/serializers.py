from pathlib import Path
import ipaddress
import json
import logging

import numpy as np
from rest_framework import serializers

from netreplica.exceptions import ProfileFormatError, flatten_serializer_errors
from traces.records import Direction
from .metrics import ProfileMetrics
from .series import ByteSeries
from .windows import ID_LENGTH, MAX_DURATION_S, MIN_DURATION_S, CrossTrafficProfile

logger = logging.getLogger("profiles")

PROFILE_FIELDS = (
    "id",
    "source_trace",
    "prefix",
    "direction",
    "window_start_s",
    "window_duration_s",
    "bin_width_ms",
    "bins",
    "metrics",
)


class BinsField(serializers.Field):
    """Non-empty list of byte counts, validated as one array."""

    default_error_messages = {
        "invalid": "Expected a non-empty list of integers >= 0.",
    }

    def to_internal_value(self, data):
        if not isinstance(data, list) or not data:
            self.fail("invalid")
        try:
            bins = np.asarray(data)
        except (TypeError, ValueError):
            self.fail("invalid")
        if bins.ndim != 1 or bins.dtype.kind not in "iu" or bins.min() < 0:
            self.fail("invalid")
        return bins.astype(np.int64)

    def to_representation(self, value):
        return [int(b) for b in value]


class ProfileMetricsSerializer(serializers.Serializer):
    """Serializer for the metrics block of a profile."""

    mean_throughput_bps = serializers.FloatField(min_value=0)
    max_throughput_bps = serializers.FloatField(min_value=0)
    pmr = serializers.FloatField(min_value=0)
    pmr95 = serializers.FloatField(min_value=0)
    cov = serializers.FloatField(min_value=0)
    host_count = serializers.IntegerField(min_value=0)
    flow_count = serializers.IntegerField(min_value=0)
    asymmetry = serializers.FloatField(min_value=0, max_value=1)
    toggle_count = serializers.IntegerField(min_value=0, default=0)


class CrossTrafficProfileSerializer(serializers.Serializer):
    """Serializer for one CTP JSONL line."""

    id = serializers.RegexField(rf"^[0-9a-f]{{{ID_LENGTH}}}$")
    source_trace = serializers.CharField(allow_blank=True)
    prefix = serializers.CharField()
    direction = serializers.ChoiceField(choices=[d.value for d in Direction])
    window_start_s = serializers.FloatField(min_value=0)
    window_duration_s = serializers.FloatField(min_value=MIN_DURATION_S, max_value=MAX_DURATION_S)
    bin_width_ms = serializers.IntegerField(min_value=1)
    bins = BinsField()
    metrics = ProfileMetricsSerializer()

    def validate_prefix(self, value):
        """Validate IPv4 CIDR notation."""
        try:
            network = ipaddress.IPv4Network(value)
        except ValueError:
            raise serializers.ValidationError("Prefix must be an IPv4 CIDR such as 10.0.1.0/24.")
        return str(network)

    def validate(self, attrs):
        """Series length must match the window duration."""
        expected = attrs["window_duration_s"] * 1000.0 / attrs["bin_width_ms"]
        if abs(expected - len(attrs["bins"])) > 1e-9:
            raise serializers.ValidationError(
                {"bins": f"{len(attrs['bins'])} bins of {attrs['bin_width_ms']} ms do not span "
                 f"{attrs['window_duration_s']} s."}
            )
        return attrs

    def create(self, validated_data):
        """Build the CrossTrafficProfile."""
        start_offset = validated_data["window_start_s"]
        return CrossTrafficProfile(
            id=validated_data["id"],
            source_trace=validated_data["source_trace"],
            prefix=validated_data["prefix"],
            direction=Direction(validated_data["direction"]),
            window_start_s=start_offset,
            window_duration_s=validated_data["window_duration_s"],
            series=ByteSeries(validated_data["bin_width_ms"], start_offset, validated_data["bins"]),
            metrics=ProfileMetrics(**validated_data["metrics"]),
        )


def profile_to_dict(profile):
    return {
        "id": profile.id,
        "source_trace": profile.source_trace,
        "prefix": profile.prefix,
        "direction": profile.direction.value,
        "window_start_s": profile.window_start_s,
        "window_duration_s": profile.window_duration_s,
        "bin_width_ms": profile.bin_width_ms,
        "bins": [int(b) for b in profile.bins],
        "metrics": profile.metrics.as_dict(),
    }


def profile_from_dict(data):
    """Build a profile from an already-validated document (store reads)."""
    return CrossTrafficProfile(
        id=data["id"],
        source_trace=data["source_trace"],
        prefix=data["prefix"],
        direction=Direction(data["direction"]),
        window_start_s=float(data["window_start_s"]),
        window_duration_s=float(data["window_duration_s"]),
        series=ByteSeries(data["bin_width_ms"], float(data["window_start_s"]), data["bins"]),
        metrics=ProfileMetrics(**data["metrics"]),
    )


def dumps_profile(profile):
    """One JSONL line (without newline)."""
    return json.dumps(profile_to_dict(profile), separators=(",", ":"))


def loads_profile(text, line=None):
    """
    Parse and validate one JSONL line.

    Raises:
        ProfileFormatError: bad JSON or failed validation, naming the line
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProfileFormatError(f"invalid JSON ({e.msg})", line=line)
    return profile_from_data(data, line=line)


def profile_from_data(data, line=None, prefix=None):
    """
    Validate a decoded profile document and build the profile.

    Raises:
        ProfileFormatError: unknown fields or failed validation
    """
    lead = f"{prefix}: " if prefix else ""
    if not isinstance(data, dict):
        raise ProfileFormatError(f"{lead}expected a JSON object", line=line)
    unknown = set(data) - set(PROFILE_FIELDS)
    if unknown:
        raise ProfileFormatError(f"{lead}unknown fields {sorted(unknown)}", line=line)

    serializer = CrossTrafficProfileSerializer(data=data)
    if not serializer.is_valid():
        errors = flatten_serializer_errors(serializer.errors, prefix or "")
        raise ProfileFormatError("; ".join(errors), line=line)
    return serializer.save()


def iter_profiles_jsonl(path):
    """Yield profiles from a JSONL file; blank lines are skipped."""
    with open(Path(path), encoding="utf-8") as handle:
        for number, text in enumerate(handle, start=1):
            if text.strip():
                yield loads_profile(text, line=number)


def read_profiles_jsonl(path):
    return list(iter_profiles_jsonl(path))


def write_profiles_jsonl(path, profiles):
    """Write profiles one per line; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for profile in profiles:
            handle.write(dumps_profile(profile))
            handle.write("\n")
            count += 1
    logger.debug(f"Wrote {count} profiles to {path}")
    return count
