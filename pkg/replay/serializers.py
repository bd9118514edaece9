from pathlib import Path
import json
import logging

from rest_framework import serializers

from netreplica.exceptions import ConfigError, flatten_serializer_errors
from .sampling import SamplingPlan

logger = logging.getLogger("replay")


class SamplingPlanSerializer(serializers.Serializer):
    on_threshold_bps = serializers.FloatField(min_value=0, default=3e6)
    segment_ms = serializers.IntegerField(min_value=1, default=100)
    toggle_min = serializers.IntegerField(min_value=0, default=1)
    toggle_max = serializers.IntegerField(min_value=0, default=100)
    per_bucket = serializers.IntegerField(min_value=1, default=50)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, default=0)

    def validate(self, attrs):
        if attrs["toggle_min"] > attrs["toggle_max"]:
            raise serializers.ValidationError({"toggle_max": "must be >= toggle_min"})
        return attrs

    def create(self, validated_data):
        return SamplingPlan(**validated_data)


def sampling_plan(data):
    """
    Build a SamplingPlan from user-supplied values.

    Raises:
        ConfigError: the first offending field is named
    """
    serializer = SamplingPlanSerializer(data={k: v for k, v in data.items() if v is not None})
    if not serializer.is_valid():
        errors = flatten_serializer_errors(serializer.errors)
        raise ConfigError("; ".join(errors), field=errors[0].split(":")[0])
    return serializer.save()


def write_jsonl(path, rows):
    """Write dicts (or objects with as_dict) as compact JSON lines; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            data = row.as_dict() if hasattr(row, "as_dict") else row
            handle.write(json.dumps(data, separators=(",", ":"), sort_keys=True))
            handle.write("\n")
            count += 1
    logger.debug(f"Wrote {count} records to {path}")
    return count
