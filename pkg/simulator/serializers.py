from rest_framework import serializers

from netreplica.exceptions import ProfileFormatError, SimulationConfigError, flatten_serializer_errors
from profiles.serializers import profile_from_data
from profiles.windows import CrossTrafficProfile
from .config import AQM, TELEMETRY_BINS_MS, AppFlowConfig, AppModel, BottleneckConfig, Scenario


class CaseInsensitiveChoiceField(serializers.ChoiceField):
    def to_internal_value(self, data):
        return super().to_internal_value(str(data).upper())


class BottleneckConfigSerializer(serializers.Serializer):
    shaping_rate_bps = serializers.FloatField(min_value=1)
    base_latency_ms = serializers.FloatField(min_value=0, default=0.0)
    queue_capacity_pkts = serializers.IntegerField(min_value=1, default=1000)
    aqm = CaseInsensitiveChoiceField(choices=[m.value for m in AQM], default=AQM.PFIFO.value)
    token_bucket_burst_bytes = serializers.IntegerField(min_value=64, required=False, allow_null=True)
    mtu_bytes = serializers.IntegerField(min_value=64, max_value=9000, default=1500)
    shape_uplink = serializers.BooleanField(default=False)

    def validate(self, attrs):
        burst = attrs.get("token_bucket_burst_bytes")
        if burst is not None and burst < attrs["mtu_bytes"]:
            raise serializers.ValidationError({"token_bucket_burst_bytes": "must be >= mtu_bytes"})
        return attrs

    def create(self, validated_data):
        return BottleneckConfig(**validated_data)


class AppFlowConfigSerializer(serializers.Serializer):
    duration_s = serializers.FloatField(min_value=0.001)
    model = CaseInsensitiveChoiceField(choices=[m.value for m in AppModel], default=AppModel.BULK_AIMD.value)
    initial_cwnd_pkts = serializers.IntegerField(min_value=1, default=10)
    init_ssthresh_pkts = serializers.IntegerField(min_value=2, default=64)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, default=0)
    start_jitter_ms = serializers.FloatField(min_value=0, default=0.0)

    def create(self, validated_data):
        return AppFlowConfig(**validated_data)


def _build(serializer_class, data, prefix):
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        errors = flatten_serializer_errors(serializer.errors, prefix)
        raise SimulationConfigError("; ".join(errors))
    return serializer.save()


def bottleneck_from_data(data):
    return _build(BottleneckConfigSerializer, data, "bottleneck")


def app_from_data(data):
    return _build(AppFlowConfigSerializer, data, "app")


def ctp_from_data(data):
    """
    Accept a CrossTrafficProfile, a profile document, or None.

    Raises:
        SimulationConfigError: the document fails profile validation
    """
    if data is None or isinstance(data, CrossTrafficProfile):
        return data
    try:
        return profile_from_data(data, prefix="ctp")
    except ProfileFormatError as e:
        raise SimulationConfigError(e.message)


def scenario_from_data(data, ctp=None):
    """
    Build a Scenario from a plain document.

    Expected keys: "bottleneck" and "app" (objects), optional
    "telemetry_bin_ms", "label" and "ctp" (a profile document).

    Raises:
        SimulationConfigError: naming the dotted field path
    """
    if isinstance(data, Scenario):
        return data
    if not isinstance(data, dict):
        raise SimulationConfigError("scenario must be an object")
    telemetry_bin_ms = data.get("telemetry_bin_ms", 100)
    if telemetry_bin_ms not in TELEMETRY_BINS_MS:
        raise SimulationConfigError(f"telemetry_bin_ms: must be one of {TELEMETRY_BINS_MS}, got {telemetry_bin_ms}")
    return Scenario(
        bottleneck=bottleneck_from_data(data.get("bottleneck") or {}),
        app=app_from_data(data.get("app") or {}),
        ctp=ctp_from_data(ctp if ctp is not None else data.get("ctp")),
        telemetry_bin_ms=telemetry_bin_ms,
        label=data.get("label", ""),
    )
