from dataclasses import asdict, dataclass, field
from enum import Enum
import math

from netreplica.exceptions import SimulationConfigError

TELEMETRY_BINS_MS = (10, 100, 1000)


class AQM(str, Enum):
    PFIFO = "PFIFO"
    CODEL = "CODEL"
    FQ_CODEL = "FQ_CODEL"

    @classmethod
    def parse(cls, value):
        try:
            return value if isinstance(value, cls) else cls(str(value).upper())
        except ValueError:
            choices = ", ".join(m.value.lower() for m in cls)
            raise SimulationConfigError(f"aqm: unknown policy {value!r} (expected one of {choices})")


class AppModel(str, Enum):
    BULK_AIMD = "BULK_AIMD"


def _require(condition, field_name, message):
    if not condition:
        raise SimulationConfigError(f"{field_name}: {message}")


@dataclass(frozen=True)
class BottleneckConfig:
    """
    Static attributes of the emulated bottleneck.

    base_latency_ms is the full round trip, split evenly between the two
    directions. The burst defaults to two MTUs.
    """

    shaping_rate_bps: float
    base_latency_ms: float = 0.0
    queue_capacity_pkts: int = 1000
    aqm: AQM = AQM.PFIFO
    token_bucket_burst_bytes: int = None
    mtu_bytes: int = 1500
    shape_uplink: bool = False

    def __post_init__(self):
        object.__setattr__(self, "aqm", AQM.parse(self.aqm))
        if self.token_bucket_burst_bytes is None:
            object.__setattr__(self, "token_bucket_burst_bytes", 2 * int(self.mtu_bytes))
        _require(
            math.isfinite(self.shaping_rate_bps) and self.shaping_rate_bps > 0,
            "shaping_rate_bps",
            f"must be > 0, got {self.shaping_rate_bps}",
        )
        _require(
            math.isfinite(self.base_latency_ms) and self.base_latency_ms >= 0,
            "base_latency_ms",
            f"must be >= 0, got {self.base_latency_ms}",
        )
        _require(self.queue_capacity_pkts >= 1, "queue_capacity_pkts", f"must be >= 1, got {self.queue_capacity_pkts}")
        _require(self.mtu_bytes >= 64, "mtu_bytes", f"must be >= 64, got {self.mtu_bytes}")
        _require(
            self.token_bucket_burst_bytes >= self.mtu_bytes,
            "token_bucket_burst_bytes",
            f"must be >= mtu_bytes ({self.mtu_bytes}), got {self.token_bucket_burst_bytes}",
        )

    @property
    def latency_ns(self):
        return int(round(self.base_latency_ms * 1_000_000))

    def as_dict(self):
        data = asdict(self)
        data["aqm"] = self.aqm.value
        return data


@dataclass(frozen=True)
class AppFlowConfig:
    """Closed-loop bulk transfer measured through the bottleneck."""

    duration_s: float
    model: AppModel = AppModel.BULK_AIMD
    initial_cwnd_pkts: int = 10
    init_ssthresh_pkts: int = 64
    seed: int = 0
    start_jitter_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "model", AppModel(self.model))
        _require(
            math.isfinite(self.duration_s) and self.duration_s > 0, "duration_s", f"must be > 0, got {self.duration_s}"
        )
        _require(self.initial_cwnd_pkts >= 1, "initial_cwnd_pkts", f"must be >= 1, got {self.initial_cwnd_pkts}")
        _require(self.init_ssthresh_pkts >= 2, "init_ssthresh_pkts", f"must be >= 2, got {self.init_ssthresh_pkts}")
        _require(0 <= self.seed < 2**64, "seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        _require(self.start_jitter_ms >= 0, "start_jitter_ms", f"must be >= 0, got {self.start_jitter_ms}")

    @property
    def duration_ns(self):
        return int(round(self.duration_s * 1e9))

    def as_dict(self):
        data = asdict(self)
        data["model"] = self.model.value
        return data


@dataclass(frozen=True)
class Scenario:
    """One simulation run: bottleneck, application flow and optional cross traffic."""

    bottleneck: BottleneckConfig
    app: AppFlowConfig
    ctp: object = None
    telemetry_bin_ms: int = 100
    label: str = field(default="", compare=False)

    def __post_init__(self):
        _require(
            self.telemetry_bin_ms in TELEMETRY_BINS_MS,
            "telemetry_bin_ms",
            f"must be one of {TELEMETRY_BINS_MS}, got {self.telemetry_bin_ms}",
        )

    def with_seed(self, seed):
        app = AppFlowConfig(**{**self.app.as_dict(), "seed": seed})
        return Scenario(self.bottleneck, app, self.ctp, self.telemetry_bin_ms, self.label)

    def echo(self):
        return {
            "bottleneck": self.bottleneck.as_dict(),
            "app": self.app.as_dict(),
            "ctp_id": self.ctp.id if self.ctp is not None else None,
            "telemetry_bin_ms": self.telemetry_bin_ms,
        }
