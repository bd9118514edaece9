from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

from simulator.config import TELEMETRY_BINS_MS, AppFlowConfig, BottleneckConfig


class SimulationSettings(BaseSettings):
    """Static attributes shared by every simulation of a run."""

    queue_pkts: int = Field(1000, ge=1)
    duration_s: float = Field(30.0, gt=0)
    telemetry_ms: int = 100
    mtu_bytes: int = Field(1500, ge=64)
    burst_bytes: Optional[int] = None
    shape_uplink: bool = False
    start_jitter_ms: float = Field(0.0, ge=0)
    initial_cwnd_pkts: int = Field(10, ge=1)
    init_ssthresh_pkts: int = Field(64, ge=2)

    @field_validator("telemetry_ms")
    @classmethod
    def _known_granularity(cls, value):
        if value not in TELEMETRY_BINS_MS:
            raise ValueError(f"must be one of {TELEMETRY_BINS_MS}")
        return value

    def bottleneck(self, rate_bps, latency_ms, aqm):
        return BottleneckConfig(
            shaping_rate_bps=rate_bps,
            base_latency_ms=latency_ms,
            queue_capacity_pkts=self.queue_pkts,
            aqm=aqm,
            token_bucket_burst_bytes=self.burst_bytes,
            mtu_bytes=self.mtu_bytes,
            shape_uplink=self.shape_uplink,
        )

    def app(self, seed):
        return AppFlowConfig(
            duration_s=self.duration_s,
            initial_cwnd_pkts=self.initial_cwnd_pkts,
            init_ssthresh_pkts=self.init_ssthresh_pkts,
            seed=seed,
            start_jitter_ms=self.start_jitter_ms,
        )
