from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings


class ReplaySettings(BaseSettings):
    filter: str = ""
    limit: Optional[int] = Field(None, ge=0)
    order_by: Optional[str] = None
    threshold_bps: Optional[float] = Field(None, gt=0)
    mean_floor_bps: float = Field(1e6, ge=0)
    on_threshold_bps: float = Field(3e6, ge=0)
    segment_ms: int = Field(100, gt=0)
    toggle_min: int = Field(1, ge=0)
    toggle_max: int = Field(100, ge=0)
    per_bucket: int = Field(50, ge=1)

    def sampling_plan(self, seed):
        from replay.serializers import sampling_plan

        return sampling_plan(
            {
                "on_threshold_bps": self.on_threshold_bps,
                "segment_ms": self.segment_ms,
                "toggle_min": self.toggle_min,
                "toggle_max": self.toggle_max,
                "per_bucket": self.per_bucket,
                "seed": seed,
            }
        )
