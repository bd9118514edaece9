from pathlib import Path
from typing import List, Optional
import logging

import numpy as np
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode
from typing_extensions import Annotated

from netreplica.exceptions import ConfigError
from simulator.config import AQM
from .common import split_list

logger = logging.getLogger("runner")


class GridSettings(BaseSettings):
    """Experiment grid: rates x latencies x AQMs over the sampled profiles."""

    rates_bps: Annotated[List[float], NoDecode] = [4e6, 6e6, 8e6, 10e6]
    latencies_ms: Annotated[List[float], NoDecode] = []
    latency_source: Optional[Path] = None
    latency_percentiles: Annotated[List[float], NoDecode] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]
    aqms: Annotated[List[str], NoDecode] = ["PFIFO"]
    jobs: int = Field(1, ge=1)

    @field_validator("rates_bps", "latencies_ms", "latency_percentiles", "aqms", mode="before")
    @classmethod
    def _split(cls, value):
        return split_list(value)

    @field_validator("rates_bps")
    @classmethod
    def _positive_rates(cls, value):
        if not value:
            raise ValueError("at least one rate is required")
        if any(rate <= 0 for rate in value):
            raise ValueError("rates must be > 0")
        return value

    @field_validator("latencies_ms")
    @classmethod
    def _non_negative_latencies(cls, value):
        if any(latency < 0 for latency in value):
            raise ValueError("latencies must be >= 0")
        return value

    @field_validator("latency_percentiles")
    @classmethod
    def _percentiles(cls, value):
        if any(not 0 <= p <= 100 for p in value):
            raise ValueError("percentiles must lie in [0, 100]")
        return value

    @field_validator("aqms")
    @classmethod
    def _known_aqms(cls, value):
        if not value:
            raise ValueError("at least one AQM is required")
        names = []
        for name in value:
            if str(name).upper() not in AQM.__members__:
                raise ValueError(f"unknown AQM {name!r} (expected pfifo, codel or fq_codel)")
            names.append(str(name).upper())
        return names

    def resolve_latencies(self):
        """
        Base latencies of the grid in ms.

        Explicit latencies_ms win; otherwise the percentiles of the
        observed minimum RTTs in latency_source.
        """
        if self.latencies_ms:
            return list(self.latencies_ms)
        if self.latency_source is None:
            raise ConfigError("give latencies_ms or latency_source", field="latencies_ms")
        from evaluation.features import load_csv_series

        observed = load_csv_series(self.latency_source)
        latencies = [float(v) for v in np.percentile(observed, self.latency_percentiles)]
        logger.info(
            f"Latency grid from {len(observed)} observations in {self.latency_source}: "
            f"{', '.join(f'{v:.1f}' for v in latencies)} ms"
        )
        return latencies
