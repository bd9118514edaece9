from dataclasses import dataclass, field
import logging

from evaluation.distributions import DEFAULT_BINS, jensen_distance
from .trimming import filter_profiles, trim_profiles

logger = logging.getLogger("replay")

DEFAULT_MEAN_FLOOR_BPS = 1e6


@dataclass
class MechanismComparison:
    """Usable profiles under filtering and under trimming at one threshold."""

    threshold_bps: float
    mean_floor_bps: float
    candidates: int
    filtered: int
    trimmed: int
    filtered_pmr95: list = field(default_factory=list, repr=False)
    trimmed_pmr95: list = field(default_factory=list, repr=False)
    jensen_distance: float = None

    @property
    def gain(self):
        return self.trimmed / self.filtered if self.filtered else None

    def as_dict(self):
        return {
            "threshold_bps": self.threshold_bps,
            "mean_floor_bps": self.mean_floor_bps,
            "candidates": self.candidates,
            "filtered": self.filtered,
            "trimmed": self.trimmed,
            "gain": self.gain,
            "jensen_distance": self.jensen_distance,
        }


def compare_mechanisms(profiles, threshold_bps, mean_floor_bps=DEFAULT_MEAN_FLOOR_BPS, bins=DEFAULT_BINS):
    """
    Compare filtering against trimming on one profile set.

    Profiles with mean throughput below mean_floor_bps are discarded
    first. Every remaining profile is usable after trimming; only those
    already under the threshold survive filtering.
    """
    candidates = [p for p in profiles if p.metrics.mean_throughput_bps >= mean_floor_bps]
    filtered = filter_profiles(candidates, threshold_bps)
    trimmed, _ = trim_profiles(candidates, threshold_bps)
    trimmed = [p for p in trimmed if p.metrics.max_throughput_bps > 0]

    comparison = MechanismComparison(
        threshold_bps=threshold_bps,
        mean_floor_bps=mean_floor_bps,
        candidates=len(candidates),
        filtered=len(filtered),
        trimmed=len(trimmed),
        filtered_pmr95=[p.metrics.pmr95 for p in filtered],
        trimmed_pmr95=[p.metrics.pmr95 for p in trimmed],
    )
    if filtered and trimmed:
        comparison.jensen_distance = jensen_distance(comparison.filtered_pmr95, comparison.trimmed_pmr95, bins)
    else:
        logger.warning(f"No usable profiles under filtering at {threshold_bps:.0f} bps; distance omitted")
    logger.info(
        f"Of {len(candidates)} profiles above the mean floor, {len(filtered)} pass filtering and {len(trimmed)} pass trimming"
    )
    return comparison
