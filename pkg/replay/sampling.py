from collections import defaultdict
from dataclasses import dataclass, field, replace
import logging

import numpy as np

from netreplica.exceptions import ConfigError, SamplingError

logger = logging.getLogger("replay")


@dataclass(frozen=True)
class SamplingPlan:
    """Toggle-stratified sampling parameters; the toggle range is inclusive."""

    on_threshold_bps: float = 3e6
    segment_ms: int = 100
    toggle_min: int = 1
    toggle_max: int = 100
    per_bucket: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.per_bucket <= 0:
            raise ConfigError(f"must be > 0, got {self.per_bucket}", field="per_bucket")
        if self.segment_ms <= 0:
            raise ConfigError(f"must be > 0, got {self.segment_ms}", field="segment_ms")
        if self.on_threshold_bps < 0:
            raise ConfigError(f"must be >= 0, got {self.on_threshold_bps}", field="on_threshold_bps")
        if self.toggle_min < 0 or self.toggle_min > self.toggle_max:
            raise ConfigError(f"empty range {self.toggle_min}-{self.toggle_max}", field="toggle_range")

    @property
    def toggle_range(self):
        return range(self.toggle_min, self.toggle_max + 1)


@dataclass
class SamplingReport:
    buckets: dict = field(default_factory=dict)
    out_of_range: int = 0
    duplicates: int = 0

    @property
    def drawn(self):
        return sum(bucket["drawn"] for bucket in self.buckets.values())

    def short_buckets(self, per_bucket):
        return sorted(v for v, bucket in self.buckets.items() if bucket["available"] < per_bucket)

    def as_dict(self):
        return {
            "drawn": self.drawn,
            "out_of_range": self.out_of_range,
            "duplicates": self.duplicates,
            "buckets": {str(v): bucket for v, bucket in sorted(self.buckets.items())},
        }


def segments(profile, segment_ms):
    """The profile's series at segment resolution, summing whole groups of bins."""
    bin_ms = profile.bin_width_ms
    if segment_ms % bin_ms:
        raise SamplingError(
            f"profile {profile.id}: {segment_ms} ms segments are not a multiple of its {bin_ms} ms bins"
        )
    return profile.series.rebin(segment_ms // bin_ms, drop_partial=True)


def toggle_count(profile, plan):
    """Number of adjacent segment pairs whose ON state differs; ON is throughput > on_threshold_bps."""
    on = segments(profile, plan.segment_ms).throughput_bps() > plan.on_threshold_bps
    return int(np.count_nonzero(on[1:] != on[:-1]))


def with_toggle_count(profile, plan):
    metrics = replace(profile.metrics, toggle_count=toggle_count(profile, plan))
    return replace(profile, metrics=metrics)


def stratified_sample(profiles, plan):
    """
    Draw up to plan.per_bucket distinct profiles per toggle count.

    Buckets are ordered by profile id before drawing so the sample
    depends only on the profile set and the seed. Profiles outside the
    toggle range are excluded. Profiles sharing an id are sampled once,
    keeping the last occurrence, so no id appears in two strata. Sampled
    profiles carry their toggle count.

    Returns:
        tuple: (sample, SamplingReport)
    """
    report = SamplingReport()
    unique = {}
    for profile in profiles:
        if profile.id in unique:
            report.duplicates += 1
        unique[profile.id] = profile
    if report.duplicates:
        logger.warning(f"Ignored {report.duplicates} earlier profiles with repeated ids")

    buckets = defaultdict(list)
    for profile in unique.values():
        counted = with_toggle_count(profile, plan)
        if counted.metrics.toggle_count in plan.toggle_range:
            buckets[counted.metrics.toggle_count].append(counted)
        else:
            report.out_of_range += 1

    rng = np.random.default_rng(plan.seed)
    sample = []
    for value in plan.toggle_range:
        bucket = sorted(buckets.get(value, []), key=lambda p: p.id)
        if not bucket:
            continue
        size = min(plan.per_bucket, len(bucket))
        picked = sorted(rng.choice(len(bucket), size=size, replace=False))
        sample.extend(bucket[i] for i in picked)
        report.buckets[value] = {"available": len(bucket), "drawn": size}

    short = report.short_buckets(plan.per_bucket)
    if short:
        logger.warning(f"{len(short)} toggle buckets hold fewer than {plan.per_bucket} profiles: {short[:10]}")
    logger.info(f"Sampled {len(sample)} profiles from {len(report.buckets)} toggle buckets")
    return sample, report
