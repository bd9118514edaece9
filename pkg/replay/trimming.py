from dataclasses import asdict, dataclass
import logging
import math

import numpy as np

from netreplica.exceptions import ConfigError
from profiles.metrics import recompute_metrics
from profiles.series import ByteSeries

logger = logging.getLogger("replay")


@dataclass
class TrimReport:
    profile_id: str
    trimmed_id: str
    scale_factor: float
    original_peak_bps: float
    threshold_bps: float

    def as_dict(self):
        return asdict(self)


def _check_threshold(threshold_bps):
    if not threshold_bps > 0 or not math.isfinite(threshold_bps):
        raise ConfigError(f"must be a positive number, got {threshold_bps}", field="threshold_bps")


def peak_bps(series):
    if not len(series):
        return 0.0
    return 8.0 * int(series.bins.max()) / series.bin_width_s


def max_bin_bytes(threshold_bps, bin_width_s):
    """Largest byte count whose bin throughput stays <= threshold_bps."""
    cap = math.floor(threshold_bps * bin_width_s / 8.0)
    while cap > 0 and 8.0 * cap / bin_width_s > threshold_bps:
        cap -= 1
    while 8.0 * (cap + 1) / bin_width_s <= threshold_bps:
        cap += 1
    return cap


def filter_profiles(profiles, threshold_bps):
    """Profiles whose peak throughput is <= threshold_bps, untouched."""
    _check_threshold(threshold_bps)
    kept = [p for p in profiles if p.metrics.max_throughput_bps <= threshold_bps]
    logger.debug(f"Filtering at {threshold_bps:.0f} bps kept {len(kept)} profiles")
    return kept


def trim_profile(profile, threshold_bps):
    """
    Scale a profile so its peak fits under threshold_bps.

    Every bin is multiplied by min(1, threshold / peak) and rounded to the
    nearest byte, halves rounding down. Bins that still land above the
    threshold after rounding are clamped to the largest admissible byte
    count. Profiles at or below the threshold, and all-zero profiles, are
    returned as they are.

    Returns:
        tuple: (profile, TrimReport)
    """
    _check_threshold(threshold_bps)
    original_peak = peak_bps(profile.series)
    if original_peak == 0 or original_peak <= threshold_bps:
        return profile, TrimReport(profile.id, profile.id, 1.0, original_peak, threshold_bps)

    scale = threshold_bps / original_peak
    scaled = np.ceil(profile.bins.astype(np.float64) * scale - 0.5)
    cap = max_bin_bytes(threshold_bps, profile.series.bin_width_s)
    bins = np.minimum(scaled, cap).astype(np.int64)
    series = ByteSeries(profile.bin_width_ms, profile.series.start_time, bins)
    trimmed = profile.with_series(series, recompute_metrics(series, profile.metrics))
    return trimmed, TrimReport(profile.id, trimmed.id, scale, original_peak, threshold_bps)


def trim_profiles(profiles, threshold_bps):
    """Trim every profile; returns (profiles, reports) in input order."""
    trimmed, reports = [], []
    for profile in profiles:
        result, report = trim_profile(profile, threshold_bps)
        trimmed.append(result)
        reports.append(report)
    scaled = sum(1 for report in reports if report.scale_factor < 1)
    logger.info(f"Trimmed {scaled} of {len(reports)} profiles to {threshold_bps:.0f} bps")
    return trimmed, reports
