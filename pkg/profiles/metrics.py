from dataclasses import asdict, dataclass, fields
import math

import numpy as np

from netreplica.exceptions import ProfileFormatError


@dataclass
class ProfileMetrics:
    """
    Indexed attributes of a profile.

    Intensity: mean/max throughput. Burstiness: pmr, pmr95, cov.
    Heterogeneity: host_count, flow_count, asymmetry. toggle_count is
    filled in by replay preparation.
    """

    mean_throughput_bps: float = 0.0
    max_throughput_bps: float = 0.0
    pmr: float = 0.0
    pmr95: float = 0.0
    cov: float = 0.0
    host_count: int = 0
    flow_count: int = 0
    asymmetry: float = 0.5
    toggle_count: int = 0

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ProfileFormatError(f"unknown metric fields: {sorted(unknown)}")
        return cls(**data)


METRIC_FIELDS = tuple(f.name for f in fields(ProfileMetrics))


def nearest_rank(values, q):
    """The ceil(q*n)-th smallest value (1-based), q in (0, 1]."""
    ordered = np.sort(np.asarray(values))
    rank = max(1, math.ceil(q * ordered.size))
    return ordered[rank - 1]


def _count(items):
    return items if isinstance(items, (int, np.integer)) else len(items)


def burstiness(series):
    """(mean_bps, max_bps, pmr, pmr95, cov) of a byte series; ratios are 0 for an all-zero series."""
    bins = series.bins
    if bins.size == 0:
        raise ProfileFormatError("series is empty")
    total = int(bins.sum())
    if total == 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0

    bin_s = series.bin_width_s
    mean_bps = 8.0 * total / (bins.size * bin_s)
    max_bps = 8.0 * int(bins.max()) / bin_s
    p95_bps = 8.0 * int(nearest_rank(bins, 0.95)) / bin_s
    values = bins.astype(np.float64)
    cov = float(values.std(ddof=0) / values.mean())
    return mean_bps, max_bps, max_bps / mean_bps, p95_bps / mean_bps, cov


def compute_metrics(series, active_hosts=0, flow_keys=0, paired_series=None):
    """
    Metrics of one windowed series.

    Args:
        series: ByteSeries of this direction
        active_hosts: hosts with >= 1 byte in the window (collection or count)
        flow_keys: flow keys active in the window (collection or count)
        paired_series: the opposite direction over the same window

    Returns:
        ProfileMetrics
    """
    mean_bps, max_bps, pmr, pmr95, cov = burstiness(series)
    this_bytes = series.total_bytes
    other_bytes = paired_series.total_bytes if paired_series is not None else 0
    both = this_bytes + other_bytes
    return ProfileMetrics(
        mean_throughput_bps=mean_bps,
        max_throughput_bps=max_bps,
        pmr=pmr,
        pmr95=pmr95,
        cov=cov,
        host_count=_count(active_hosts),
        flow_count=_count(flow_keys),
        asymmetry=0.5 if both == 0 else this_bytes / both,
    )


def recompute_metrics(series, stored):
    """
    Recompute series-derived metrics, carrying heterogeneity fields from `stored`.

    Host, flow and asymmetry figures describe the source traffic mix and
    cannot be rebuilt from one direction's bins.
    """
    mean_bps, max_bps, pmr, pmr95, cov = burstiness(series)
    return ProfileMetrics(
        mean_throughput_bps=mean_bps,
        max_throughput_bps=max_bps,
        pmr=pmr,
        pmr95=pmr95,
        cov=cov,
        host_count=stored.host_count,
        flow_count=stored.flow_count,
        asymmetry=stored.asymmetry,
        toggle_count=stored.toggle_count,
    )
