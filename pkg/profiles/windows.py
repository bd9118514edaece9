from dataclasses import dataclass, replace
import hashlib
import json
import logging

from netreplica.exceptions import ConfigError
from traces.records import Direction
from .metrics import ProfileMetrics, compute_metrics
from .series import ByteSeries
from .tree import LEVELS

logger = logging.getLogger("profiles")

MIN_DURATION_S = 1
MAX_DURATION_S = 60
ID_LENGTH = 16


def profile_id(source_trace, prefix, direction, window_start_s, window_duration_s, bins):
    """Truncated sha256 over the canonical JSON of the identifying fields."""
    payload = json.dumps(
        {
            "source_trace": source_trace,
            "prefix": str(prefix),
            "direction": Direction(direction).value,
            "window_start_s": float(window_start_s),
            "window_duration_s": float(window_duration_s),
            "bins": [int(b) for b in bins],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:ID_LENGTH]


@dataclass(eq=False)
class CrossTrafficProfile:
    id: str
    source_trace: str
    prefix: str
    direction: Direction
    window_start_s: float
    window_duration_s: float
    series: object
    metrics: ProfileMetrics

    @property
    def bin_width_ms(self):
        return self.series.bin_width_ms

    @property
    def bins(self):
        return self.series.bins

    def __eq__(self, other):
        if not isinstance(other, CrossTrafficProfile):
            return NotImplemented
        return (
            self.id == other.id
            and self.source_trace == other.source_trace
            and self.prefix == other.prefix
            and self.direction is other.direction
            and self.window_start_s == other.window_start_s
            and self.window_duration_s == other.window_duration_s
            and self.series == other.series
            and self.metrics == other.metrics
        )

    @classmethod
    def build(cls, source_trace, prefix, direction, window_start_s, window_duration_s, series, metrics):
        return cls(
            id=profile_id(source_trace, prefix, direction, window_start_s, window_duration_s, series.bins),
            source_trace=source_trace,
            prefix=str(prefix),
            direction=Direction(direction),
            window_start_s=float(window_start_s),
            window_duration_s=float(window_duration_s),
            series=ByteSeries(series.bin_width_ms, float(window_start_s), series.bins),
            metrics=metrics,
        )

    def with_series(self, series, metrics):
        """Derived profile over new bins; the id follows the content."""
        derived = replace(self, series=series, metrics=metrics)
        derived.id = profile_id(
            self.source_trace, self.prefix, self.direction, self.window_start_s, self.window_duration_s, series.bins
        )
        return derived


def _bins_per(seconds, bin_width_ms, field):
    exact = seconds * 1000.0 / bin_width_ms
    count = int(round(exact))
    if count < 1:
        raise ConfigError(f"{field} {seconds} s is shorter than the {bin_width_ms} ms bin width", field=field)
    if abs(exact - count) > 1e-9:
        raise ConfigError(f"{field} {seconds} s is not a multiple of the {bin_width_ms} ms bin width", field=field)
    return count


def window_count(n_bins, window_bins, stride_bins):
    return (n_bins - window_bins) // stride_bins + 1 if n_bins >= window_bins else 0


def extract_windows(node, durations_s, stride_s, source_trace=""):
    """
    Slide windows over both directions of a node.

    Windows of each duration start at 0, stride, 2*stride, ... (relative to
    the trace start) while they fit in the series; infeasible durations
    yield nothing.

    Args:
        node: PrefixNode
        durations_s: window durations in seconds
        stride_s: stride in seconds (> 0)
        source_trace: trace name stored in every profile

    Returns:
        list: CrossTrafficProfiles, per direction and duration in start order

    Raises:
        ConfigError: stride <= 0, or a duration/stride that is not a whole number of bins
    """
    if stride_s <= 0:
        raise ConfigError("stride must be > 0", field="stride_s")
    bin_width_ms = node.up.bin_width_ms
    n_bins = len(node.up)
    stride_bins = _bins_per(stride_s, bin_width_ms, "stride_s")

    profiles = []
    for direction in (Direction.UP, Direction.DOWN):
        series = node.series(direction)
        paired = node.series(direction.opposite)
        hosts = node.host_activity.get(direction)
        flows = node.flow_activity.get(direction)
        for duration in durations_s:
            window_bins = _bins_per(duration, bin_width_ms, "window_duration_s")
            for k in range(window_count(n_bins, window_bins, stride_bins)):
                start = k * stride_bins
                window = series.slice(start, window_bins)
                metrics = compute_metrics(
                    window,
                    active_hosts=hosts.count(start, start + window_bins) if hosts is not None else 0,
                    flow_keys=flows.count(start, start + window_bins) if flows is not None else 0,
                    paired_series=paired.slice(start, window_bins),
                )
                profiles.append(
                    CrossTrafficProfile.build(
                        source_trace,
                        node.prefix,
                        direction,
                        start * bin_width_ms / 1000.0,
                        duration,
                        window,
                        metrics,
                    )
                )
    return profiles


def validate_durations(durations_s):
    if not durations_s:
        raise ConfigError("at least one window duration is required", field="window_durations_s")
    for duration in durations_s:
        if not MIN_DURATION_S <= duration <= MAX_DURATION_S:
            raise ConfigError(
                f"window duration {duration} s outside [{MIN_DURATION_S}, {MAX_DURATION_S}]",
                field="window_durations_s",
            )


def extract_tree_windows(root, durations_s, stride_s, levels=LEVELS, source_trace=""):
    """Windows for every node at the chosen depths, sorted by id."""
    validate_durations(durations_s)
    profiles = []
    nodes = 0
    for node in root.walk(levels):
        nodes += 1
        profiles.extend(extract_windows(node, durations_s, stride_s, source_trace))
    profiles.sort(key=lambda p: p.id)
    logger.info(f"Extracted {len(profiles)} profiles from {nodes} nodes at /{'/'.join(map(str, levels))}")
    return profiles
