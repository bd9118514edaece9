from dataclasses import dataclass, field
import math

import numpy as np

from netreplica.exceptions import ConfigError, SeriesMismatchError
from traces.records import Direction

DEFAULT_BIN_WIDTH_MS = 100


@dataclass(eq=False)
class ByteSeries:
    """Byte counts at a fixed bin width; duration = len(bins) * bin_width_ms."""

    bin_width_ms: int
    start_time: float
    bins: np.ndarray

    def __post_init__(self):
        if int(self.bin_width_ms) <= 0:
            raise ConfigError("bin width must be > 0", field="bin_width_ms")
        self.bin_width_ms = int(self.bin_width_ms)
        self.bins = np.asarray(self.bins, dtype=np.int64)
        if self.bins.ndim != 1:
            raise SeriesMismatchError("bins must be one-dimensional")
        if self.bins.size and self.bins.min() < 0:
            raise SeriesMismatchError("bins must be >= 0")

    def __eq__(self, other):
        if not isinstance(other, ByteSeries):
            return NotImplemented
        return self.aligned_with(other) and bool(np.array_equal(self.bins, other.bins))

    def __len__(self):
        return int(self.bins.size)

    @property
    def bin_width_s(self):
        return self.bin_width_ms / 1000.0

    @property
    def duration_s(self):
        return len(self) * self.bin_width_ms / 1000.0

    @property
    def total_bytes(self):
        return int(self.bins.sum())

    @classmethod
    def zeros(cls, bin_width_ms, start_time, n_bins):
        return cls(bin_width_ms, start_time, np.zeros(n_bins, dtype=np.int64))

    def aligned_with(self, other):
        return (
            self.bin_width_ms == other.bin_width_ms
            and self.start_time == other.start_time
            and len(self) == len(other)
        )

    def slice(self, start_bin, n_bins):
        """Sub-series of n_bins starting at start_bin."""
        return ByteSeries(
            self.bin_width_ms,
            self.start_time + start_bin * self.bin_width_ms / 1000.0,
            self.bins[start_bin : start_bin + n_bins].copy(),
        )

    def rebin(self, factor, drop_partial=False):
        """Sum `factor` adjacent bins; a trailing partial group is kept as its own bin unless drop_partial."""
        factor = int(factor)
        if factor < 1:
            raise ConfigError("rebin factor must be >= 1", field="factor")
        if factor == 1:
            return ByteSeries(self.bin_width_ms, self.start_time, self.bins.copy())
        if drop_partial:
            usable = len(self) // factor * factor
            return ByteSeries(
                self.bin_width_ms * factor, self.start_time, self.bins[:usable].reshape(-1, factor).sum(axis=1)
            )
        padded = np.zeros(math.ceil(len(self) / factor) * factor, dtype=np.int64)
        padded[: len(self)] = self.bins
        return ByteSeries(
            self.bin_width_ms * factor, self.start_time, padded.reshape(-1, factor).sum(axis=1)
        )

    def throughput_bps(self):
        return self.bins.astype(np.float64) * 8.0 / self.bin_width_s


class ActivityIndex:
    """
    Which keys (hosts or flows) carried bytes in which bins.

    Entries are (bin, key) pairs sorted by bin, so the distinct keys active
    in any bin range are found with two binary searches.
    """

    def __init__(self, bins=None, keys=None):
        bins = np.asarray(bins if bins is not None else [], dtype=np.int64)
        keys = np.asarray(keys if keys is not None else [], dtype=np.uint64)
        order = np.argsort(bins, kind="stable")
        self.bins = bins[order]
        self.keys = keys[order]

    def __len__(self):
        return int(self.bins.size)

    @classmethod
    def merge(cls, indexes):
        indexes = [index for index in indexes if len(index)]
        if not indexes:
            return cls()
        return cls(
            np.concatenate([index.bins for index in indexes]),
            np.concatenate([index.keys for index in indexes]),
        )

    def active(self, start_bin=0, end_bin=None):
        """Distinct keys with at least one entry in [start_bin, end_bin)."""
        lo = np.searchsorted(self.bins, start_bin, side="left")
        hi = self.bins.size if end_bin is None else np.searchsorted(self.bins, end_bin, side="left")
        return np.unique(self.keys[lo:hi])

    def count(self, start_bin=0, end_bin=None):
        return int(self.active(start_bin, end_bin).size)


@dataclass
class HostSeries:
    """Per-host up/down series with the activity needed for heterogeneity metrics."""

    host: str
    up: ByteSeries
    down: ByteSeries
    flow_keys: set = field(default_factory=set)
    flow_activity: dict = field(default_factory=dict)

    def series(self, direction):
        return self.up if direction is Direction.UP else self.down


def bins_for_span(start_time, end_time, bin_width_ms):
    """Number of bins needed so that a packet at end_time falls inside the series."""
    return int(math.floor((end_time - start_time) * 1000.0 / bin_width_ms)) + 1


def trace_span(records):
    """(first timestamp, last timestamp) of a non-empty record list."""
    if not records:
        return 0.0, 0.0
    timestamps = [r.timestamp for r in records]
    return min(timestamps), max(timestamps)


def _bin_indexes(timestamps, start_time, bin_width_ms, n_bins):
    idx = np.floor((np.asarray(timestamps, dtype=np.float64) - start_time) * 1000.0 / bin_width_ms)
    idx = idx.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n_bins):
        raise SeriesMismatchError(
            f"packet outside series span [0, {n_bins}) bins (got {idx.min()}..{idx.max()})"
        )
    return idx


def to_timeseries(group, bin_width_ms=DEFAULT_BIN_WIDTH_MS, start_time=None, n_bins=None):
    """
    Bin a host group into up and down byte series.

    Args:
        group: HostGroup
        bin_width_ms: bin width in milliseconds (> 0)
        start_time: trace start; all hosts of a trace share it so bins align
        n_bins: series length; defaults to covering the group's last packet

    Returns:
        tuple: (up ByteSeries, down ByteSeries)
    """
    if int(bin_width_ms) <= 0:
        raise ConfigError("bin width must be > 0", field="bin_width_ms")
    packets = group.packets
    if start_time is None:
        start_time = packets[0].timestamp if packets else 0.0
    if n_bins is None:
        last = packets[-1].timestamp if packets else start_time
        n_bins = bins_for_span(start_time, last, bin_width_ms)

    result = []
    for direction in (Direction.UP, Direction.DOWN):
        selected = [p for p in packets if p.direction is direction]
        idx = _bin_indexes([p.timestamp for p in selected], start_time, bin_width_ms, n_bins)
        weights = np.asarray([p.wire_bytes for p in selected], dtype=np.float64)
        bins = np.bincount(idx, weights=weights, minlength=n_bins).astype(np.int64)
        result.append(ByteSeries(bin_width_ms, start_time, bins))
    return result[0], result[1]


def host_series(group, bin_width_ms=DEFAULT_BIN_WIDTH_MS, start_time=None, n_bins=None):
    """HostSeries for a group: both series plus per-direction flow activity."""
    up, down = to_timeseries(group, bin_width_ms, start_time, n_bins)
    activity = {}
    for direction in (Direction.UP, Direction.DOWN):
        selected = [p for p in group.packets if p.direction is direction and p.wire_bytes > 0]
        idx = _bin_indexes([p.timestamp for p in selected], up.start_time, bin_width_ms, len(up))
        activity[direction] = ActivityIndex(idx, [p.flow_key for p in selected])
    return HostSeries(
        host=group.host,
        up=up,
        down=down,
        flow_keys=group.flow_keys(),
        flow_activity=activity,
    )
