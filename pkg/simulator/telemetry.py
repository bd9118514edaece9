from dataclasses import dataclass, field
from pathlib import Path
import csv
import json
import logging
import math

import numpy as np

from netreplica.exceptions import ArtifactIOError, SimulationConfigError

logger = logging.getLogger("simulator")

CSV_HEADER = ("time_s", "throughput_bps", "rtt_ms", "qlen_pkts", "drops")
TRAFFIC_CLASSES = ("app", "cross")


def empty_counters():
    return {
        name: {
            "injected_pkts": 0,
            "injected_bytes": 0,
            "delivered_pkts": 0,
            "delivered_bytes": 0,
            "dropped_pkts": 0,
            "dropped_bytes": 0,
            "in_flight_pkts": 0,
            "in_flight_bytes": 0,
        }
        for name in TRAFFIC_CLASSES
    }


@dataclass(eq=False)
class SimTrace:
    """
    Per-bin telemetry of one simulation run.

    throughput_bps counts delivered application payload. rtt_ms is NaN in
    bins without an RTT sample. queue_pkts is the time-weighted mean
    downlink queue length. delivered_bytes sums the wire size of every
    packet delivered in the bin, app and cross traffic alike.

    Per traffic class, injected = delivered + dropped + in flight, where in
    flight counts packets still queued or propagating when the run ends.
    """

    telemetry_bin_ms: int
    throughput_bps: np.ndarray
    rtt_ms: np.ndarray
    rtt_samples: np.ndarray
    queue_pkts: np.ndarray
    drops: np.ndarray
    delivered_bytes: np.ndarray
    counters: dict = field(default_factory=empty_counters)
    flow_bytes: dict = field(default_factory=dict)
    rtt_min_ms: float = math.nan
    config: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, SimTrace):
            return NotImplemented
        return self.to_json() == other.to_json()

    def __len__(self):
        return int(self.throughput_bps.size)

    @property
    def duration_s(self):
        return len(self) * self.telemetry_bin_ms / 1000.0

    def mean_throughput_bps(self, start_s=0.0, end_s=None):
        """Mean app throughput over [start_s, end_s) on bin boundaries."""
        per_s = 1000.0 / self.telemetry_bin_ms
        first = int(round(start_s * per_s))
        last = len(self) if end_s is None else int(round(end_s * per_s))
        window = self.throughput_bps[first:last]
        return float(window.mean()) if window.size else 0.0

    def mean_rtt_ms(self):
        """Mean over all RTT samples (bins weighted by their sample count)."""
        total = int(self.rtt_samples.sum())
        if total == 0:
            return math.nan
        sampled = self.rtt_samples > 0
        return float((self.rtt_ms[sampled] * self.rtt_samples[sampled]).sum() / total)

    def in_flight(self, traffic_class):
        c = self.counters[traffic_class]
        return c["in_flight_pkts"], c["in_flight_bytes"]

    def coarsen(self, bin_ms):
        """Aggregate to a coarser granularity; bin_ms must be a multiple of the current bin."""
        if bin_ms % self.telemetry_bin_ms or bin_ms < self.telemetry_bin_ms:
            raise SimulationConfigError(
                f"telemetry_bin_ms: cannot coarsen {self.telemetry_bin_ms} ms bins to {bin_ms} ms"
            )
        factor = bin_ms // self.telemetry_bin_ms
        groups = np.arange(len(self)) // factor
        n = int(groups[-1]) + 1 if len(self) else 0
        widths = np.bincount(groups, minlength=n)
        samples = np.bincount(groups, weights=self.rtt_samples, minlength=n)
        weighted = np.where(self.rtt_samples > 0, self.rtt_ms * self.rtt_samples, 0.0)
        rtt_sum = np.bincount(groups, weights=weighted, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            rtt = np.where(samples > 0, rtt_sum / np.maximum(samples, 1), np.nan)
        return SimTrace(
            telemetry_bin_ms=bin_ms,
            throughput_bps=np.bincount(groups, weights=self.throughput_bps, minlength=n) / widths,
            rtt_ms=rtt,
            rtt_samples=samples.astype(np.int64),
            queue_pkts=np.bincount(groups, weights=self.queue_pkts, minlength=n) / widths,
            drops=np.bincount(groups, weights=self.drops, minlength=n).astype(np.int64),
            delivered_bytes=np.bincount(groups, weights=self.delivered_bytes, minlength=n).astype(np.int64),
            counters=self.counters,
            flow_bytes=self.flow_bytes,
            rtt_min_ms=self.rtt_min_ms,
            config=self.config,
        )

    def to_dict(self):
        def floats(values):
            return [None if math.isnan(v) else v for v in values.tolist()]

        return {
            "telemetry_bin_ms": self.telemetry_bin_ms,
            "throughput_bps": floats(self.throughput_bps),
            "rtt_ms": floats(self.rtt_ms),
            "rtt_samples": self.rtt_samples.tolist(),
            "queue_pkts": floats(self.queue_pkts),
            "drops": self.drops.tolist(),
            "delivered_bytes": self.delivered_bytes.tolist(),
            "counters": self.counters,
            "flow_bytes": {str(k): v for k, v in sorted(self.flow_bytes.items())},
            "rtt_min_ms": None if math.isnan(self.rtt_min_ms) else self.rtt_min_ms,
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data):
        def floats(values):
            return np.asarray([math.nan if v is None else v for v in values], dtype=np.float64)

        try:
            return cls(
                telemetry_bin_ms=int(data["telemetry_bin_ms"]),
                throughput_bps=floats(data["throughput_bps"]),
                rtt_ms=floats(data["rtt_ms"]),
                rtt_samples=np.asarray(data["rtt_samples"], dtype=np.int64),
                queue_pkts=floats(data["queue_pkts"]),
                drops=np.asarray(data["drops"], dtype=np.int64),
                delivered_bytes=np.asarray(data["delivered_bytes"], dtype=np.int64),
                counters=data.get("counters") or empty_counters(),
                flow_bytes={int(k): v for k, v in (data.get("flow_bytes") or {}).items()},
                rtt_min_ms=math.nan if data.get("rtt_min_ms") is None else float(data["rtt_min_ms"]),
                config=data.get("config") or {},
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SimulationConfigError(f"malformed simulation trace ({e})")


def write_trace_json(path, trace):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trace.to_json() + "\n", encoding="utf-8")
    return path


def load_trace_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path} ({e.strerror})")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SimulationConfigError(f"{path}: invalid JSON ({e.msg})")
    return SimTrace.from_dict(data)


def write_trace_csv(path, trace):
    """Plot-friendly export: one row per bin, empty rtt_ms where no sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bin_s = trace.telemetry_bin_ms / 1000.0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for index in range(len(trace)):
            rtt = trace.rtt_ms[index]
            writer.writerow(
                (
                    f"{index * bin_s:.3f}",
                    repr(float(trace.throughput_bps[index])),
                    "" if math.isnan(rtt) else repr(float(rtt)),
                    repr(float(trace.queue_pkts[index])),
                    int(trace.drops[index]),
                )
            )
    return path


class TelemetryRecorder:
    """Accumulates per-bin telemetry while the engine runs."""

    def __init__(self, duration_ns, bin_ms):
        self.bin_ns = bin_ms * 1_000_000
        self.bin_ms = bin_ms
        self.duration_ns = duration_ns
        self.n_bins = max(1, math.ceil(duration_ns / self.bin_ns))
        self.payload = np.zeros(self.n_bins, dtype=np.int64)
        self.rtt_sum = np.zeros(self.n_bins)
        self.rtt_count = np.zeros(self.n_bins, dtype=np.int64)
        self.drops = np.zeros(self.n_bins, dtype=np.int64)
        self.wire_bytes = np.zeros(self.n_bins, dtype=np.int64)
        self.queue_area = np.zeros(self.n_bins)
        self.queue_len = 0
        self.queue_since = 0
        self.rtt_min_ns = None
        self.counters = empty_counters()
        self.flow_bytes = {}

    def _bin(self, now):
        return min(now // self.bin_ns, self.n_bins - 1)

    def queue_changed(self, now, length):
        """Integrate the previous queue length up to `now`, then switch to `length`."""
        if self.queue_len and now > self.queue_since:
            start = self.queue_since
            while start < now:
                index = self._bin(start)
                stop = min(now, (index + 1) * self.bin_ns)
                if index == self.n_bins - 1:
                    stop = now
                self.queue_area[index] += self.queue_len * (stop - start)
                start = stop
        self.queue_since = now
        self.queue_len = length

    def injected(self, packet):
        c = self.counters["app" if packet.is_app else "cross"]
        c["injected_pkts"] += 1
        c["injected_bytes"] += packet.size

    def dropped(self, packet, now):
        c = self.counters["app" if packet.is_app else "cross"]
        c["dropped_pkts"] += 1
        c["dropped_bytes"] += packet.size
        self.drops[self._bin(now)] += 1

    def delivered(self, packet, now, payload):
        c = self.counters["app" if packet.is_app else "cross"]
        c["delivered_pkts"] += 1
        c["delivered_bytes"] += packet.size
        self.flow_bytes[packet.flow] = self.flow_bytes.get(packet.flow, 0) + packet.size
        self.wire_bytes[self._bin(now)] += packet.size
        if payload:
            self.payload[self._bin(now)] += payload

    def stranded(self, packet):
        """Packet still queued or propagating at the end of the run."""
        c = self.counters["app" if packet.is_app else "cross"]
        c["in_flight_pkts"] += 1
        c["in_flight_bytes"] += packet.size

    def rtt_sample(self, now, rtt_ns):
        index = self._bin(now)
        self.rtt_sum[index] += rtt_ns / 1e6
        self.rtt_count[index] += 1
        if self.rtt_min_ns is None or rtt_ns < self.rtt_min_ns:
            self.rtt_min_ns = rtt_ns

    def finish(self, config):
        self.queue_changed(self.duration_ns, 0)
        widths_ns = np.full(self.n_bins, float(self.bin_ns))
        widths_ns[-1] = self.duration_ns - (self.n_bins - 1) * self.bin_ns
        with np.errstate(invalid="ignore", divide="ignore"):
            rtt = np.where(self.rtt_count > 0, self.rtt_sum / np.maximum(self.rtt_count, 1), np.nan)
        return SimTrace(
            telemetry_bin_ms=self.bin_ms,
            throughput_bps=self.payload * 8e9 / widths_ns,
            rtt_ms=rtt,
            rtt_samples=self.rtt_count.copy(),
            queue_pkts=self.queue_area / widths_ns,
            drops=self.drops.copy(),
            delivered_bytes=self.wire_bytes.copy(),
            counters=self.counters,
            flow_bytes=dict(self.flow_bytes),
            rtt_min_ms=math.nan if self.rtt_min_ns is None else self.rtt_min_ns / 1e6,
            config=config,
        )
