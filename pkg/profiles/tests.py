from pathlib import Path
import tempfile
import time

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from netreplica.exceptions import ConfigError, ProfileFormatError, SeriesMismatchError
from traces.decompose import decompose
from traces.records import Direction, GroupPacket, HostGroup, IngestConfig, Protocol
from traces.synthetic import generate_trace
from .metrics import compute_metrics, recompute_metrics
from .pipeline import transform
from .serializers import dumps_profile, read_profiles_jsonl, write_profiles_jsonl
from .series import ByteSeries, HostSeries, bins_for_span, host_series, to_timeseries, trace_span
from .tree import build_prefix_tree
from .windows import extract_windows


def packet(ts, direction, size, key=1):
    return GroupPacket(ts, direction, size, key, "1.2.3.4", 40000, 443, Protocol.TCP)


def series_of(bins, bin_width_ms=100):
    return ByteSeries(bin_width_ms, 0.0, np.asarray(bins, dtype=np.int64))


def host_of(host, up, down=None):
    down = down if down is not None else [0] * len(up)
    return HostSeries(host=host, up=series_of(up), down=series_of(down))


class TimeSeriesTests(SimpleTestCase):
    def test_binning(self):
        group = HostGroup("10.0.0.5", [packet(0.05, Direction.DOWN, 1000), packet(0.12, Direction.DOWN, 500)])
        up, down = to_timeseries(group, 100, start_time=0.0)
        self.assertEqual(down.bins.tolist(), [1000, 500])
        self.assertEqual(up.bins.tolist(), [0, 0])

    def test_empty_group(self):
        up, down = to_timeseries(HostGroup("10.0.0.5"), 100, start_time=0.0, n_bins=10)
        self.assertEqual(up.bins.tolist(), [0] * 10)
        self.assertEqual(down.bins.tolist(), [0] * 10)
        self.assertEqual(up.duration_s, 1.0)

    def test_same_bin_sums(self):
        group = HostGroup("10.0.0.5", [packet(0.01, Direction.UP, 40), packet(0.02, Direction.UP, 60)])
        up, _ = to_timeseries(group, 100, start_time=0.0)
        self.assertEqual(up.bins.tolist(), [100])

    def test_global_start_aligns_hosts(self):
        group = HostGroup("10.0.0.5", [packet(10.35, Direction.UP, 40)])
        up, _ = to_timeseries(group, 100, start_time=10.0, n_bins=5)
        self.assertEqual(up.bins.tolist(), [0, 0, 0, 40, 0])

    def test_bad_bin_width(self):
        with self.assertRaises(ConfigError):
            to_timeseries(HostGroup("10.0.0.5"), 0)

    def test_rebin_and_slice(self):
        s = series_of([1, 2, 3, 4, 5])
        self.assertEqual(s.rebin(2).bins.tolist(), [3, 7, 5])
        self.assertEqual(s.rebin(2).bin_width_ms, 200)
        self.assertEqual(s.slice(1, 3).bins.tolist(), [2, 3, 4])
        self.assertAlmostEqual(s.slice(1, 3).start_time, 0.1)


class PrefixTreeTests(SimpleTestCase):
    def test_subnet_sum(self):
        root = build_prefix_tree({
            "10.0.1.2": host_of("10.0.1.2", [100, 0]),
            "10.0.1.3": host_of("10.0.1.3", [0, 50]),
        })
        node = root.find("10.0.1.0/24")
        self.assertEqual(node.up.bins.tolist(), [100, 50])
        self.assertEqual(sorted(node.children), [2, 3])

    def test_single_host_ancestors(self):
        root = build_prefix_tree({"10.0.1.2": host_of("10.0.1.2", [5, 7, 9], [1, 0, 1])})
        for prefix in ("10.0.1.2/32", "10.0.1.0/24", "10.0.0.0/16", "10.0.0.0/8", "0.0.0.0/0"):
            node = root.find(prefix)
            self.assertEqual(node.up.bins.tolist(), [5, 7, 9], prefix)
            self.assertEqual(node.down.bins.tolist(), [1, 0, 1], prefix)

    def test_common_ancestor(self):
        root = build_prefix_tree({
            "10.0.1.2": host_of("10.0.1.2", [1]),
            "10.0.2.7": host_of("10.0.2.7", [2]),
        })
        node = root.find("10.0.0.0/16")
        self.assertEqual(sorted(node.children), [1, 2])
        self.assertEqual(root.active_hosts, {"10.0.1.2", "10.0.2.7"})
        self.assertIsNone(root.find("10.0.3.0/24"))

    def test_walk_order(self):
        root = build_prefix_tree({
            "10.0.2.7": host_of("10.0.2.7", [1]),
            "10.0.1.2": host_of("10.0.1.2", [2]),
        })
        self.assertEqual(
            [str(n.prefix) for n in root.walk((24, 32))],
            ["10.0.1.0/24", "10.0.1.2/32", "10.0.2.0/24", "10.0.2.7/32"],
        )

    def test_mismatched_lengths(self):
        with self.assertRaises(SeriesMismatchError):
            build_prefix_tree({
                "10.0.1.2": host_of("10.0.1.2", [1, 2]),
                "10.0.1.3": host_of("10.0.1.3", [1, 2, 3]),
            })

    def test_conservation_on_synthetic_trace(self):
        records = generate_trace(packets=100_000, duration_s=60.0, seed=11)
        cfg = IngestConfig.from_strings(["10.0.0.0/16"])
        started = time.perf_counter()
        groups, stats = decompose(records, cfg)
        start, end = trace_span(records)
        n_bins = bins_for_span(start, end, 100)
        root = build_prefix_tree({
            host: host_series(group, 100, start_time=start, n_bins=n_bins) for host, group in groups.items()
        })
        elapsed = time.perf_counter() - started

        leaves = [n for n in root.walk((32,))]
        self.assertEqual(sum(n.up.total_bytes + n.down.total_bytes for n in leaves), stats.retained_bytes)
        for node in root.walk():
            if node.is_leaf:
                continue
            for direction in (Direction.UP, Direction.DOWN):
                summed = sum(c.series(direction).bins for c in node.children.values())
                self.assertTrue(np.array_equal(node.series(direction).bins, summed))
            self.assertEqual(node.active_hosts, set().union(*(c.active_hosts for c in node.children.values())))
        self.assertLess(elapsed, 5.0)


class MetricsTests(SimpleTestCase):
    def test_constant_series(self):
        m = compute_metrics(series_of([1000, 1000, 1000, 1000]))
        self.assertAlmostEqual(m.mean_throughput_bps, 80_000)
        self.assertAlmostEqual(m.pmr, 1.0)
        self.assertAlmostEqual(m.pmr95, 1.0)
        self.assertAlmostEqual(m.cov, 0.0)

    def test_two_point_series(self):
        m = compute_metrics(series_of([0, 2000]))
        self.assertAlmostEqual(m.mean_throughput_bps, 80_000)
        self.assertAlmostEqual(m.pmr, 2.0)
        self.assertAlmostEqual(m.cov, 1.0)

    def test_nearest_rank_p95(self):
        m = compute_metrics(series_of([2000] + [0] * 19))
        self.assertAlmostEqual(m.pmr, 20.0)
        self.assertEqual(m.pmr95, 0.0)

    def test_all_zero(self):
        m = compute_metrics(series_of([0, 0, 0]), paired_series=series_of([0, 0, 0]))
        self.assertEqual((m.mean_throughput_bps, m.pmr, m.pmr95, m.cov), (0.0, 0.0, 0.0, 0.0))
        self.assertEqual(m.asymmetry, 0.5)

    def test_heterogeneity(self):
        m = compute_metrics(series_of([300]), active_hosts={"a", "b"}, flow_keys=5, paired_series=series_of([100]))
        self.assertEqual(m.host_count, 2)
        self.assertEqual(m.flow_count, 5)
        self.assertAlmostEqual(m.asymmetry, 0.75)

    @settings(max_examples=60, deadline=None)
    @given(
        bins=st.lists(st.integers(0, 10**6), min_size=1, max_size=50),
        factor=st.integers(1, 1000),
    )
    def test_scale_equivariance(self, bins, factor):
        base = compute_metrics(series_of(bins), paired_series=series_of([7] * len(bins)))
        scaled = compute_metrics(
            series_of([b * factor for b in bins]), paired_series=series_of([7 * factor] * len(bins))
        )
        self.assertAlmostEqual(scaled.mean_throughput_bps, base.mean_throughput_bps * factor, delta=1e-6 * factor * (1 + base.mean_throughput_bps))
        self.assertAlmostEqual(scaled.max_throughput_bps, base.max_throughput_bps * factor, delta=1e-6 * factor * (1 + base.max_throughput_bps))
        for name in ("pmr", "pmr95", "cov", "asymmetry"):
            self.assertAlmostEqual(getattr(scaled, name), getattr(base, name), places=9)
        if base.mean_throughput_bps > 0:
            self.assertGreaterEqual(base.pmr, base.pmr95)


class WindowTests(SimpleTestCase):
    def node_with(self, n_bins, bin_width_ms=100):
        hs = HostSeries(
            host="10.0.1.2",
            up=ByteSeries(bin_width_ms, 0.0, np.arange(n_bins) % 7),
            down=ByteSeries(bin_width_ms, 0.0, np.ones(n_bins, dtype=np.int64)),
        )
        return build_prefix_tree({"10.0.1.2": hs}).find("10.0.1.2/32")

    def count(self, profiles, direction):
        return sum(1 for p in profiles if p.direction is direction)

    def test_fifteen_minute_trace(self):
        profiles = extract_windows(self.node_with(9000), [60], 10)
        self.assertEqual(self.count(profiles, Direction.UP), 85)
        self.assertEqual(self.count(profiles, Direction.DOWN), 85)
        starts = [p.window_start_s for p in profiles if p.direction is Direction.UP]
        self.assertEqual(starts[:3], [0.0, 10.0, 20.0])
        self.assertEqual(starts[-1], 840.0)

    def test_boundary_and_infeasible(self):
        node = self.node_with(600)
        self.assertEqual(len(extract_windows(node, [60], 10)), 2)
        self.assertEqual(extract_windows(node, [61], 10), [])

    def test_duration_shorter_than_bin(self):
        with self.assertRaises(ConfigError):
            extract_windows(self.node_with(100, bin_width_ms=2000), [1], 1)

    def test_coverage_when_stride_divides(self):
        node = self.node_with(300)
        profiles = extract_windows(node, [10], 5)
        covered = set()
        for p in profiles:
            first = int(round(p.window_start_s * 10))
            covered.update(range(first, first + len(p.bins)))
        self.assertEqual(covered, set(range(300)))

    def test_recompute_is_exact(self):
        for p in extract_windows(self.node_with(300), [5, 10], 5):
            self.assertEqual(recompute_metrics(p.series, p.metrics), p.metrics)


class TransformTests(SimpleTestCase):
    def setUp(self):
        self.cfg = IngestConfig.from_strings(["10.0.0.0/16"])
        self.records = generate_trace(
            internal_hosts=("10.0.1.2", "10.0.2.7"), packets=2000, duration_s=10.0, seed=3
        )

    def test_two_windows_per_host_direction(self):
        result = transform(self.records, self.cfg, durations_s=[5], stride_s=5, levels=(32,), source_trace="t")
        self.assertEqual(len(result.profiles), 2 * 2 * 2)
        ids = [p.id for p in result.profiles]
        self.assertEqual(ids, sorted(ids))
        self.assertEqual(len(set(ids)), len(ids))

    def test_deterministic(self):
        first = transform(self.records, self.cfg, durations_s=[5, 10], stride_s=1)
        second = transform(self.records, self.cfg, durations_s=[5, 10], stride_s=1)
        self.assertEqual([dumps_profile(p) for p in first.profiles], [dumps_profile(p) for p in second.profiles])

    def test_no_internal_hosts(self):
        cfg = IngestConfig.from_strings(["192.168.0.0/16"])
        result = transform(self.records, cfg, durations_s=[5], stride_s=5)
        self.assertEqual(result.profiles, [])
        self.assertEqual(result.stats.retained_packets, 0)

    def test_duration_range(self):
        with self.assertRaises(ConfigError):
            transform(self.records, self.cfg, durations_s=[90], stride_s=5)


class ProfileJsonlTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.work = Path(self._tmp.name)
        records = generate_trace(packets=500, duration_s=6.0, seed=5)
        self.profiles = transform(records, IngestConfig.from_strings(["10.0.0.0/16"]), [2], 2).profiles

    def tearDown(self):
        self._tmp.cleanup()

    def test_write_then_read(self):
        path = self.work / "ctp.jsonl"
        self.assertEqual(write_profiles_jsonl(path, self.profiles), len(self.profiles))
        self.assertEqual(read_profiles_jsonl(path), self.profiles)
        first = path.read_text().splitlines()[0]
        for name in ('"id"', '"source_trace"', '"prefix"', '"direction"', '"window_start_s"',
                     '"window_duration_s"', '"bin_width_ms"', '"bins"', '"metrics"'):
            self.assertIn(name, first)

    def test_bad_line_named(self):
        path = self.work / "bad.jsonl"
        lines = [dumps_profile(p) for p in self.profiles[:8]]
        lines[6] = lines[6].replace('"direction":"UP"', '"direction":"SIDEWAYS"').replace(
            '"direction":"DOWN"', '"direction":"SIDEWAYS"'
        )
        path.write_text("\n".join(lines) + "\n")
        with self.assertRaises(ProfileFormatError) as ctx:
            read_profiles_jsonl(path)
        self.assertEqual(ctx.exception.line, 7)
        self.assertIn("direction", str(ctx.exception))

    def test_bins_must_match_duration(self):
        path = self.work / "short.jsonl"
        line = dumps_profile(self.profiles[0]).replace('"bins":[', '"bins":[0,')
        path.write_text(line + "\n")
        with self.assertRaises(ProfileFormatError):
            read_profiles_jsonl(path)
