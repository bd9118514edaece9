from pathlib import Path
import tempfile
import time

import numpy as np
from django.test import SimpleTestCase

from netreplica.exceptions import ConfigError, SimulationConfigError
from profiles.serializers import profile_to_dict
from profiles.synthetic import make_profile
from .aqm import FQCoDel, PFIFO, CoDelQueue, Packet, flow_bucket
from .batch import BatchError, consistency_experiment, run_batch, scaling_check
from .config import AQM, AppFlowConfig, BottleneckConfig, Scenario
from .engine import simulate
from .link import TokenBucket
from .schedule import bin_packet_sizes, replay_schedule
from .serializers import scenario_from_data
from .telemetry import CSV_HEADER, load_trace_json, write_trace_csv, write_trace_json

MBPS = 1e6
MS = 1_000_000


def bursty_ctp(seconds=20):
    """16 Mbps for 100 ms, silent for 100 ms."""
    return make_profile([200_000, 0] * (seconds * 5))


def run(rate_mbps=10, latency_ms=10, aqm=AQM.PFIFO, duration_s=30, ctp=None, seed=0, telemetry_bin_ms=100):
    bottleneck = BottleneckConfig(shaping_rate_bps=rate_mbps * MBPS, base_latency_ms=latency_ms, aqm=aqm)
    app = AppFlowConfig(duration_s=duration_s, seed=seed)
    return simulate(bottleneck, app, ctp, telemetry_bin_ms)


class QueueTests(SimpleTestCase):
    def test_pfifo_tail_drop(self):
        queue = PFIFO(3)
        accepted = [queue.enqueue(Packet(1, 1500), 0) for _ in range(4)]
        self.assertEqual(accepted, [True, True, True, False])
        self.assertEqual(len(queue), 3)

    def test_codel_below_target_never_drops(self):
        drops = []
        queue = CoDelQueue(1500, lambda p, now: drops.append(p))
        for step in range(1000):
            now = step * MS
            queue.enqueue(Packet(1, 1500), now)
            queue.enqueue(Packet(1, 1500), now)
            self.assertIsNotNone(queue.dequeue(now + 2 * MS))
            self.assertIsNotNone(queue.dequeue(now + 2 * MS))
        self.assertEqual(drops, [])

    def test_codel_drops_standing_queue(self):
        drops = []
        queue = CoDelQueue(1500, lambda p, now: drops.append(p))
        for step in range(10):
            queue.enqueue(Packet(1, 1500), step * MS)
        for step in range(10, 1000):
            queue.enqueue(Packet(1, 1500), step * MS)
            queue.dequeue(step * MS)
        self.assertGreater(len(drops), 0)

    def test_flow_hash_separates_app_and_cross(self):
        self.assertEqual(flow_bucket(0), 0)
        self.assertEqual(len({flow_bucket(flow) for flow in range(3)}), 3)
        self.assertTrue(all(0 <= flow_bucket(flow) < 1024 for flow in range(5000)))

    def test_fq_codel_shares_saturated_link(self):
        delivered = {1: 0, 2: 0}
        queue = FQCoDel(1000, 1500)
        # 0.1 ms ticks: each flow offers 12 Mbps, the link drains 10 Mbps
        for tick in range(100_000):
            now = tick * 100_000
            if tick % 10 == 0:
                queue.enqueue(Packet(1, 1500), now)
                queue.enqueue(Packet(2, 1500), now)
            if tick % 12 == 0:
                packet = queue.dequeue(now)
                if packet is not None:
                    delivered[packet.flow] += packet.size
        ratio = delivered[1] / delivered[2]
        self.assertGreater(ratio, 0.9)
        self.assertLess(ratio, 1.1)

    def test_fq_codel_overflow_drops_from_fattest_bucket(self):
        dropped = []
        queue = FQCoDel(3, 1500, lambda p, now: dropped.append(p))
        for _ in range(3):
            self.assertTrue(queue.enqueue(Packet(1, 1500), 0))
        self.assertTrue(queue.enqueue(Packet(2, 1500), 0))
        self.assertEqual([p.flow for p in dropped], [1])
        self.assertEqual(len(queue), 3)


class TokenBucketTests(SimpleTestCase):
    def test_starts_full(self):
        bucket = TokenBucket(8e6, 3000, 1500)
        self.assertEqual(bucket.ready_at(0), 0)

    def test_waits_for_threshold(self):
        bucket = TokenBucket(8e9, 3000, 1500)
        bucket.consume(3000)
        # 1 byte per nanosecond
        self.assertEqual(bucket.ready_at(0), 1500)
        bucket.consume(1000)
        self.assertEqual(bucket.ready_at(1000), 2500)


class ScheduleTests(SimpleTestCase):
    def test_paces_bin_uniformly(self):
        offsets, sizes = replay_schedule(make_profile([3000]), 1500)
        self.assertEqual(sizes.tolist(), [1500, 1500])
        self.assertEqual(offsets.tolist(), [0, 50 * MS])

    def test_zero_bin_emits_nothing(self):
        offsets, sizes = replay_schedule(make_profile([0, 1500]), 1500)
        self.assertEqual(offsets.tolist(), [100 * MS])
        self.assertEqual(sizes.tolist(), [1500])

    def test_remainder_packet(self):
        self.assertEqual(bin_packet_sizes(1600, 1500), [1500, 100])

    def test_small_remainder_is_topped_up(self):
        sizes = bin_packet_sizes(1520, 1500)
        self.assertEqual(sizes, [1456, 64])
        self.assertEqual(bin_packet_sizes(40, 1500), [40])

    def test_conserves_bytes(self):
        rng = np.random.default_rng(3)
        for total in rng.integers(0, 500_000, size=200).tolist():
            sizes = bin_packet_sizes(total, 1500)
            self.assertEqual(sum(sizes), total)
            if total >= 64:
                self.assertTrue(all(64 <= size <= 1500 for size in sizes))


class ConfigTests(SimpleTestCase):
    def test_rejects_non_positive_rate(self):
        with self.assertRaisesMessage(SimulationConfigError, "shaping_rate_bps"):
            BottleneckConfig(shaping_rate_bps=0)

    def test_unknown_aqm(self):
        with self.assertRaisesMessage(SimulationConfigError, "aqm"):
            AQM.parse("red")
        self.assertIs(AQM.parse("fq_codel"), AQM.FQ_CODEL)

    def test_burst_defaults_to_two_mtus(self):
        self.assertEqual(BottleneckConfig(shaping_rate_bps=1e6).token_bucket_burst_bytes, 3000)

    def test_telemetry_bin_choices(self):
        bottleneck = BottleneckConfig(shaping_rate_bps=1e6)
        with self.assertRaisesMessage(SimulationConfigError, "telemetry_bin_ms"):
            Scenario(bottleneck, AppFlowConfig(duration_s=1), telemetry_bin_ms=50)

    def test_document_errors_name_the_field(self):
        with self.assertRaisesMessage(SimulationConfigError, "bottleneck.shaping_rate_bps"):
            scenario_from_data({"bottleneck": {"shaping_rate_bps": -1}, "app": {"duration_s": 1}})
        scenario = scenario_from_data(
            {"bottleneck": {"shaping_rate_bps": 1e6, "aqm": "codel"}, "app": {"duration_s": 2, "seed": 7}}
        )
        self.assertIs(scenario.bottleneck.aqm, AQM.CODEL)
        self.assertEqual(scenario.app.seed, 7)

    def test_ctp_document_is_validated(self):
        base = {"bottleneck": {"shaping_rate_bps": 1e6}, "app": {"duration_s": 1}}
        profile = make_profile([1000, 0, 2000])
        scenario = scenario_from_data({**base, "ctp": profile_to_dict(profile)})
        self.assertEqual(scenario.ctp, profile)
        with self.assertRaisesMessage(SimulationConfigError, "ctp.id"):
            scenario_from_data({**base, "ctp": {"bins": [1000]}})
        with self.assertRaisesMessage(SimulationConfigError, "ctp: expected a JSON object"):
            scenario_from_data({**base, "ctp": [1000]})


class SimulateTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        started = time.perf_counter()
        cls.baseline = run()
        cls.baseline_runtime = time.perf_counter() - started

    def test_self_induced_congestion_fills_link(self):
        mean = self.baseline.mean_throughput_bps(20, 30)
        self.assertGreaterEqual(mean, 9.0 * MBPS)
        self.assertLessEqual(mean, 10.0 * MBPS)
        self.assertLess(self.baseline_runtime, 2.0)

    def test_rtt_never_below_base_latency(self):
        self.assertGreaterEqual(self.baseline.rtt_min_ms, 10.0)
        self.assertGreaterEqual(np.nanmin(self.baseline.rtt_ms), 10.0)
        trace = run(latency_ms=100, duration_s=5)
        self.assertGreaterEqual(trace.rtt_min_ms, 100.0)

    def test_shaping_ceiling_per_bin(self):
        bin_s = 0.1
        bursty = run(duration_s=5, ctp=bursty_ctp(5))
        for trace in (self.baseline, bursty):
            ceiling = 10 * MBPS * bin_s / 8 + trace.config["bottleneck"]["token_bucket_burst_bytes"]
            self.assertTrue(np.all(trace.delivered_bytes <= ceiling))
        self.assertGreater(bursty.counters["cross"]["delivered_bytes"], 0)

    def test_conservation(self):
        bursty = run(aqm=AQM.CODEL, duration_s=5, ctp=bursty_ctp(5))
        for trace in (self.baseline, bursty):
            for traffic_class in ("app", "cross"):
                with self.subTest(traffic_class=traffic_class, cross_traffic=trace is bursty):
                    c = trace.counters[traffic_class]
                    self.assertEqual(c["injected_pkts"], c["delivered_pkts"] + c["dropped_pkts"] + c["in_flight_pkts"])
                    self.assertEqual(
                        c["injected_bytes"], c["delivered_bytes"] + c["dropped_bytes"] + c["in_flight_bytes"]
                    )
            delivered = trace.counters["app"]["delivered_bytes"] + trace.counters["cross"]["delivered_bytes"]
            self.assertEqual(int(trace.delivered_bytes.sum()), delivered)
        self.assertGreater(self.baseline.in_flight("app")[0], 0)
        self.assertEqual(self.baseline.counters["cross"]["injected_pkts"], 0)
        self.assertGreater(bursty.counters["cross"]["injected_pkts"], 0)

    def test_high_latency_degrades_throughput(self):
        slow = run(latency_ms=1000)
        self.assertLess(slow.mean_throughput_bps(), 9.0 * MBPS)
        medium = run(latency_ms=100)
        delivered = [t.counters["app"]["delivered_bytes"] for t in (self.baseline, medium, slow)]
        self.assertEqual(delivered, sorted(delivered, reverse=True))

    def test_same_seed_is_bit_identical(self):
        ctp = bursty_ctp(5)
        self.assertEqual(run(duration_s=5, ctp=ctp, seed=4), run(duration_s=5, ctp=ctp, seed=4))

    def test_empty_profile_is_no_cross_traffic(self):
        quiet = run(duration_s=5)
        empty = run(duration_s=5, ctp=make_profile([0, 0, 0]))
        np.testing.assert_array_equal(quiet.throughput_bps, empty.throughput_bps)
        np.testing.assert_array_equal(quiet.rtt_ms, empty.rtt_ms)
        self.assertEqual(empty.counters["cross"]["delivered_bytes"], 0)

    def test_residual_capacity(self):
        constant = make_profile([50_000] * 300)
        trace = run(ctp=constant)
        mean = trace.mean_throughput_bps(20, 30)
        self.assertGreaterEqual(mean, 0.8 * 6 * MBPS)
        self.assertLessEqual(mean, 1.0 * 6 * MBPS)
        self.assertEqual(trace.counters["cross"]["dropped_pkts"], 0)

    def test_aqm_ordering_under_bursty_cross_traffic(self):
        ctp = bursty_ctp()
        rtt = {aqm: run(latency_ms=100, aqm=aqm, duration_s=20, ctp=ctp).mean_rtt_ms() for aqm in AQM}
        self.assertLessEqual(rtt[AQM.FQ_CODEL], rtt[AQM.CODEL])
        self.assertLess(rtt[AQM.CODEL], rtt[AQM.PFIFO])

    def test_telemetry_granularities_agree(self):
        fine = run(duration_s=5, telemetry_bin_ms=10)
        coarse = run(duration_s=5, telemetry_bin_ms=100)
        np.testing.assert_allclose(fine.coarsen(100).throughput_bps, coarse.throughput_bps)
        self.assertEqual(len(fine.coarsen(1000)), 5)
        with self.assertRaises(SimulationConfigError):
            coarse.coarsen(150)


class TraceOutputTests(SimpleTestCase):
    def test_json_round_trip_and_csv(self):
        trace = run(duration_s=2, ctp=bursty_ctp(2))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trace_json(Path(tmp) / "trace.json", trace)
            self.assertEqual(load_trace_json(path), trace)
            csv_path = write_trace_csv(Path(tmp) / "trace.csv", trace)
            lines = csv_path.read_text().splitlines()
        self.assertEqual(lines[0], ",".join(CSV_HEADER))
        self.assertEqual(len(lines), len(trace) + 1)
        self.assertEqual(trace.config["bottleneck"]["aqm"], "PFIFO")
        self.assertEqual(trace.config["ctp_id"], bursty_ctp(2).id)


class BatchTests(SimpleTestCase):
    def scenarios(self, count):
        bottleneck = BottleneckConfig(shaping_rate_bps=8 * MBPS, base_latency_ms=20, aqm=AQM.FQ_CODEL)
        ctp = make_profile([120_000, 0, 40_000], flow_count=4)
        return [Scenario(bottleneck, AppFlowConfig(duration_s=2, seed=seed, start_jitter_ms=30), ctp) for seed in range(count)]

    def test_empty_batch(self):
        self.assertEqual(run_batch([]), [])

    def test_partial_failure(self):
        items = self.scenarios(3)
        items.insert(1, {"bottleneck": {"shaping_rate_bps": 0}, "app": {"duration_s": 1}})
        results = run_batch(items)
        self.assertEqual(len(results), 4)
        self.assertIsInstance(results[1], BatchError)
        self.assertEqual(results[1].index, 1)
        self.assertIn("bottleneck.shaping_rate_bps", results[1].message)
        self.assertFalse(any(isinstance(r, BatchError) for i, r in enumerate(results) if i != 1))

    def test_malformed_ctp_item_fails_alone(self):
        good = {"bottleneck": {"shaping_rate_bps": 8 * MBPS, "base_latency_ms": 20}, "app": {"duration_s": 1}}
        results = run_batch([good, {**good, "ctp": {"bins": [1000]}}, good])
        self.assertIsInstance(results[1], BatchError)
        self.assertEqual(results[1].index, 1)
        self.assertIn("ctp.", results[1].message)
        self.assertEqual(results[0], results[2])
        self.assertNotIsInstance(results[0], BatchError)

    def test_parallel_matches_sequential(self):
        report = scaling_check(self.scenarios(8), parallelism=8)
        self.assertTrue(report["identical"])
        self.assertEqual(report["jensen"]["distance"], 0.0)
        self.assertTrue(report["jensen"]["insignificant"])

    def test_consistency_experiment(self):
        bottleneck = BottleneckConfig(shaping_rate_bps=5 * MBPS, base_latency_ms=10)
        steady = Scenario(bottleneck, AppFlowConfig(duration_s=2))
        report = consistency_experiment(steady, 3)
        self.assertEqual(report["throughput"]["pairs"], 3)
        self.assertEqual(report["throughput"]["mean"], 0.0)
        self.assertEqual(report["rtt"]["mean"], 0.0)
        jittered = Scenario(bottleneck, AppFlowConfig(duration_s=2, start_jitter_ms=200))
        self.assertGreater(consistency_experiment(jittered, 3)["throughput"]["mean"], 0.0)
        with self.assertRaises(ConfigError):
            consistency_experiment(steady, 1)
