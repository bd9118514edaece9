from dataclasses import replace
from pathlib import Path
import json
import tempfile

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from netreplica.exceptions import ConfigError, SamplingError
from profiles.synthetic import make_profile
from .mechanisms import compare_mechanisms
from .sampling import SamplingPlan, stratified_sample, toggle_count
from .serializers import sampling_plan, write_jsonl
from .trimming import filter_profiles, max_bin_bytes, trim_profile, trim_profiles

ON = 50_000  # 4 Mbps in a 100 ms bin
OFF = 0


def mbps_bins(*rates_mbps):
    """100 ms bins carrying the given rates."""
    return [int(rate * 1e6 * 0.1 / 8) for rate in rates_mbps]


def random_trimmable(count, seed):
    rng = np.random.default_rng(seed)
    profiles = []
    for _ in range(count):
        bins = rng.integers(1000, 250_000, size=20)
        bins[rng.random(20) < 0.3] = 0
        bins[rng.integers(0, 20)] = rng.integers(1000, 250_000)
        profiles.append(make_profile(bins))
    return profiles


class FilterTests(SimpleTestCase):
    def test_keeps_profiles_under_threshold(self):
        low = make_profile(mbps_bins(1, 5))
        high = make_profile(mbps_bins(1, 12))
        self.assertEqual(filter_profiles([low, high], 10e6), [low])
        self.assertEqual(filter_profiles([low, high], 0.5e6), [])

    def test_threshold_at_peak_is_kept(self):
        profile = make_profile(mbps_bins(2, 5))
        self.assertEqual(filter_profiles([profile], profile.metrics.max_throughput_bps), [profile])

    def test_threshold_must_be_positive(self):
        with self.assertRaises(ConfigError):
            filter_profiles([], 0)


class TrimTests(SimpleTestCase):
    def test_halves_bins(self):
        profile = make_profile([1000, 3000])
        self.assertAlmostEqual(profile.metrics.max_throughput_bps, 240_000)
        trimmed, report = trim_profile(profile, 120_000)
        self.assertEqual(trimmed.bins.tolist(), [500, 1500])
        self.assertEqual(report.scale_factor, 0.5)
        self.assertNotEqual(trimmed.id, profile.id)
        self.assertEqual(report.trimmed_id, trimmed.id)
        self.assertAlmostEqual(trimmed.metrics.max_throughput_bps, 120_000)

    def test_ratio_metrics_survive_scaling(self):
        profile = make_profile(mbps_bins(20, 4, 8, 0, 12), host_count=3, flow_count=7)
        trimmed, report = trim_profile(profile, 10e6)
        self.assertEqual(report.scale_factor, 0.5)
        self.assertEqual(trimmed.bins.tolist(), mbps_bins(10, 2, 4, 0, 6))
        self.assertAlmostEqual(trimmed.metrics.pmr, profile.metrics.pmr)
        self.assertAlmostEqual(trimmed.metrics.cov, profile.metrics.cov)
        self.assertEqual((trimmed.metrics.host_count, trimmed.metrics.flow_count), (3, 7))

    def test_under_threshold_is_identity(self):
        profile = make_profile(mbps_bins(8, 2))
        trimmed, report = trim_profile(profile, 10e6)
        self.assertIs(trimmed, profile)
        self.assertEqual(report.scale_factor, 1.0)

    def test_all_zero_profile_unchanged(self):
        profile = make_profile([0, 0, 0])
        trimmed, report = trim_profile(profile, 1e6)
        self.assertIs(trimmed, profile)
        self.assertEqual(report.scale_factor, 1.0)

    def test_round_half_down(self):
        # scale 0.375: 4 -> 1.5 -> 1
        trimmed, report = trim_profile(make_profile([4, 8]), 240.0)
        self.assertEqual(report.scale_factor, 0.375)
        self.assertEqual(trimmed.bins.tolist(), [1, 3])

    def test_max_bin_bytes(self):
        self.assertEqual(max_bin_bytes(120_000, 0.1), 1500)
        self.assertEqual(max_bin_bytes(120_001, 0.1), 1500)
        self.assertEqual(max_bin_bytes(50, 0.1), 0)

    def test_trim_invariance_on_random_profiles(self):
        for profile in random_trimmable(1000, seed=3):
            threshold = profile.metrics.max_throughput_bps / 2
            trimmed, report = trim_profile(profile, threshold)
            self.assertLessEqual(trimmed.metrics.max_throughput_bps, threshold)
            self.assertLess(report.scale_factor, 1.0)
            for name in ("pmr", "pmr95", "cov"):
                before, after = getattr(profile.metrics, name), getattr(trimmed.metrics, name)
                self.assertLessEqual(abs(after - before), 0.01 * before, name)

    def test_trimmed_superset_of_filtered(self):
        profiles = random_trimmable(200, seed=4)
        for threshold in (2e6, 5e6, 10e6, 20e6):
            filtered = filter_profiles(profiles, threshold)
            trimmed, reports = trim_profiles(profiles, threshold)
            unchanged = {r.profile_id for r in reports if r.scale_factor == 1.0}
            self.assertTrue({p.id for p in filtered} <= unchanged)
            self.assertGreaterEqual(len(trimmed), len(filtered))
            self.assertTrue(all(p.metrics.max_throughput_bps <= threshold for p in trimmed))

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.integers(0, 10**7), min_size=1, max_size=30),
        st.floats(1.0, 1e9, allow_nan=False, allow_infinity=False),
    )
    def test_trimmed_peak_never_exceeds_threshold(self, bins, threshold):
        trimmed, _ = trim_profile(make_profile(bins), threshold)
        self.assertLessEqual(trimmed.metrics.max_throughput_bps, threshold)


class ToggleTests(SimpleTestCase):
    plan = SamplingPlan()

    def test_all_off(self):
        self.assertEqual(toggle_count(make_profile([100] * 10), self.plan), 0)

    def test_alternating(self):
        self.assertEqual(toggle_count(make_profile([ON, OFF] * 5), self.plan), 9)

    def test_example_pattern(self):
        self.assertEqual(toggle_count(make_profile([ON, ON, OFF, ON]), self.plan), 2)

    def test_threshold_is_strict(self):
        at_threshold = 37_500  # exactly 3 Mbps
        self.assertEqual(toggle_count(make_profile([at_threshold, OFF, at_threshold]), self.plan), 0)

    def test_finer_bins_are_summed(self):
        profile = make_profile([5_000] * 10 + [0] * 10 + [1] * 5, bin_width_ms=10)
        self.assertEqual(toggle_count(profile, self.plan), 1)

    def test_incompatible_segment(self):
        with self.assertRaises(SamplingError):
            toggle_count(make_profile([ON] * 4), SamplingPlan(segment_ms=150))


class StratifiedSampleTests(SimpleTestCase):
    def bucketed_profiles(self):
        profiles = [make_profile([k + 1] * 4) for k in range(100)]
        profiles += [make_profile([ON + k, OFF, OFF, OFF]) for k in range(60)]
        profiles += [make_profile([OFF, ON + k, OFF, OFF]) for k in range(10)]
        return profiles

    def test_bucket_sizes(self):
        sample, report = stratified_sample(self.bucketed_profiles(), SamplingPlan(per_bucket=50, seed=5))
        sizes = {}
        for profile in sample:
            sizes[profile.metrics.toggle_count] = sizes.get(profile.metrics.toggle_count, 0) + 1
        self.assertEqual(sizes, {1: 50, 2: 10})
        self.assertEqual(report.out_of_range, 100)
        self.assertEqual(report.buckets[1], {"available": 60, "drawn": 50})
        self.assertEqual(len({p.id for p in sample}), len(sample))

    def test_repeated_id_is_sampled_once(self):
        first = make_profile([ON, OFF, OFF, OFF])
        second = replace(first, series=make_profile([OFF, ON, OFF, OFF]).series)
        self.assertEqual(first.id, second.id)
        profiles = [first, make_profile([ON, ON, OFF, OFF]), second]
        sample, report = stratified_sample(profiles, SamplingPlan(per_bucket=50))
        ids = [p.id for p in sample]
        self.assertEqual(len(ids), 2)
        self.assertEqual(len(set(ids)), 2)
        (kept,) = [p for p in sample if p.id == first.id]
        self.assertEqual(kept.metrics.toggle_count, 2)
        self.assertEqual(report.duplicates, 1)
        self.assertEqual(report.as_dict()["duplicates"], 1)

    def test_large_bucket_limit_returns_everything(self):
        sample, _ = stratified_sample(self.bucketed_profiles(), SamplingPlan(per_bucket=1000))
        self.assertEqual(len(sample), 70)

    def test_deterministic(self):
        plan = SamplingPlan(per_bucket=7, seed=11)
        first, _ = stratified_sample(self.bucketed_profiles(), plan)
        second, _ = stratified_sample(list(reversed(self.bucketed_profiles())), plan)
        self.assertEqual([p.id for p in first], [p.id for p in second])

    def test_zero_toggle_bucket_when_range_allows(self):
        sample, _ = stratified_sample(self.bucketed_profiles(), SamplingPlan(toggle_min=0, toggle_max=0, per_bucket=5))
        self.assertEqual(len(sample), 5)
        self.assertTrue(all(p.metrics.toggle_count == 0 for p in sample))

    def test_plan_validation(self):
        with self.assertRaises(ConfigError):
            SamplingPlan(per_bucket=0)
        with self.assertRaises(ConfigError) as ctx:
            sampling_plan({"toggle_min": 5, "toggle_max": 1})
        self.assertEqual(ctx.exception.field, "toggle_max")
        self.assertEqual(sampling_plan({"per_bucket": 3, "seed": None}), SamplingPlan(per_bucket=3))


class MechanismTests(SimpleTestCase):
    def test_counts_and_floor(self):
        profiles = [
            make_profile(mbps_bins(*[16] * 10)),
            make_profile(mbps_bins(*[8] * 10)),
            make_profile(mbps_bins(*[0.08] * 10)),
        ]
        comparison = compare_mechanisms(profiles, threshold_bps=10e6)
        self.assertEqual((comparison.candidates, comparison.filtered, comparison.trimmed), (2, 1, 2))
        self.assertEqual(comparison.gain, 2.0)
        self.assertEqual(comparison.jensen_distance, 0.0)

    def test_nothing_passes_filtering(self):
        comparison = compare_mechanisms([make_profile(mbps_bins(*[16] * 10))], threshold_bps=10e6)
        self.assertEqual(comparison.filtered, 0)
        self.assertIsNone(comparison.jensen_distance)
        self.assertIsNone(comparison.as_dict()["gain"])


class ReportOutputTests(SimpleTestCase):
    def test_trim_reports_as_jsonl(self):
        _, reports = trim_profiles([make_profile([1000, 3000]), make_profile([10, 10])], 120_000)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "reports.jsonl"
            self.assertEqual(write_jsonl(path, reports), 2)
            rows = [json.loads(line) for line in path.read_text().splitlines()]
        self.assertEqual(rows[0]["scale_factor"], 0.5)
        self.assertEqual(rows[1]["scale_factor"], 1.0)
